//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::process::Command;
use std::time::Instant;

use ipdg1d::analysis::{
    dual_assembly_discrepancy, eoc, infsup_sweep, max_over_min, orthogonality_residual, property_suite,
    standard_normal_ensemble, CheckConfig, LevelContext,
};
use ipdg1d::problems::{convergence_study, ErrorRecord, ProblemSpec};
use ipdg1d::{assemble_ip, DgSpace, Mesh1D, PenaltyParams};

const DOMAIN: (f64, f64) = (0.0, 1.0);

struct Outcome {
    passed: bool,
    summary: String,
}

fn outcome(passed: bool, summary: String) -> Outcome {
    Outcome { passed, summary }
}

fn last_eoc(recs: &[ErrorRecord], pick: fn(&ErrorRecord) -> f64) -> f64 {
    eoc(&recs.iter().map(|r| (r.h_max, pick(r))).collect::<Vec<_>>())
        .unwrap()
        .last()
        .unwrap_or(f64::NAN)
}

fn within(v: f64, lo: f64, hi: f64) -> bool {
    v >= lo && v <= hi
}

fn smooth_convergence() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for k in [2usize, 3] {
        let recs = convergence_study(
            &ProblemSpec::sine(DOMAIN),
            &[8, 16, 32, 64, 128, 256],
            DOMAIN,
            k,
            PenaltyParams::new(40.0, 1.0).unwrap(),
        )
        .unwrap();
        let s = (k - 2) as f64;
        let z = last_eoc(&recs, |r| r.err_znorm);
        let e = last_eoc(&recs, |r| r.err_enorm);
        let ee = last_eoc(&recs, |r| r.err_eenorm);
        let c = last_eoc(&recs, |r| r.err_scaled);
        ok &= within(z, 2.85 + s, 3.15 + s)
            && within(e, 1.85 + s, 2.15 + s)
            && within(ee, 0.85 + s, 1.15 + s)
            && within(c, 2.85 + s, 3.15 + s);
        parts.push(format!("k={k}: znorm {z:.3} enorm {e:.3} eenorm {ee:.3} combined {c:.3}"));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 20.0;
    outcome(ok, format!("{} ({secs:.2} s)", parts.join("; ")))
}

fn rough_rate() -> Outcome {
    let start = Instant::now();
    let counts = [16, 32, 64, 128, 256, 512, 1024];
    let recs = convergence_study(
        &ProblemSpec::delta_prime(0.6366),
        &counts,
        DOMAIN,
        2,
        PenaltyParams::new(40.0, 1.0).unwrap(),
    )
    .unwrap();
    let n = recs.len();
    // rate over the last three intervals taken together
    let (a, b) = (&recs[n - 4], &recs[n - 1]);
    let rate = (a.err_l2 / b.err_l2).ln() / (a.h_max / b.h_max).ln();
    let monotone = recs.windows(2).all(|w| w[1].err_l2 < w[0].err_l2);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        within(rate, 0.40, 0.70) && monotone && secs < 30.0,
        format!("L2 EOC over last three intervals {rate:.3}, monotone {monotone} ({secs:.2} s)"),
    )
}

fn infsup_independence() -> Outcome {
    let start = Instant::now();
    let r = infsup_sweep(&[8, 16, 32, 64], DOMAIN, 2, PenaltyParams::new(40.0, 1.0).unwrap()).unwrap();
    let pos = r.levels.iter().all(|l| l.gamma_v > 0.0 && l.gamma_w > 0.0);
    let rv = r.gamma_ratio(|l| l.gamma_v);
    let rw = r.gamma_ratio(|l| l.gamma_w);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        pos && rv <= 2.0 && rw <= 2.0 && secs < 30.0,
        format!(
            "gamma_V in [{:.4}, {:.4}] ratio {rv:.4}; gamma_W ratio {rw:.4} ({secs:.2} s)",
            r.levels.iter().map(|l| l.gamma_v).fold(f64::INFINITY, f64::min),
            r.levels.iter().map(|l| l.gamma_v).fold(0.0, f64::max)
        ),
    )
}

fn coercivity_threshold() -> Outcome {
    let lambda = |sigma0: f64, sigma1: f64, n: usize| {
        let space = DgSpace::new(Mesh1D::uniform(n, DOMAIN).unwrap(), 2).unwrap();
        assemble_ip(&space, PenaltyParams::new(sigma0, sigma1).unwrap())
            .coercivity_constant()
            .unwrap()
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for sigma1 in [0.0, 1.0] {
        let l: Vec<f64> = [8, 16, 32, 64].iter().map(|&n| lambda(40.0, sigma1, n)).collect();
        let ratio = max_over_min(&l);
        ok &= l.iter().all(|&v| v > 0.0) && ratio <= 2.0;
        parts.push(format!("sigma1={sigma1}: min {:.4} ratio {ratio:.4}", l.iter().copied().fold(f64::INFINITY, f64::min)));
    }
    let tiny = lambda(0.01, 1.0, 16);
    ok &= tiny <= 0.0;
    outcome(ok, format!("{}; sigma0=0.01 gives {tiny:.4}", parts.join("; ")))
}

fn ritz_orthogonality() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in [8, 16, 32, 64] {
        let ctx = LevelContext::new(Mesh1D::uniform(n, DOMAIN).unwrap(), 2, PenaltyParams::new(40.0, 1.0).unwrap()).unwrap();
        let laps = ctx.ops.s_laplacians();
        for u in standard_normal_ensemble(ctx.ops.space.total_dofs(), 100, 7 + n as u64) {
            worst = worst.max(orthogonality_residual(&ctx.ops, &laps, &u));
        }
    }
    outcome(worst <= 1e-9, format!("max relative residual {worst:.3e} (100 samples per level, n = 8..64)"))
}

fn dual_assembly() -> Outcome {
    let d2 = dual_assembly_discrepancy(2, PenaltyParams::new(40.0, 1.0).unwrap(), 20, 11).unwrap();
    let d3 = dual_assembly_discrepancy(3, PenaltyParams::new(90.0, 1.0).unwrap(), 20, 12).unwrap();
    outcome(
        d2 <= 1e-10 && d3 <= 1e-10,
        format!("max relative discrepancy k=2 {d2:.3e}, k=3 {d3:.3e} over 20 random meshes"),
    )
}

fn suite(k: usize) -> Vec<ipdg1d::analysis::PropertyResult> {
    property_suite(&CheckConfig {
        k,
        params: PenaltyParams::default_for(k),
        meshes: vec![8, 16, 32, 64],
        domain: DOMAIN,
        seed: 7,
        samples: 100,
    })
    .unwrap()
    .1
}

fn pick<'a>(results: &'a [ipdg1d::analysis::PropertyResult], name: &str) -> &'a ipdg1d::analysis::PropertyResult {
    results.iter().find(|r| r.property == name).unwrap()
}

fn reconstruction_bounds(s2: &[ipdg1d::analysis::PropertyResult], s3: &[ipdg1d::analysis::PropertyResult]) -> Outcome {
    let names = ["averaging_bound", "ritz_bound_alpha0", "ritz_bound_alpha1", "ritz_bound_alpha2", "ritz_h1_stability"];
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for s in [s2, s3] {
        for n in names {
            let r = pick(s, n);
            ok &= r.observed.abs() <= 0.2;
            worst = worst.max(r.observed.abs());
        }
    }
    outcome(ok, format!("largest |slope| of worst-case constants {worst:.3e} (k = 2, 3; n = 8..64)"))
}

fn proof_construction(s2: &[ipdg1d::analysis::PropertyResult]) -> Outcome {
    let lo = pick(s2, "proof_lower_ratio");
    let up = pick(s2, "proof_upper_ratio");
    outcome(
        lo.passed && up.passed,
        format!("lower-ratio minimum {:.4} ({}); upper-ratio spread {:.4}", lo.observed, lo.detail, up.observed),
    )
}

fn ritz_projection(s2: &[ipdg1d::analysis::PropertyResult]) -> Outcome {
    let r = pick(s2, "ritz_projection_stability");
    outcome(r.observed <= 2.0, format!("max/min of per-level maxima {:.4}", r.observed))
}

fn determinism() -> Outcome {
    let exe = env!("CARGO_BIN_EXE_ipdg1d");
    let runs: [&[&str]; 3] = [
        &["run", "--problem", "smooth", "--meshes", "8,16,32", "--seed", "7"],
        &["run", "--problem", "delta-prime", "--meshes", "16,32,64", "--seed", "7", "--format", "json"],
        &["check", "--k", "2", "--meshes", "8,16", "--seed", "7"],
    ];
    let mut ok = true;
    for args in runs {
        let out: Vec<Vec<u8>> = (0..2)
            .map(|_| Command::new(exe).args(args).output().unwrap().stdout)
            .collect();
        ok &= !out[0].is_empty() && out[0] == out[1];
    }
    outcome(ok, "run (csv, json) and check outputs byte-identical across invocations".into())
}

fn main() {
    let start = Instant::now();
    let mut failures = 0;
    let mut report = |id: usize, name: &str, o: Outcome| {
        println!("[{}] {id:>2} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.summary);
        if !o.passed {
            failures += 1;
        }
    };
    report(1, "smooth convergence", smooth_convergence());
    report(2, "rough-data rate", rough_rate());
    report(3, "inf-sup h-independence", infsup_independence());
    report(4, "coercivity threshold", coercivity_threshold());
    report(5, "Ritz orthogonality", ritz_orthogonality());
    report(6, "dual-assembly equivalence", dual_assembly());
    let s2 = suite(2);
    let s3 = suite(3);
    report(7, "reconstruction bounds", reconstruction_bounds(&s2, &s3));
    report(8, "proof construction", proof_construction(&s2));
    report(9, "Ritz-projection stability", ritz_projection(&s2));
    report(10, "determinism", determinism());
    println!("acceptance: {} of 10 passed in {:.2} s", 10 - failures, start.elapsed().as_secs_f64());
    if failures > 0 {
        std::process::exit(1);
    }
}
