//! Legendre polynomials on [-1, 1] with first and second derivatives.

/// `out[m] = [P_m(xi), P_m'(xi), P_m''(xi)]` for `m = 0..=degree`.
pub fn legendre_derivs(degree: usize, xi: f64) -> Vec<[f64; 3]> {
    let mut out = vec![[0.0; 3]; degree + 1];
    out[0] = [1.0, 0.0, 0.0];
    if degree == 0 {
        return out;
    }
    out[1] = [xi, 1.0, 0.0];
    for n in 1..degree {
        let nf = n as f64;
        let [p, dp, _] = out[n];
        let [pm, dpm, ddpm] = out[n - 1];
        let next = ((2.0 * nf + 1.0) * xi * p - nf * pm) / (nf + 1.0);
        // P'_{n+1} = P'_{n-1} + (2n+1) P_n, and likewise one derivative up
        let dnext = dpm + (2.0 * nf + 1.0) * p;
        let ddnext = ddpm + (2.0 * nf + 1.0) * dp;
        out[n + 1] = [next, dnext, ddnext];
    }
    out
}
