"""Smoke test for the pyipdg1d extension module.

Builds the extension with cargo (unless --no-build), places it next to this
script and exercises the public API.

    python3 python/smoke_test.py
"""

import argparse
import math
import shutil
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
HERE = Path(__file__).resolve().parent


def build() -> None:
    subprocess.run(
        ["cargo", "build", "-p", "ipdg1d-python", "--release", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    for name in ("libpyipdg1d.so", "libpyipdg1d.dylib"):
        lib = ROOT / "target" / "release" / name
        if lib.exists():
            shutil.copy(lib, HERE / "pyipdg1d.so")
            return
    sys.exit("built library not found under target/release")


def eoc(e0: float, e1: float, h0: float, h1: float) -> float:
    return math.log(e0 / e1) / math.log(h0 / h1)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--no-build", action="store_true")
    args = ap.parse_args()
    if not args.no_build:
        build()
    sys.path.insert(0, str(HERE))
    import pyipdg1d as ip

    print("pyipdg1d", ip.__version__)

    mesh = ip.Mesh1D.uniform(8)
    assert mesh.num_elements == 8 and abs(mesh.h_max - 0.125) < 1e-15
    assert len(mesh.refine().vertices) == 17

    space = ip.DgSpace(mesh, 2)
    assert space.total_dofs == 24
    u = space.project(lambda x: x * (1.0 - x))
    assert abs(u.evaluate(0.3) - 0.21) < 1e-12

    c1 = ip.C1Space(mesh, 2)
    for s in (c1.averaging_reconstruct(u), c1.ritz_reconstruct(u)):
        assert abs(s.evaluate(0.3) - 0.21) < 1e-10
        assert abs(s.evaluate(0.3, 1) - 0.4) < 1e-8

    mats = space.matrices(40.0, 1.0)
    a = mats["a_primal"]
    assert all(abs(a[i][j] - a[j][i]) < 1e-12 * 1e3 for i in range(24) for j in range(24))

    rows = ip.convergence_study("smooth", [8, 16, 32, 64])
    r = eoc(rows[-2]["err_znorm"], rows[-1]["err_znorm"], rows[-2]["h_max"], rows[-1]["h_max"])
    print(f"smooth znorm EOC {r:.3f}")
    assert 2.85 <= r <= 3.15

    uh = ip.solve("delta-prime", ip.Mesh1D.uniform(32))
    assert math.isfinite(uh.norms()["l2"])

    levels = ip.infsup_sweep([8, 16])
    print("gamma_V", [round(l["gamma_V"], 6) for l in levels])
    assert all(l["gamma_V"] > 0 and l["gamma_W"] > 0 for l in levels)

    assert ip.wh_dimension(ip.Mesh1D.uniform(4), 2, 1e-10) > space.total_dofs // 2

    results = ip.property_suite(meshes=[8, 16], samples=20)
    failed = [name for name, ok, _, _ in results if not ok]
    assert not failed, failed

    try:
        ip.Mesh1D([0.0, 0.5, 0.5, 1.0])
    except ValueError:
        pass
    else:
        raise AssertionError("degenerate mesh accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
