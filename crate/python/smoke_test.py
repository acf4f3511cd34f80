"""Smoke test for the anisolab Python extension.

Build the extension first:

    cargo build --release -p anisolab-py

The script imports an installed `anisolab` if there is one, otherwise it
loads target/release/libanisolab.so from the workspace.
"""

import importlib.util
import math
import pathlib
import sys

ROOT = pathlib.Path(__file__).resolve().parents[1]


def load():
    try:
        import anisolab

        return anisolab
    except ImportError:
        pass
    for name in ("libanisolab.so", "libanisolab.dylib", "anisolab.pyd"):
        path = ROOT / "target" / "release" / name
        if path.exists():
            spec = importlib.util.spec_from_file_location("anisolab", path)
            module = importlib.util.module_from_spec(spec)
            spec.loader.exec_module(module)
            return module
    sys.exit("anisolab extension not found; run `cargo build --release -p anisolab-py`")


def main():
    al = load()

    baker = al.Map.builtin("baker")
    assert baker.dim == 2 and baker.branch_count == 2
    assert baker.validate()["passed"]
    again = al.Map.from_json(baker.to_json())
    assert again.validate() == baker.validate()

    sloppy = al.Map.builtin("sloppy_baker", {"a": "1/3", "b": "1/7"})
    assert sloppy.validate()["passed"]

    rows = baker.complexity(4)["rows"]
    assert [(r["d_b"], r["d_e"]) for r in rows] == [(2, 2)] * 4

    opt = al.bound_optimize(baker, n=8)
    assert opt["value"] <= 2 ** (-3 / 8) + 1e-3, opt
    assert abs(opt["p"] - 2) <= 0.1

    assert abs(al.contracting_pair(2.0, -0.25) - 2 ** 0.25) < 1e-12

    ulam = al.UlamMatrix(baker, 8)
    assert ulam.size == 64 and ulam.is_row_stochastic()
    lam = ulam.leading_spectrum(2)
    assert abs(lam[0] - 1) < 1e-10

    dirac = al.probe_dirac(2.0, 0.3, -0.4, [32, 64, 128])
    assert dirac[0] < dirac[1] < dirac[2]

    ind = al.probe_indicator(0.0, 0.5, 2.0, 0.7, [64, 4096])
    assert ind[1] / ind[0] > 2

    b = al.birkhoff(sloppy, "cos2pix", seed=7, starts=10, length=5000)
    assert b["all_within_band"] and b["clusters"]["k"] == 1

    c = al.correlation(baker, "cos2pix", n_max=5, seed=7, starts=10, length=5000)
    assert math.isclose(c["values"][0], 0.5, abs_tol=0.05)

    print("python smoke test: OK")


if __name__ == "__main__":
    main()
