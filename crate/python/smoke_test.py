"""Smoke test for the posthoc extension module.

Build and install first, e.g.
    pip install maturin
    maturin build --release -m crates/python/Cargo.toml
    pip install target/wheels/posthoc-*.whl
"""

import math
import random

import posthoc


def main():
    p = [0.01, 0.05, 0.2, 0.35]
    assert posthoc.simes_bound(p, [0, 1, 2, 3], 0.4) == 2
    assert posthoc.k0_bonferroni(p, [0, 1], 0.4) == 0
    assert posthoc.threshold_bound(p, [0, 1, 2, 3], "linear", 0.4) == 2

    s = posthoc.Session.from_pvalues(["g1", "g2", "g3", "g4"], p, 0.4)
    ans = s.bound(["g1", "g2", "g3", "g4"])
    assert (ans["V"], ans["tp_lower"], ans["fdp_upper"]) == (2, 2, 0.5), ans
    assert s.bound("top:2")["size"] == 2
    try:
        s.bound(["g1", "nope"])
    except KeyError as e:
        assert "nope" in str(e)
    else:
        raise AssertionError("unknown id accepted")

    rng = random.Random(1)
    rows = [[rng.gauss(5.0, 1.0) + (1.5 if i < 5 and j >= 6 else 0.0) for j in range(12)] for i in range(30)]
    labels = [1] * 6 + [2] * 6
    ds = posthoc.Session.from_dataset([f"r{i}" for i in range(30)], rows, labels, 0.1)
    lam = ds.calibrate("beta", b=200, seed=3)
    assert 0.0 <= lam <= 1.0
    assert lam == ds.calibrate("beta", b=200, seed=3)
    meta = ds.meta()
    assert meta["m"] == 30 and "beta" in meta["lambda"]
    env = ds.envelope("calibrated:beta")
    assert len(env["k"]) == 30 and env["lambda"] == lam
    assert len(ds.points()) == 30

    assert abs(posthoc.simes_violation_probability(0.0, 0.2) - 0.2) < 1e-6
    assert abs(1 - posthoc.beta_cdf(0.025, 5, 496) - 0.005) < 0.002
    cov = posthoc.full_null_coverage("bonf", 100, 0.05, 4000, seed=1)
    assert abs(cov["coverage"] - (1 - 0.05 / 100) ** 100) < 0.02, cov
    assert math.isfinite(cov["mc_sd"])
    print("python smoke test: ok")


if __name__ == "__main__":
    main()
