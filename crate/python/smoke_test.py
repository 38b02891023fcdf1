"""Smoke test for the vdcs Python extension.

Build and run from the repository root:

    cargo build -p vdcs-python --release --features extension-module
    cp target/release/libvdcs_py.so python/vdcs.so
    python3 python/smoke_test.py
"""

import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import numpy as np

import vdcs


def check_transforms():
    op = vdcs.UnitaryOperator.compose(vdcs.UnitaryOperator.dft(64), vdcs.UnitaryOperator.haar(64, 3))
    x = np.random.default_rng(0).standard_normal(64)
    y = np.array(op.forward_real(list(x)))
    assert abs(np.linalg.norm(y) - np.linalg.norm(x)) < 1e-10
    back = np.array(op.adjoint(list(y)))
    assert np.allclose(back.real, x) and np.allclose(back.imag, 0)
    assert np.allclose(vdcs.UnitaryOperator.dft(16).forward([1] + [0] * 15), np.full(16, 0.25))
    try:
        vdcs.UnitaryOperator.dft(12)
    except ValueError:
        pass
    else:
        raise AssertionError("dft(12) should fail")
    return op


def check_sampling(op):
    alpha = vdcs.sparse_coherence_upper(op, 4)
    plan = vdcs.SamplingPlan.optimized(alpha)
    p = np.array(plan.p)
    assert abs(p.sum() - 1) < 1e-12
    mu = vdcs.complexity_mu(alpha.alpha, plan.p)
    assert abs(mu - alpha.norm()) < 1e-12
    uni = vdcs.SamplingPlan.uniform(op.n)
    assert vdcs.complexity_mu(alpha.alpha, uni.p) >= mu - 1e-12
    sample = plan.draw(32, 7)
    assert sample.m == 32 and sample.omega == plan.draw(32, 7).omega
    assert abs(sample.scale - math.sqrt(64 / 32)) < 1e-12
    nf = vdcs.noise_factor(plan, sample, alpha)
    assert 0 < nf <= max(plan.d) + 1e-12
    v, t = vdcs.unit_truncation([0.6, 0.6, 0.6])
    assert t == 3 and abs(np.linalg.norm(v) - 1) < 1e-12
    return plan, sample


def check_recovery(op, plan, sample):
    x0 = np.zeros(64)
    x0[[0, 3, 9]] = [1.0, -0.5, 0.8]
    res = vdcs.recover_sparse(op, plan, sample, list(x0), 0.0, 3, seed=1)
    assert res["rre"] < 1e-8, res
    assert sorted(res["support"]) == [0, 3, 9]


def check_harness():
    cfg = (
        "prior = sparse\nn = 64\nk = 3\nmeasurement = dft\nsparsity_basis = haar\nhaar_levels = 3\n"
        "m_grid = 16, 32, 64\nsigma_grid = 0.5\ntrials = 4\nmaster_seed = 1\n"
    )
    rows = vdcs.compare_schemes(cfg)
    assert len(rows) == 2 * 3 * 4
    assert {r["scheme"] for r in rows} == {"optimized", "uniform"}
    assert rows == vdcs.compare_schemes(cfg)
    g, se = vdcs.geometric_stats([1.0, 4.0, 16.0])
    assert abs(g - 4.0) < 1e-12 and se > 1
    pts = [(m, 3.0 * m ** -0.5) for m in (10, 20, 40, 80)]
    assert abs(vdcs.fit_loglog_slope(pts, window=(1, 100)) + 0.5) < 1e-12
    try:
        vdcs.denoise_sweep("prior = sparse\nbogus = 1\n")
    except ValueError:
        pass
    else:
        raise AssertionError("bad config should fail")


def main():
    op = check_transforms()
    plan, sample = check_sampling(op)
    check_recovery(op, plan, sample)
    check_harness()
    print("smoke test passed")


if __name__ == "__main__":
    main()
