"""Acceptance criteria, one printed PASS/FAIL line each.

Criterion 8 trains two full-size networks for 500 epochs on 2000 N-body
samples (about 95 minutes on one core). Set PONITA_SKIP_SLOW=1 to skip it
during development; the default run includes it.
"""
import os
import time

import numpy as np
import pytest

from ponita import audit
from ponita.models import parameter_count
from ponita.nbody import nbody_generate
from ponita.training import TrainConfig, build_model, train


@pytest.fixture
def emit(capsys):
    def _emit(number, title, passed, detail):
        status = "PASS" if passed else "FAIL"
        with capsys.disabled():
            print(f"\n[{status}] criterion {number}: {title}: {detail}")
    return _emit


def _all(checks):
    return all(c.passed for c in checks)


def test_criterion_1_attribute_invariance_and_round_trip(emit):
    t0 = time.perf_counter()
    inv = audit.attribute_invariance(1000, rng_seed=11, tol=1e-10)
    rt = audit.attribute_round_trip(1000, rng_seed=12, tol=1e-10)
    seconds = time.perf_counter() - t0
    ok = inv.passed and rt.passed and seconds < 5.0
    emit(1, "attribute invariance / round trip (R2, R3, R2xS1, R3xS2, SE2, SE3; 1000 pairs)", ok,
         f"invariance {inv.value:.2e}, round trip {rt.value:.2e} (tol 1e-10), {seconds:.2f} s (limit 5 s)")
    assert ok


def test_criterion_2_stabilizer_independence(emit):
    c = audit.stabilizer_independence(1000, rng_seed=21, tol=1e-12)
    emit(2, "stabilizer independence (1000 trials)", c.passed,
         f"max {c.value:.2e} (tol 1e-12): {c.detail}")
    assert c.passed


def test_criterion_3_corotated_equivariance(emit):
    t0 = time.perf_counter()
    s, v = audit.corotation_check(trials=100, rng_seed=31, grid_n=12, tol=1e-9)
    seconds = time.perf_counter() - t0
    ok = s.passed and v.passed and seconds < 60.0
    emit(3, "co-rotated equivariance, L=3 C=32 N=12, 100 motions", ok,
         f"scalar {s.value:.2e}, vector {v.value:.2e} (tol 1e-9 relative), {seconds:.1f} s (limit 60 s)")
    assert ok


def test_criterion_4_fixed_grid_trend(emit):
    c = audit.fixed_grid_trend((4, 12, 20, 60), rng_seed=41)
    emit(4, "fixed-grid mean deviation strictly decreasing in N", c.passed, c.detail)
    assert c.passed


def test_criterion_5_separability(emit):
    c = audit.separability_check(draws=10, rng_seed=51, tol=1e-8)
    emit(5, "separable conv == full point-cloud conv (10 draws)", c.passed,
         f"max abs difference {c.value:.2e} (tol 1e-8)")
    assert c.passed


def test_criterion_6_gradients_and_forces(emit):
    checks = audit.gradient_checks(rng_seed=61, n_coords=20, h=1e-6, tol=1e-5)
    grads = [c for c in checks if c.name.startswith("gradcheck")]
    forces = [c for c in checks if c.name.startswith("forces")]
    net = [c for c in checks if c.name.startswith("net force")]
    ok = _all(checks)
    failed = [c.name for c in checks if not c.passed]
    emit(6, f"finite-difference checks ({len(grads)} layers/networks, h=1e-6, 20 coords)", ok,
         f"worst gradient {max(c.value for c in grads):.2e} (tol 1e-5), "
         f"forces {max(c.value for c in forces):.2e} (tol 1e-5), "
         f"net force {max(c.value for c in net):.2e} (tol 1e-7)"
         + (f"; failed: {failed}" if failed else ""))
    assert ok


def test_criterion_7_grid_quality(emit):
    checks = audit.grid_quality(rng_seed=0, tol_deg=0.5, tol_moment=1e-6)
    ok = _all(checks)
    emit(7, "repulsion grids vs platonic angles, icosahedral second moment", ok,
         "; ".join(f"{c.name}: {c.value:.2e}" for c in checks))
    assert ok


@pytest.mark.slow
@pytest.mark.skipif(os.environ.get("PONITA_SKIP_SLOW", "") not in ("", "0"),
                    reason="PONITA_SKIP_SLOW set")
def test_criterion_8_nbody_ponita_beats_distance_baseline(emit, tmp_path):
    samples = nbody_generate(2000, 3)
    base = dict(layers=5, channels=64, grid_n=12, epochs=500, f32=True, seed=0)
    ponita_cfg = TrainConfig(model="ponita", **base)
    target = parameter_count(build_model(ponita_cfg).init(0))
    pnita_cfg = TrainConfig(model="pnita", match_params_to=target, **base)
    t0 = time.perf_counter()
    r_ponita = train(ponita_cfg, samples, tmp_path / "ponita")
    r_pnita = train(pnita_cfg, samples, tmp_path / "pnita")
    minutes = (time.perf_counter() - t0) / 60
    ok = r_ponita.final_val < r_pnita.final_val
    emit(8, "N-body val MSE, PONITA (L=5 C=64 N=12, 500 epochs) < matched PNITA", ok,
         f"PONITA {r_ponita.final_val:.5f} ({r_ponita.parameter_count} params) vs "
         f"PNITA {r_pnita.final_val:.5f} ({r_pnita.parameter_count} params), {minutes:.0f} min")
    assert np.isfinite(r_ponita.final_val) and np.isfinite(r_pnita.final_val)
    assert ok


def test_criterion_9_readout_identity(emit):
    c = audit.readout_identity(tol=1e-6, rng_seed=91)
    emit(9, "vec -> sphere -> vec on the icosahedron scales by 4", c.passed,
         f"max deviation {c.value:.2e} (tol 1e-6)")
    assert c.passed
