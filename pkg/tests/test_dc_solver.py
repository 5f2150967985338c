import json

import numpy as np
import pytest

from conftest import figure1_instance, random_instance, random_precision
from dcselect import objective
from dcselect.dc_solver import (
    SolverConfig,
    boundary_accelerate,
    dc_step,
    initial_precision,
    residual_distance,
    solve,
)
from dcselect.errors import ValidationError
from dcselect.model_core import BoxBounds, ConstraintSpec

BOX = ConstraintSpec(bounds=BoxBounds(1e-4, 1e4))


def test_dc_step_fixed_point():
    inst = figure1_instance(theta0=3.0)
    d = np.array([0.2])
    for _ in range(300):
        d = dc_step(inst, d, BOX)
    again = dc_step(inst, d, BOX)
    assert np.max(np.abs(again - d)) < 1e-12 * (1 + np.max(d))


def test_dc_step_no_signal_reaches_upper_bound():
    inst = figure1_instance(theta0=0.0, seed=5)
    d = np.array([1.0])
    for _ in range(4000):
        d = dc_step(inst, d, BOX)
    assert d[0] == BOX.bounds.hi


def test_dc_step_descends(rng):
    inst = random_instance(rng, 12, 8, signal=2.0, s=2)
    for _ in range(100):
        d = np.clip(random_precision(rng, 8, spread=2.0), 1e-4, 1e4)
        before = objective.loss(inst, d).loss
        after = objective.loss(inst, dc_step(inst, d, BOX)).loss
        assert after <= before + 1e-10 * (1 + abs(before))


def test_residual_distance_zero_at_fixed_point():
    inst = figure1_instance(theta0=3.0)
    cfg = SolverConfig(constraint=BOX, rel_tol=1e-12, consecutive_hits=3, max_iters=3000,
                       accel_enabled=False)
    d, trace = solve(inst, cfg)
    assert residual_distance(inst, d, BOX.bounds) < 1e-6


def test_residual_distance_normal_cone_at_upper_bound():
    # no-signal coordinate parked at the upper bound: the gradient difference
    # v = grad h - grad g_tilde = -grad f is positive (loss still decreasing
    # toward larger d), lies inside the normal cone, and contributes zero
    inst = figure1_instance(theta0=0.0, seed=5)
    d = np.array([1e4])
    g = objective.grad(inst, d)
    v = (g.grad_h - g.grad_gtilde)[0]
    assert v > 0
    assert residual_distance(inst, d, BOX.bounds) == 0.0
    # strong signal forced to the upper bound is NOT stationary: v < 0 counts
    inst2 = figure1_instance(theta0=3.0)
    g2 = objective.grad(inst2, d)
    v2 = (g2.grad_h - g2.grad_gtilde)[0]
    assert v2 < 0
    assert residual_distance(inst2, d, BOX.bounds) == pytest.approx(abs(v2))


def test_residual_distance_requires_box():
    inst = figure1_instance(theta0=1.0)
    with pytest.raises(ValidationError):
        residual_distance(inst, np.array([2e4]), BOX.bounds)


def test_boundary_accelerate_empty_proposal():
    inst = figure1_instance(theta0=3.0)
    cfg = SolverConfig(constraint=BOX)
    d = np.array([5.0])  # far from both snap thresholds
    out, moves = boundary_accelerate(inst, d, cfg)
    assert moves == 0 and np.array_equal(out, d)


def test_boundary_accelerate_rejects_loss_increase():
    # strong signal: interior minimizer far below tau2, snapping to b hurts
    inst = figure1_instance(theta0=3.0)
    cfg = SolverConfig(constraint=BOX)
    d = np.array([2000.0])
    out, moves = boundary_accelerate(inst, d, cfg)
    assert moves == 0 and np.array_equal(out, d)


def test_boundary_accelerate_accepts_monotone_descent():
    inst = figure1_instance(theta0=0.0, seed=5)
    cfg = SolverConfig(constraint=BOX)
    d = np.array([2000.0])  # 0.2 * b, above tau2
    out, moves = boundary_accelerate(inst, d, cfg)
    assert moves == 1 and out[0] == 1e4


def test_boundary_accelerate_caps_moves(rng):
    inst = random_instance(rng, 10, 60)
    cfg = SolverConfig(constraint=BOX, accel_max_moves=7)
    d = np.full(60, 5000.0)
    out, moves = boundary_accelerate(inst, d, cfg)
    assert moves <= 7
    assert int(np.sum(out == 1e4)) == moves


def test_solve_zero_budget():
    inst = figure1_instance(theta0=3.0)
    cfg = SolverConfig(constraint=BOX, max_iters=0)
    d, trace = solve(inst, cfg)
    assert np.array_equal(d, np.ones(1))
    assert trace.iterations == 0 and trace.status == "max-iters"


def test_solve_descent_fuzz():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        inst = random_instance(rng, int(rng.integers(15, 40)), int(rng.integers(5, 50)),
                               signal=2.5, s=3)
        cfg = SolverConfig(constraint=BOX, max_iters=400, accel_period=25)
        d, trace = solve(inst, cfg)
        losses = trace.losses()
        diffs = np.diff(losses)
        assert np.all(diffs <= 1e-10 * (1 + np.abs(losses[:-1])))


def test_solve_iterates_feasible(rng):
    inst = random_instance(rng, 20, 10, signal=2.0, s=2)
    seen = []
    cfg = SolverConfig(constraint=BOX, max_iters=200)
    solve(inst, cfg, callback=lambda t, d: seen.append(d.copy()))
    assert seen
    for d in seen:
        assert np.all(d >= 1e-4 - 1e-12) and np.all(d <= 1e4 + 1e-12)


def test_solve_explicit_infeasible_start_projected():
    inst = figure1_instance(theta0=3.0)
    cfg = SolverConfig(constraint=BOX, max_iters=0, initial_d=np.array([2e5]))
    d, _ = solve(inst, cfg)
    assert d[0] == 1e4


def test_warm_start_mls():
    inst = figure1_instance(theta0=3.0)
    cfg = SolverConfig(constraint=BOX, initial_d="warm-mls", max_iters=0)
    d, _ = solve(inst, cfg)
    theta_mls = inst.xty[0] / inst.n
    assert abs(d[0] - min(max(1.0 / theta_mls**2, 1e-4), 1e4)) < 1e-12


def test_solver_config_validation():
    with pytest.raises(ValidationError):
        SolverConfig(constraint=BOX, tau1=10.0, tau2=5.0)
    with pytest.raises(ValidationError):
        SolverConfig(constraint=BOX, rel_tol=-1.0)
    cfg = SolverConfig(constraint=BOX)
    assert cfg.tau1 == 1e-4 and cfg.tau2 == 1e3


def test_trace_jsonl_export(tmp_path, rng):
    inst = random_instance(rng, 10, 4, signal=2.0, s=1)
    cfg = SolverConfig(constraint=BOX, max_iters=50)
    _, trace = solve(inst, cfg)
    path = tmp_path / "trace.jsonl"
    trace.write_jsonl(path)
    lines = path.read_text().strip().splitlines()
    assert len(lines) == trace.iterations
    rec = json.loads(lines[0])
    assert set(rec) == {
        "iteration", "loss", "residual", "n_at_lower", "n_at_upper",
        "accel_moves", "wall_time_s",
    }
    assert rec["iteration"] == 1


def test_solve_with_score_monotone_constraint(rng):
    # structured solve: iterates stay monotone in score
    from dcselect.model_core import build_identity_instance

    n = 30
    scores = np.sort(rng.random(n))
    theta = 1.5 * np.exp(-scores * 4)
    y = theta + 0.05 * rng.standard_normal(n)
    inst = build_identity_instance(y, 1.0, 1.0)
    spec = ConstraintSpec(bounds=BoxBounds(1e-4, 1e4), structure="score-monotone", scores=scores)
    cfg = SolverConfig(constraint=spec, max_iters=300)
    order = np.argsort(scores)

    def check(t, d):
        assert np.all(np.diff(d[order]) >= -1e-10)

    d, trace = solve(inst, cfg, callback=check)
    assert trace.status in ("converged", "max-iters")
    assert np.all(np.diff(d[order]) >= -1e-10)
