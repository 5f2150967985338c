"""Difference-of-convex iteration with box/structured projections.

Each step linearizes the concave part -h at the current precision vector
and solves the resulting separable convex subproblem in closed form:

    d_j  <-  P_constraint( -1 / (2 [grad h(d)]_j) )

The candidate is strictly positive because every entry of grad h is
strictly negative, so feasibility reduces to the constraint projection.
The loss never increases along the iteration; convergence is declared
when the relative loss change stays below ``rel_tol`` for
``consecutive_hits`` consecutive iterations.

Boundary exploration accelerates convergence toward the box edges: at a
configurable cadence (and once more before declaring convergence), up to
``accel_max_moves`` near-boundary coordinates are proposed at the exact
bound and the joint proposal is kept only if it strictly decreases the
loss.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from . import objective
from .errors import SolverRuntimeError, ValidationError
from .model_core import BoxBounds, ConstraintSpec, ProblemInstance, validate_precision
from .projections import alternating_projection, constraint_violation, project_box

BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    """Configuration of the DC solve; defaults follow the benchmark protocol."""

    constraint: ConstraintSpec = field(default_factory=ConstraintSpec)
    rel_tol: float = 1e-5
    consecutive_hits: int = 2
    max_iters: int = 5000
    accel_enabled: bool = True
    accel_period: int = 100
    tau1: float | None = None  # lower snap threshold; defaults to bounds.lo
    tau2: float | None = None  # upper snap threshold; defaults to 0.1 * bounds.hi
    accel_max_moves: int = 20
    initial_d: str | np.ndarray = "identity"  # identity | warm-mls | explicit vector
    linear_solver: Literal["auto", "dense", "woodbury", "cg"] = "auto"
    cg_tol: float = objective.DEFAULT_CG_TOL
    cg_max_mult: int = objective.DEFAULT_CG_MAX_MULT

    def __post_init__(self):
        if self.rel_tol <= 0 or self.consecutive_hits < 1 or self.max_iters < 0:
            raise ValidationError("rel_tol > 0, consecutive_hits >= 1, max_iters >= 0 required")
        if self.accel_period < 1 or self.accel_max_moves < 1:
            raise ValidationError("accel_period and accel_max_moves must be positive")
        b = self.constraint.bounds
        t1 = b.lo if self.tau1 is None else float(self.tau1)
        t2 = 0.1 * b.hi if self.tau2 is None else float(self.tau2)
        if not (b.lo <= t1 < t2 <= b.hi):
            raise ValidationError(f"need lo <= tau1 < tau2 <= hi, got {t1}, {t2}")
        object.__setattr__(self, "tau1", t1)
        object.__setattr__(self, "tau2", t2)


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    loss: float
    residual: float
    n_at_lower: int
    n_at_upper: int
    accel_moves: int
    wall_time_s: float
    surrogate: float | None = None

    def as_dict(self) -> dict:
        out = {
            "iteration": self.iteration,
            "loss": self.loss,
            "residual": self.residual,
            "n_at_lower": self.n_at_lower,
            "n_at_upper": self.n_at_upper,
            "accel_moves": self.accel_moves,
            "wall_time_s": self.wall_time_s,
        }
        if self.surrogate is not None:
            out["surrogate"] = self.surrogate
        return out


@dataclass
class SolveTrace:
    """Per-iteration log of a solve; ``status`` is converged | max-iters | error."""

    records: list[TraceRecord] = field(default_factory=list)
    status: str = "max-iters"

    @property
    def iterations(self) -> int:
        return len(self.records)

    def losses(self) -> np.ndarray:
        return np.array([r.loss for r in self.records])

    def write_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec.as_dict()) + "\n")


def project_constraint(v: np.ndarray, spec: ConstraintSpec) -> np.ndarray:
    """Box clamp directly, or alternating projection for structured sets."""
    if spec.structure == "none":
        return project_box(v, spec.bounds)
    return alternating_projection(v, spec)


def dc_step(
    inst: ProblemInstance,
    d: np.ndarray,
    constraint: ConstraintSpec,
    gradient=None,
    path: str = "auto",
) -> np.ndarray:
    """One DC update: closed-form candidate, then constraint projection."""
    d = validate_precision(d, inst.p)
    gh = gradient.grad_h if gradient is not None else objective.grad(inst, d, path=path).grad_h
    candidate = -0.5 / gh
    return project_constraint(candidate, constraint)


def residual_distance(
    inst: ProblemInstance,
    d: np.ndarray,
    bounds: BoxBounds,
    gradient=None,
) -> float:
    """Distance of grad h - grad g_tilde to the box normal cone at d.

    Zero exactly at DC fixed points: interior coordinates need a vanishing
    gradient difference, bound coordinates only the correct sign.
    """
    d = validate_precision(d, inst.p)
    if not bounds.contains(d, tol=BOUNDARY_TOL):
        raise ValidationError("d is outside the box bounds")
    if gradient is None:
        gradient = objective.grad(inst, d)
    v = gradient.grad_h - gradient.grad_gtilde
    at_lo = np.abs(d - bounds.lo) <= BOUNDARY_TOL
    at_hi = np.abs(d - bounds.hi) <= BOUNDARY_TOL
    lam = np.abs(v)
    lam = np.where(at_lo, np.maximum(v, 0.0), lam)
    lam = np.where(at_hi, np.maximum(-v, 0.0), lam)
    return float(np.sqrt(np.sum(lam**2)))


def _bound_counts(d: np.ndarray, bounds: BoxBounds) -> tuple[int, int]:
    return (
        int(np.sum(np.abs(d - bounds.lo) <= BOUNDARY_TOL)),
        int(np.sum(np.abs(d - bounds.hi) <= BOUNDARY_TOL)),
    )


def boundary_accelerate(
    inst: ProblemInstance,
    d: np.ndarray,
    cfg: SolverConfig,
    current_loss: float | None = None,
    cg_state=None,
) -> tuple[np.ndarray, int]:
    """Propose snapping near-boundary coordinates to the exact bounds.

    Coordinates with d_j <= tau1 propose the lower bound, d_j >= tau2 the
    upper bound; when more than ``accel_max_moves`` qualify, the moves
    with the largest normalized distance to their threshold win.  Ties
    break by score under a score-monotone constraint (so the snapped set
    stays an upper/lower set of the order), else by index.  The joint
    proposal is accepted only if it strictly decreases the loss and (for
    structured constraints) stays feasible; otherwise d is returned
    unchanged with zero moves.
    """
    d = validate_precision(d, inst.p)
    b = cfg.constraint.bounds
    scores = (
        cfg.constraint.scores
        if cfg.constraint.structure == "score-monotone"
        else np.zeros(inst.p)
    )
    lo_mask = (d <= cfg.tau1) & (np.abs(d - b.lo) > BOUNDARY_TOL)
    hi_mask = (d >= cfg.tau2) & (np.abs(d - b.hi) > BOUNDARY_TOL)
    moves = []
    for j in np.flatnonzero(hi_mask):
        extremity = (d[j] - cfg.tau2) / max(b.hi - cfg.tau2, BOUNDARY_TOL)
        moves.append((-extremity, -scores[j], j, b.hi))
    for j in np.flatnonzero(lo_mask):
        extremity = (cfg.tau1 - d[j]) / max(cfg.tau1 - b.lo, BOUNDARY_TOL)
        moves.append((-extremity, scores[j], j, b.lo))
    if not moves:
        return d, 0
    moves.sort()
    chosen = moves[: cfg.accel_max_moves]
    proposal = d.copy()
    for _, _, j, target in chosen:
        proposal[j] = target
    if cfg.constraint.structure != "none" and constraint_violation(proposal, cfg.constraint) > 1e-10:
        return d, 0
    if current_loss is None:
        current_loss = objective.evaluate(
            inst, d, path=cfg.linear_solver, want_grad=False,
            cg_tol=cfg.cg_tol, cg_max_mult=cfg.cg_max_mult, cg_warm=cg_state,
        ).loss
    prop_loss = objective.evaluate(
        inst, proposal, path=cfg.linear_solver, want_grad=False,
        cg_tol=cfg.cg_tol, cg_max_mult=cfg.cg_max_mult, cg_warm=cg_state,
    ).loss
    if prop_loss < current_loss:
        return proposal, len(chosen)
    return d, 0


def initial_precision(inst: ProblemInstance, cfg: SolverConfig) -> np.ndarray:
    """Resolve the configured start: identity, marginal-LS warm start, or explicit."""
    if isinstance(cfg.initial_d, str):
        if cfg.initial_d == "identity":
            d0 = np.ones(inst.p)
        elif cfg.initial_d in ("warm-mls", "warm_mls"):
            theta_mls = inst.xty / inst.n
            with np.errstate(divide="ignore"):
                d0 = 1.0 / np.maximum(theta_mls**2, 1e-300)
        else:
            raise ValidationError(f"unknown initial_d {cfg.initial_d!r}")
    else:
        d0 = validate_precision(np.asarray(cfg.initial_d, dtype=float), inst.p)
    return project_constraint(d0, cfg.constraint)


def solve(
    inst: ProblemInstance,
    cfg: SolverConfig,
    callback: Callable[[int, np.ndarray], None] | None = None,
) -> tuple[np.ndarray, SolveTrace]:
    """Run the DC iteration to convergence, max_iters, or failure.

    Before convergence is declared, one extra boundary-exploration probe
    runs (when acceleration is enabled): the relative-change rule can fire
    while coordinates are still crawling toward the upper bound, and an
    accepted probe strictly decreases the loss, so iteration resumes.
    ``callback(t, d_t)`` observes every accepted iterate.
    """
    cfg.constraint.validate_for_dim(inst.p)
    trace = SolveTrace()
    d = initial_precision(inst, cfg)
    if cfg.max_iters == 0:
        return d, trace

    path = cfg.linear_solver
    cg_state = None

    def full_eval(dv):
        nonlocal cg_state
        ev = objective.evaluate(
            inst, dv, path=path, want_grad=True,
            cg_tol=cfg.cg_tol, cg_max_mult=cfg.cg_max_mult, cg_warm=cg_state,
        )
        if ev.cg_state is not None:
            cg_state = ev.cg_state
        return ev

    hits = 0
    try:
        ev = full_eval(d)
        for t in range(1, cfg.max_iters + 1):
            tic = time.monotonic()
            candidate = -0.5 / ev.grad_h
            d_next = project_constraint(candidate, cfg.constraint)
            ev_next = full_eval(d_next)
            moves = 0
            if cfg.accel_enabled and t % cfg.accel_period == 0:
                d_acc, moves = boundary_accelerate(
                    inst, d_next, cfg, current_loss=ev_next.loss, cg_state=cg_state
                )
                if moves:
                    d_next = d_acc
                    ev_next = full_eval(d_next)
            denom = abs(ev.loss)
            change = abs(ev_next.loss - ev.loss)
            rel = change / denom if denom > 0 else change
            hits = hits + 1 if rel < cfg.rel_tol else 0
            converged = hits >= cfg.consecutive_hits
            if converged and cfg.accel_enabled:
                d_acc, probe_moves = boundary_accelerate(
                    inst, d_next, cfg, current_loss=ev_next.loss, cg_state=cg_state
                )
                if probe_moves:
                    d_next = d_acc
                    ev_next = full_eval(d_next)
                    moves += probe_moves
                    hits = 0
                    converged = False
            n_lo, n_hi = _bound_counts(d_next, cfg.constraint.bounds)
            trace.records.append(
                TraceRecord(
                    iteration=t,
                    loss=ev_next.loss,
                    residual=residual_distance(
                        inst, d_next, cfg.constraint.bounds, gradient=ev_next.gradient()
                    ),
                    n_at_lower=n_lo,
                    n_at_upper=n_hi,
                    accel_moves=moves,
                    wall_time_s=time.monotonic() - tic,
                )
            )
            d = d_next
            ev = ev_next
            if callback is not None:
                callback(t, d)
            if converged:
                trace.status = "converged"
                return d, trace
        trace.status = "max-iters"
        return d, trace
    except Exception as exc:
        if isinstance(exc, (ValidationError,)):
            raise
        trace.status = "error"
        raise SolverRuntimeError(trace.iterations + 1, exc) from exc
