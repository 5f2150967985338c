"""Euclidean projections for box and structured-sparsity constraint sets.

Structured constraints restrict where strong shrinkage (large d) may
occur: disjoint groups force a common precision per group, overlapping
groups force region-wise constancy with deeper overlaps shrunk at least
as strongly as shallower ones, and score-monotone constraints force d to
be nondecreasing in a scalar score (constant on exact score ties).

Compositions of several sets are handled by cyclic alternating
projection; the score-monotone + box composition is exact in one pass
(tie-averaging, weighted pool-adjacent-violators, box truncation).
"""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np

from .errors import (
    MalformedPartitionError,
    PosetSolverError,
    ProjectionConvergenceError,
    ValidationError,
)
from .model_core import BoxBounds, ConstraintSpec


def project_box(v, bounds: BoxBounds) -> np.ndarray:
    """Elementwise clamp onto [lo, hi]."""
    return np.clip(np.asarray(v, dtype=float), bounds.lo, bounds.hi)


def _check_partition(partition, p: int):
    seen = np.zeros(p, dtype=bool)
    for g in partition:
        idx = np.asarray(list(g), dtype=int)
        if idx.size == 0:
            raise MalformedPartitionError("empty group in partition")
        if np.any(idx < 0) or np.any(idx >= p):
            raise MalformedPartitionError("group index out of range")
        if np.any(seen[idx]):
            raise MalformedPartitionError("groups overlap; not a partition")
        seen[idx] = True
    if not np.all(seen):
        raise MalformedPartitionError("partition does not cover every index")


def project_group_mean(v, partition) -> np.ndarray:
    """Replace each coordinate by its group mean (projection onto the
    equal-within-group subspace)."""
    v = np.asarray(v, dtype=float)
    _check_partition(partition, v.size)
    out = np.empty_like(v)
    for g in partition:
        idx = np.asarray(list(g), dtype=int)
        out[idx] = v[idx].mean()
    return out


@dataclass(frozen=True)
class RegionDecomposition:
    """Smallest disjoint regions induced by a group collection.

    Each region collects the coordinates sharing one exact membership
    signature (the set of groups containing them); ``deeper_pairs`` holds
    (l, q) whenever region l's signature strictly contains region q's.
    Coordinates in no group form singleton regions with empty signature
    and never participate in the depth order.
    """

    p: int
    regions: tuple[tuple[int, ...], ...]
    signatures: tuple[frozenset, ...]
    deeper_pairs: tuple[tuple[int, int], ...]

    @property
    def n_regions(self) -> int:
        return len(self.regions)


def decompose_regions(groups, p: int) -> RegionDecomposition:
    """Split 0..p-1 into regions of identical group-membership signature."""
    membership = [set() for _ in range(p)]
    for gi, g in enumerate(groups):
        for i in g:
            i = int(i)
            if i < 0 or i >= p:
                raise MalformedPartitionError("group index out of range")
            membership[i].add(gi)
    by_sig: dict[frozenset, list[int]] = {}
    for i, sig in enumerate(membership):
        if sig:
            by_sig.setdefault(frozenset(sig), []).append(i)
    regions = []
    signatures = []
    for sig, idx in sorted(by_sig.items(), key=lambda kv: sorted(kv[0])):
        regions.append(tuple(idx))
        signatures.append(sig)
    # unconstrained coordinates: singleton regions, empty signature
    for i in range(p):
        if not membership[i]:
            regions.append((i,))
            signatures.append(frozenset())
    deeper = []
    for l, sl in enumerate(signatures):
        if not sl:
            continue
        for q, sq in enumerate(signatures):
            if sq and sq < sl:
                deeper.append((l, q))
    return RegionDecomposition(
        p=p,
        regions=tuple(regions),
        signatures=tuple(signatures),
        deeper_pairs=tuple(deeper),
    )


def pava_weighted(values, weights, direction: str = "nondecreasing") -> np.ndarray:
    """Weighted least-squares monotone fit by pool-adjacent-violators.

    Returns the unique minimizer of sum_t w_t (g_t - v_t)^2 over monotone
    g; pooled blocks carry their exact weighted means.
    """
    v = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    if v.shape != w.shape or v.ndim != 1:
        raise ValidationError("values and weights must be 1-d and equally long")
    if np.any(w <= 0):
        raise ValidationError("weights must be strictly positive")
    if direction == "nonincreasing":
        return -pava_weighted(-v, w, "nondecreasing")
    if direction != "nondecreasing":
        raise ValidationError(f"unknown direction {direction!r}")
    # blocks as (weight sum, weighted value sum, multiplicity)
    bw: list[float] = []
    bs: list[float] = []
    bn: list[int] = []
    for t in range(v.size):
        bw.append(w[t])
        bs.append(w[t] * v[t])
        bn.append(1)
        while len(bw) > 1 and bs[-2] * bw[-1] > bs[-1] * bw[-2]:
            # previous block mean exceeds current: pool
            bw[-2] += bw[-1]
            bs[-2] += bs[-1]
            bn[-2] += bn[-1]
            del bw[-1], bs[-1], bn[-1]
    out = np.empty_like(v)
    pos = 0
    for wk, sk, nk in zip(bw, bs, bn):
        out[pos : pos + nk] = sk / wk
        pos += nk
    return out


def _isotonic_poset(values, weights, edges, max_splits=None):
    """Exact weighted isotonic regression under z_u <= z_v constraints.

    Recursive partitioning: each block is split by the optimal
    downward-closed subset (a max-closure problem solved by min-cut);
    blocks that admit no improving split take their weighted mean.  Exact
    for the squared loss on any partial order.
    """
    v = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    m = v.size
    out = np.empty_like(v)
    succ = [[] for _ in range(m)]  # u -> v edges (z_u <= z_v)
    pred = [[] for _ in range(m)]
    for u, t in edges:
        succ[u].append(t)
        pred[t].append(u)
    budget = max_splits if max_splits is not None else 2 * m + 8
    stack = [list(range(m))]
    splits = 0
    while stack:
        block = stack.pop()
        mean = float(np.dot(w[block], v[block]) / np.sum(w[block]))
        if len(block) == 1:
            out[block[0]] = mean
            continue
        lower = _best_lower_set(block, v, w, mean, pred)
        if lower is None:
            out[block] = mean
            continue
        splits += 1
        if splits > budget:
            raise PosetSolverError(
                f"poset isotonic solver exceeded {budget} partition steps"
            )
        upper = [i for i in block if i not in lower]
        stack.append(sorted(lower))
        stack.append(upper)
    return out


def _best_lower_set(block, v, w, mean, pred):
    """Strictly improving downward-closed subset of ``block``, or None.

    Minimizes sum_{i in L} w_i (v_i - mean) over downward-closed L via the
    max-closure min-cut construction; returns None when no proper subset
    attains a negative value (the block is optimal at its mean).
    """
    inset = set(block)
    c = {i: w[i] * (v[i] - mean) for i in block}
    g = nx.DiGraph()
    g.add_node("s")
    g.add_node("t")
    for i in block:
        # we maximize sum of (-c_i) over closed L
        gain = -c[i]
        if gain > 0:
            g.add_edge("s", i, capacity=gain)
        elif gain < 0:
            g.add_edge(i, "t", capacity=-gain)
        else:
            g.add_node(i)
        for u in pred[i]:
            if u in inset:
                # membership of i requires membership of its predecessor u
                g.add_edge(i, u, capacity=float("inf"))
    cut_value, (s_side, _) = nx.minimum_cut(g, "s", "t")
    lower = [i for i in block if i in s_side]
    total = sum(c[i] for i in lower)
    if not lower or len(lower) == len(block) or total >= -1e-14 * (1.0 + abs(mean)):
        return None
    return lower


def project_overlap_isotonic(v, groups) -> np.ndarray:
    """Projection onto region-wise constancy with depth-ordered shrinkage.

    Coordinates in deeper overlap regions end up with values at least as
    large as shallower ones: averaging within regions, then weighted
    isotonic regression on the region poset.  Unconstrained coordinates
    (empty signature) pass through unchanged.
    """
    v = np.asarray(v, dtype=float)
    dec = decompose_regions(groups, v.size)
    constrained = [l for l, s in enumerate(dec.signatures) if s]
    out = v.copy()
    if not constrained:
        return out
    ridx = {l: k for k, l in enumerate(constrained)}
    means = np.array([v[list(dec.regions[l])].mean() for l in constrained])
    weights = np.array([float(len(dec.regions[l])) for l in constrained])
    # depth order: deeper region l must satisfy z_l >= z_q, so edge q -> l
    edges = [
        (ridx[q], ridx[l])
        for (l, q) in dec.deeper_pairs
        if l in ridx and q in ridx
    ]
    fit = _isotonic_poset(means, weights, edges)
    for l, z in zip(constrained, fit):
        out[list(dec.regions[l])] = z
    return out


def project_score_monotone(v, scores, bounds: BoxBounds) -> np.ndarray:
    """Projection onto {d nondecreasing in score, constant on ties} ∩ box.

    Larger score means stronger shrinkage (larger d).  Exact in a single
    pass: average over exact score ties, weighted PAVA over level sets in
    ascending score order, broadcast, clamp.
    """
    v = np.asarray(v, dtype=float)
    scores = np.asarray(scores, dtype=float)
    if v.shape != scores.shape:
        raise ValidationError("values and scores must have equal length")
    uniq, inverse = np.unique(scores, return_inverse=True)
    counts = np.bincount(inverse).astype(float)
    level_means = np.bincount(inverse, weights=v) / counts
    fit = pava_weighted(level_means, counts, "nondecreasing")
    return np.clip(fit[inverse], bounds.lo, bounds.hi)


def _structure_projector(spec: ConstraintSpec):
    if spec.structure == "none":
        return None
    if spec.structure == "disjoint-groups":
        return lambda v: project_group_mean(v, spec.groups)
    if spec.structure == "overlapping-groups":
        return lambda v: project_overlap_isotonic(v, spec.groups)
    if spec.structure == "score-monotone":
        return lambda v: project_score_monotone(v, spec.scores, spec.bounds)
    raise ValidationError(f"unknown structure {spec.structure!r}")


def constraint_violation(v, spec: ConstraintSpec) -> float:
    """Max infeasibility of v across the box and the structured set."""
    v = np.asarray(v, dtype=float)
    viol = max(float(np.max(spec.bounds.lo - v, initial=0.0)),
               float(np.max(v - spec.bounds.hi, initial=0.0)))
    if spec.structure == "disjoint-groups":
        for g in spec.groups:
            idx = list(g)
            viol = max(viol, float(np.max(np.abs(v[idx] - v[idx].mean()), initial=0.0)))
    elif spec.structure == "overlapping-groups":
        dec = decompose_regions(spec.groups, v.size)
        vals = {}
        for l, s in enumerate(dec.signatures):
            if not s:
                continue
            idx = list(dec.regions[l])
            vals[l] = v[idx].mean()
            viol = max(viol, float(np.max(np.abs(v[idx] - vals[l]), initial=0.0)))
        for (deep, shallow) in dec.deeper_pairs:
            if deep in vals and shallow in vals:
                viol = max(viol, vals[shallow] - vals[deep])
    elif spec.structure == "score-monotone":
        uniq, inverse = np.unique(spec.scores, return_inverse=True)
        means = np.bincount(inverse, weights=v) / np.bincount(inverse)
        for t in range(v.size):
            viol = max(viol, abs(v[t] - means[inverse[t]]))
        if means.size > 1:
            viol = max(viol, float(np.max(means[:-1] - means[1:], initial=0.0)))
    return viol


def alternating_projection(v, spec: ConstraintSpec) -> np.ndarray:
    """Cyclic projection P_box ∘ P_structure until the sweep change dies.

    Returns a point of the intersection (feasible within the configured
    tolerance); raises when the sweep budget is exhausted while still
    infeasible.
    """
    v = np.asarray(v, dtype=float)
    spec.validate_for_dim(v.size)
    proj = _structure_projector(spec)
    cur = v
    for _ in range(spec.alt_max_sweeps):
        nxt = cur if proj is None else proj(cur)
        nxt = project_box(nxt, spec.bounds)
        if float(np.max(np.abs(nxt - cur), initial=0.0)) < spec.alt_tol:
            return nxt
        cur = nxt
    viol = constraint_violation(cur, spec)
    if viol <= 1e-10:
        return cur
    raise ProjectionConvergenceError(spec.alt_max_sweeps, viol)
