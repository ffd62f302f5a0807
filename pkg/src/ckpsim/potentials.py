"""Potential functions over the False PT region, evaluated exactly.

All values are Python ints / Fractions: the 2**depth terms outgrow any
float long before the interesting regimes end, and the drift
certificates need equality-grade arithmetic. Sums are grouped by depth
(numpy int64 partial sums, exact below 2**53) so a full evaluation is
O(n) plus one big-int term per distinct depth. ``float_reading`` is the
lossy fast path for instrumentation-only runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Optional

import numpy as np

from ._kernels import PF
from .decomposition import PTComponent, Structure, structure
from .state import KnowledgeState


def _exp_sum(deg_pt: np.ndarray, depths: np.ndarray) -> int:
    """Exact sum of (1 + deg_pt) * 2**depth over the given nodes."""
    if depths.size == 0:
        return 0
    per_depth = np.bincount(depths, weights=1 + deg_pt)
    total = 0
    for d, s in enumerate(per_depth):
        si = int(s)
        if si:
            total += si << d
    return total


def phi_exp(state: KnowledgeState, s: Optional[Structure] = None) -> int:
    """Exponential potential: sum over blocks of (1+deg_pt(v)) * 2**depth,
    depth relative to the block root. With eps = 0 blocks coincide with
    PT components and this is the simple-model definition."""
    s = s or structure(state)
    mask = np.asarray(s.blk_root[:s.n]) >= 0
    return _exp_sum(state.deg_pt[:s.n][mask], np.asarray(s.blk_depth[:s.n])[mask])


def phi_lc(state: KnowledgeState, s: Optional[Structure] = None) -> Fraction:
    """Leaves-and-components potential: per block, 1 for a singleton,
    else 1 plus sum over leaves of 1/(deg_cf + 1). A leaf has no child
    inside its block (descendants outside are allowed)."""
    s = s or structure(state)
    n = s.n
    roots = np.asarray(s.blk_root[:n])
    mask = roots >= 0
    if not mask.any():
        return Fraction(0)
    sizes = np.bincount(roots[mask])
    n_blocks = int(np.count_nonzero(sizes))
    leaf_mask = mask & (np.asarray(s.blk_inner[:n]) == 0) \
        & (sizes[np.where(mask, roots, 0)] > 1)
    total = Fraction(n_blocks)
    if leaf_mask.any():
        degs = np.bincount(state.deg_cf[:n][leaf_mask])
        for j, c in enumerate(degs):
            if c:
                total += Fraction(int(c), j + 1)
    return total


def phi_exp_adapted(state: KnowledgeState, component: PTComponent) -> int:
    """|C| times the exponential sum of one PT component."""
    if not component.members:
        raise ValueError("component must be nonempty")
    total = 0
    for v, d in component.depth_of.items():
        total += (1 + int(state.deg_pt[v])) << d
    return len(component.members) * total


def phi_combined(state: KnowledgeState, k: int,
                 s: Optional[Structure] = None) -> Fraction:
    """Leaves-and-components potential minus the adapted exponential
    potentials of components larger than k, scaled by 1/(5 (k+1)^2 2^k)."""
    if k is None or k < 1:
        raise ValueError("phi_combined needs a bounded k >= 1")
    s = s or structure(state)
    big = _adapted_by_component(state, s, min_size=k + 1)
    penalty = sum(big.values())
    return phi_lc(state, s) - Fraction(penalty, 5 * (k + 1) ** 2 * (1 << k))


def phi_reliability(state: KnowledgeState,
                    s: Optional[Structure] = None) -> Fraction:
    """eps(1-p)/(1-eps) times the number of True PT nodes, minus the
    general-model exponential potential."""
    eps, p = state.params.eps, state.params.p
    if eps == 1:
        raise ValueError("reliability potential undefined at eps = 1")
    s = s or structure(state)
    n = s.n
    n_true_pt = int(np.count_nonzero((np.asarray(s.is_true[:n]) == 1)
                                     & (state.label[:n] != PF)))
    coeff = eps * (1 - p) / (1 - eps)
    return coeff * n_true_pt - phi_exp(state, s)


def _adapted_by_component(state: KnowledgeState, s: Structure,
                          min_size: int = 1) -> Dict[int, int]:
    """root -> |C| * sum d(v) 2**depth, for components with |C| >= min_size."""
    n = s.n
    roots = np.asarray(s.comp_root[:n])
    mask = roots >= 0
    if not mask.any():
        return {}
    sizes = np.bincount(roots[mask])
    out: Dict[int, int] = {}
    for r in np.nonzero(sizes >= min_size)[0]:
        members = roots == r
        total = _exp_sum(state.deg_pt[:n][members],
                         np.asarray(s.comp_depth[:n])[members])
        out[int(r)] = int(sizes[r]) * total
    return out


def adapted_potentials(state: KnowledgeState,
                       s: Optional[Structure] = None) -> Dict[int, int]:
    """Adapted exponential potential of every PT component, by root."""
    s = s or structure(state)
    return _adapted_by_component(state, s, min_size=1)


@dataclass
class PotentialReading:
    """All potentials of one state at one time."""

    t: int
    phi_exp: int
    phi_lc: Fraction
    phi_exp_adapted: Dict[int, int]
    phi_combined: Optional[Fraction]
    phi_reliability: Optional[Fraction]


def reading(state: KnowledgeState,
            s: Optional[Structure] = None) -> PotentialReading:
    s = s or structure(state)
    k = state.params.k
    eps = state.params.eps
    return PotentialReading(
        t=state.clock,
        phi_exp=phi_exp(state, s),
        phi_lc=phi_lc(state, s),
        phi_exp_adapted=adapted_potentials(state, s),
        phi_combined=phi_combined(state, k, s) if k is not None else None,
        phi_reliability=phi_reliability(state, s) if eps != 1 else None,
    )


def float_reading(state: KnowledgeState) -> tuple:
    """(phi_exp, phi_lc, overflowed) as floats, for instrumentation-only
    runs; overflowed flags a depth beyond float range."""
    s = structure(state)
    n = s.n
    mask = np.asarray(s.blk_root[:n]) >= 0
    depths = np.asarray(s.blk_depth[:n])[mask]
    overflow = bool(depths.size and depths.max() > 1000)
    if overflow:
        pe = float("inf")
    else:
        pe = float(np.sum((1 + state.deg_pt[:n][mask])
                          * np.exp2(depths.astype(np.float64))))
    return pe, float(phi_lc(state, s)), overflow
