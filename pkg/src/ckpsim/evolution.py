"""The one-step transition and its exact outcome distribution.

A step: pick a PT parent with probability proportional to 1 + deg_pt,
attach a child, label it CF with probability eps (else CT), and with
probability p check the path of k edges above the child, proclaiming
false the prefix up to and including the first non-CT node found.

``step`` consumes three draws per insertion in a fixed order (parent,
error coin, check coin) even when a coin is unused, so trajectories
replay identically whatever is instrumented. ``advance`` runs the same
dynamics through the compiled kernel and consumes the same stream.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from . import _kernels
from ._kernels import CT, CF, PF, S_CLOCK, S_EXTINCT, S_FIRST_CF, S_N, S_WEIGHT
from .rng import Stream
from .state import ExtinctError, KnowledgeState


@dataclass(frozen=True)
class StepOutcome:
    """Everything one transition did to the state."""

    parent: int
    child_label: int            # CT or CF
    checked: bool
    marked_path: Tuple[int, ...]  # child -> ancestor, empty if no marks
    new_node_id: int


def check_path(state: KnowledgeState, start: int, k: Optional[int]) -> List[int]:
    """Nodes that a check starting at ``start`` would proclaim false.

    Walks start, parent(start), ... for up to k edges (or to the root);
    returns [] when every visited node is CT, otherwise the prefix up to
    and including the first non-CT node (CF and PF both trigger). Pure;
    does not mutate the state.
    """
    if k is None:
        k_eff = state.params.k_eff
    elif k < 1:
        raise ValueError("k must be >= 1")
    else:
        k_eff = k
    path = [start]
    cur = start
    i = 0
    while True:
        if state.label[cur] != CT:
            return path
        par = int(state.parent[cur])
        if i >= k_eff or par < 0:
            return []
        cur = par
        i += 1
        path.append(cur)


def _insert_child(state: KnowledgeState, parent: int, label: int) -> int:
    v = state.n_nodes
    state.ensure_capacity(v + 1)
    state.parent[v] = parent
    state.label[v] = label
    state.birth[v] = state.clock
    state.deg_pt[v] = 0
    state.deg_cf[v] = 0
    state.deg_pt[parent] += 1
    if label == CF:
        state.deg_cf[parent] += 1
        if state.scal[S_FIRST_CF] < 0:
            state.scal[S_FIRST_CF] = v
    _kernels.fenwick_add(state.fen, np.int64(parent), np.int64(1))
    _kernels.fenwick_add(state.fen, np.int64(v), np.int64(1))
    state.scal[S_N] = v + 1
    state.scal[S_CLOCK] += 1
    state.scal[S_WEIGHT] += 2
    return v


def _apply_marks(state: KnowledgeState, path: Sequence[int]) -> None:
    """Proclaim false every node on a check path (child -> ancestor)."""
    if not path:
        return
    m = path[-1]
    for cur in path:
        if state.label[cur] != PF:
            wc = 1 + int(state.deg_pt[cur])
            _kernels.fenwick_add(state.fen, np.int64(cur), np.int64(-wc))
            state.scal[S_WEIGHT] -= wc
    m_was = int(state.label[m])
    for cur in path[:-1]:
        nxt = int(state.parent[cur])
        state.label[cur] = PF
        state.deg_pt[nxt] -= 1
    if m_was != PF:
        state.label[m] = PF
        q = int(state.parent[m])
        if q >= 0:
            state.deg_pt[q] -= 1
            if m_was == CF:
                state.deg_cf[q] -= 1
            if state.label[q] != PF:
                _kernels.fenwick_add(state.fen, np.int64(q), np.int64(-1))
                state.scal[S_WEIGHT] -= 1
    if state.total_weight == 0 and state.scal[S_EXTINCT] < 0:
        state.scal[S_EXTINCT] = state.clock


def step(state: KnowledgeState, rng: Stream) -> StepOutcome:
    """One exact transition; mirrors the compiled kernel draw for draw."""
    if state.extinct:
        raise ExtinctError("cannot step an extinct state")
    parent = state.sample_parent(rng)
    u_err = rng.next_unit()
    u_chk = rng.next_unit()
    label = CF if u_err < state.params.eps_float else CT
    v = _insert_child(state, parent, label)
    checked = u_chk < state.params.p_float
    marked: Tuple[int, ...] = ()
    if checked:
        path = check_path(state, v, None)
        _apply_marks(state, path)
        marked = tuple(path)
    return StepOutcome(parent=parent, child_label=label, checked=checked,
                       marked_path=marked, new_node_id=v)


def apply_outcome(state: KnowledgeState, outcome: StepOutcome) -> None:
    """Deterministically apply a transition (no randomness consumed)."""
    if state.extinct:
        raise ExtinctError("cannot step an extinct state")
    v = _insert_child(state, outcome.parent, outcome.child_label)
    if outcome.checked:
        path = check_path(state, v, None)
        if tuple(path) != outcome.marked_path:
            raise ValueError("outcome does not belong to this state")
        _apply_marks(state, path)


@dataclass(frozen=True)
class OutcomeDistribution:
    """Exact support of one transition: (probability, outcome) pairs."""

    entries: Tuple[Tuple[Fraction, StepOutcome], ...]

    def total(self) -> Fraction:
        return sum((p for p, _ in self.entries), Fraction(0))

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)


def one_step_support(state: KnowledgeState) -> OutcomeDistribution:
    """Exhaustive exact enumeration of the next-step distribution.

    Probabilities are exact rationals built from the Fenwick weights and
    the exact eps/p of the state's parameters; zero-probability branches
    are dropped.
    """
    if state.extinct:
        raise ExtinctError("no transitions from an extinct state")
    eps = state.params.eps
    p = state.params.p
    w_total = state.total_weight
    v = state.n_nodes
    entries = []
    for u in state.pt_nodes():
        u = int(u)
        pu = Fraction(state.weight(u), w_total)
        for lab, plab in ((CT, 1 - eps), (CF, eps)):
            if plab == 0:
                continue
            for checked, pchk in ((False, 1 - p), (True, p)):
                if pchk == 0:
                    continue
                prob = pu * plab * pchk
                marked: Tuple[int, ...] = ()
                if checked:
                    marked = tuple(_hypothetical_path(state, u, lab, v))
                entries.append((prob, StepOutcome(
                    parent=u, child_label=lab, checked=checked,
                    marked_path=marked, new_node_id=v)))
    return OutcomeDistribution(entries=tuple(entries))


def _hypothetical_path(state: KnowledgeState, parent: int, child_label: int,
                       child_id: int) -> List[int]:
    """check_path for a child that has not been inserted yet."""
    if child_label != CT:
        return [child_id]
    k_eff = state.params.k_eff
    path = [child_id, parent]
    cur = parent
    i = 1
    while True:
        if state.label[cur] != CT:
            return path
        par = int(state.parent[cur])
        if i >= k_eff or par < 0:
            return []
        cur = par
        i += 1
        path.append(cur)


# ---------------------------------------------------------------------------
# trajectory driver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricsPlan:
    """When to sample observables along a run.

    ``geometric`` (default) instruments at insertion counts 1, 2, 4, ...
    plus t_max, which bounds instrumentation cost on long runs; pass
    ``times`` for an explicit schedule.
    """

    times: Optional[Sequence[int]] = None
    include_potentials: bool = True

    def schedule(self, t_max: int) -> List[int]:
        if self.times is not None:
            ts = sorted({int(t) for t in self.times if 0 <= t <= t_max})
            return ts
        ts, t = [], 1
        while t < t_max:
            ts.append(t)
            t *= 2
        ts.append(t_max)
        return ts


@dataclass
class Trajectory:
    """Result of driving one state to a horizon."""

    extinct: bool
    extinction_time: Optional[int]
    final_clock: int
    records: list = field(default_factory=list)
    final_digest: Optional[tuple] = None


def run(state: KnowledgeState, t_max: int, rng: Stream,
        stop_on_extinction: bool = True,
        plan: Optional[MetricsPlan] = None,
        record: Optional[Callable[[KnowledgeState], object]] = None,
        keep_digest: bool = False) -> Trajectory:
    """Advance ``state`` by up to t_max insertions through the kernel,
    sampling metrics at the plan's times. Extinction is an outcome, not
    an error; with stop_on_extinction=False the clock keeps advancing
    with the state frozen (the process absorbs).
    """
    if t_max < 0:
        raise ValueError("t_max must be >= 0")
    if record is None:
        from .analysis import metrics as record  # default observable set
    plan = plan or MetricsPlan()
    state.ensure_capacity(state.n_nodes + t_max)
    records = []
    for t in plan.schedule(t_max) if t_max > 0 else []:
        _kernels.advance(state.parent, state.label, state.birth,
                         state.deg_pt, state.deg_cf, state.fen, state.scal,
                         rng.state, state.params.eps_float,
                         state.params.p_float, np.int64(state.params.k_eff),
                         np.int64(t))
        if state.extinct:
            if not stop_on_extinction:
                state.scal[S_CLOCK] = t
            records.append(record(state))
            if stop_on_extinction:
                break
        else:
            records.append(record(state))
    if not state.extinct:
        _kernels.advance(state.parent, state.label, state.birth,
                         state.deg_pt, state.deg_cf, state.fen, state.scal,
                         rng.state, state.params.eps_float,
                         state.params.p_float, np.int64(state.params.k_eff),
                         np.int64(t_max))
    return Trajectory(
        extinct=state.extinct,
        extinction_time=state.extinction_time if state.extinct else None,
        final_clock=state.clock,
        records=records,
        final_digest=state.digest() if keep_digest else None,
    )
