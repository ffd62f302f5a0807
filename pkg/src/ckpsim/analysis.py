"""Observables and verification procedures.

Two kinds of machinery live here. The statistical side (survival
frequencies, reliability ratios, the urn and univalent statistics) is
ordinary Monte Carlo with Wilson intervals. The exact side is the drift
certificate: for a frozen state, the one-step support is enumerated and
the expected change of a potential is computed in rational arithmetic,
then compared against the claimed bound — no tolerance involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import _kernels, potentials
from ._kernels import CF, CT, PF
from .decomposition import structure, subtree_pt_count
from .evolution import MetricsPlan, apply_outcome, one_step_support, run
from .rng import Stream, split
from .state import (ExtinctError, GeneralRootCT, InitKind, KnowledgeState,
                    Params, SimpleRootCF, UnivalentInit, new_state)


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

@dataclass
class MetricsRecord:
    t: int
    n_nodes: int
    n_pt: int
    n_true_pt: int
    n_false_pt: int
    n_pf: int
    n_components: int
    max_component: int
    m_t: int
    height: int
    uni: int
    iuni: int
    phi_exp: int
    phi_lc: Fraction
    extinct: bool


def metrics(state: KnowledgeState) -> MetricsRecord:
    """All per-time observables, by full traversal of a frozen state."""
    s = structure(state)
    n = s.n
    labels = state.label[:n]
    pt = labels != PF
    n_pt = int(np.count_nonzero(pt))
    n_true_pt = int(np.count_nonzero(pt & (np.asarray(s.is_true[:n]) == 1)))

    comp_roots = np.asarray(s.comp_root[:n])
    cmask = comp_roots >= 0
    if cmask.any():
        sizes = np.bincount(comp_roots[cmask])
        n_components = int(np.count_nonzero(sizes))
        max_component = int(sizes.max())
    else:
        n_components = 0
        max_component = 0

    tf = np.asarray(s.top_false[:n])
    tmask = pt & (tf >= 0)
    m_t = int(np.bincount(tf[tmask]).max()) if tmask.any() else 0

    height = int(np.asarray(s.depth[:n])[pt].max()) if n_pt else 0
    uni_mask = pt & (state.deg_pt[:n] == 1)
    uni = int(np.count_nonzero(uni_mask))
    iuni = int(np.count_nonzero(uni_mask
                                & (np.asarray(s.has_uni_desc[:n]) == 0)))

    return MetricsRecord(
        t=state.clock,
        n_nodes=n,
        n_pt=n_pt,
        n_true_pt=n_true_pt,
        n_false_pt=n_pt - n_true_pt,
        n_pf=n - n_pt,
        n_components=n_components,
        max_component=max_component,
        m_t=m_t,
        height=height,
        uni=uni,
        iuni=iuni,
        phi_exp=potentials.phi_exp(state, s),
        phi_lc=potentials.phi_lc(state, s),
        extinct=state.extinct,
    )


def univalent_stats(state: KnowledgeState) -> Tuple[int, int, int]:
    """(univalent count, independent univalent count, height) over the
    observable-PT nodes. Independent univalent nodes are the terminal
    points of maximal univalent paths: univalent nodes with no univalent
    strict descendant."""
    m = metrics(state)
    return m.uni, m.iuni, m.height


# ---------------------------------------------------------------------------
# drift certificates
# ---------------------------------------------------------------------------

POTENTIALS: Dict[str, Callable] = {
    "exp": lambda st: Fraction(potentials.phi_exp(st)),
    "lc": potentials.phi_lc,
    "combined": lambda st: potentials.phi_combined(st, st.params.k),
    "reliability": potentials.phi_reliability,
}

# the claimed direction of drift for each potential
RELATIONS: Dict[str, str] = {
    "exp": "<",
    "lc": ">",
    "combined": ">",
    "reliability": ">=",
}


@dataclass
class DriftCertificate:
    potential: str
    state_digest: tuple
    exact_expected_delta: Fraction
    bound_claimed: Fraction
    relation: str
    satisfied: bool
    support_size: int
    max_abs_delta: Fraction


def _holds(value: Fraction, relation: str, bound: Fraction) -> bool:
    if relation == "<":
        return value < bound
    if relation == "<=":
        return value <= bound
    if relation == ">":
        return value > bound
    if relation == ">=":
        return value >= bound
    raise ValueError(f"unknown relation {relation!r}")


def drift_certificate(state: KnowledgeState, potential: str,
                      claimed_bound: Fraction = Fraction(0),
                      relation: Optional[str] = None,
                      restrict_to_subtree: Optional[int] = None,
                      ) -> DriftCertificate:
    """Exact one-step expected change of a potential at a frozen state.

    Enumerates the full transition support, evaluates the potential on
    every outcome with rational arithmetic, and checks the claimed
    inequality. ``restrict_to_subtree`` conditions the support on the
    parent lying inside a given node's subtree (renormalised), which is
    how the per-block evolution statements are phrased.
    """
    if state.extinct:
        raise ExtinctError("drift is undefined at an extinct state")
    fn = POTENTIALS[potential]
    relation = relation or RELATIONS[potential]
    base = fn(state)
    if potential in ("exp", "lc", "combined") and base <= 0 \
            and potential != "combined":
        raise ValueError(f"{potential} drift claim is vacuous at value {base}")

    support = one_step_support(state)
    if restrict_to_subtree is not None:
        mask = _kernels.subtree_mask(state.parent, np.int64(state.n_nodes),
                                     np.int64(restrict_to_subtree))
        entries = [(pr, o) for pr, o in support if mask[o.parent] == 1]
        total = sum((pr for pr, _ in entries), Fraction(0))
        if total == 0:
            raise ValueError("no transition enters the requested subtree")
        entries = [(pr / total, o) for pr, o in entries]
    else:
        entries = list(support)

    expected = Fraction(0)
    max_abs = Fraction(0)
    for pr, outcome in entries:
        nxt = state.copy()
        apply_outcome(nxt, outcome)
        delta = fn(nxt) - base
        expected += pr * delta
        if abs(delta) > max_abs:
            max_abs = abs(delta)
    return DriftCertificate(
        potential=potential,
        state_digest=state.digest(),
        exact_expected_delta=expected,
        bound_claimed=Fraction(claimed_bound),
        relation=relation,
        satisfied=_holds(expected, relation, Fraction(claimed_bound)),
        support_size=len(entries),
        max_abs_delta=max_abs,
    )


def elimination_margin(params: Params) -> Fraction:
    """(1-eps) max(-(2k-1)p/2 + 3, -p/2 + 3(1-p)) + 2 eps (1-p).

    Strictly negative means error effects are eliminated and the
    exponential potential contracts; requires bounded k.
    """
    if params.k is None:
        raise ValueError("elimination margin needs a bounded k")
    eps, p, k = params.eps, params.p, params.k
    branch = max(-Fraction(2 * k - 1, 2) * p + 3,
                 -p / 2 + 3 * (1 - p))
    return (1 - eps) * branch + 2 * eps * (1 - p)


def survival_margin(params: Params) -> Fraction:
    """(1-p)/2 - 3(1-eps)p; strictly positive means the first error
    effect survives forever with positive probability."""
    eps, p = params.eps, params.p
    return (1 - p) / 2 - 3 * (1 - eps) * p


def standard_bound(potential: str, params: Params) -> Fraction:
    """The drift bound the theory claims for a potential at parameters:
    strictly below zero for the exponential potential, strictly above
    1/2 - 2p for leaves-and-components, strictly above zero for the
    combined potential, at least zero for reliability."""
    if potential == "lc":
        return Fraction(1, 2) - 2 * params.p
    if potential in ("exp", "combined", "reliability"):
        return Fraction(0)
    raise ValueError(f"unknown potential {potential!r}")


def harvest_states(params: Params, init: InitKind, count: int,
                   master_seed: int, t_cap: int = 64,
                   require: Optional[Callable[[KnowledgeState], bool]] = None,
                   ) -> List[KnowledgeState]:
    """Frozen non-extinct states sampled along short trajectories.

    Trajectory lengths are spread deterministically over [1, t_cap] so
    the collection mixes young states with nearly-saturated ones; the
    cap keeps exact certification on each state tractable. ``require``
    filters (e.g. for states where a potential is positive, so a strict
    drift claim is non-vacuous).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    states: List[KnowledgeState] = []
    attempts = 0
    limit = 200 * count
    while len(states) < count:
        attempts += 1
        if attempts > limit:
            raise RuntimeError(
                f"could not harvest {count} states in {limit} attempts; "
                "the filter rejects almost everything at these parameters")
        rng = split(master_seed, attempts)
        horizon = 1 + (attempts * 7919) % t_cap
        st = new_state(params, init, capacity=horizon + 8)
        # advance in doubling increments, keeping the last alive
        # snapshot: in eliminating regimes the endpoint is almost always
        # extinct, but the trajectory still passes through live states
        snap: Optional[KnowledgeState] = None
        target = 1
        while True:
            _kernels.advance(st.parent, st.label, st.birth, st.deg_pt,
                             st.deg_cf, st.fen, st.scal, rng.state,
                             params.eps_float, params.p_float,
                             np.int64(params.k_eff), np.int64(target))
            if st.extinct:
                break
            snap = st.copy()
            if target >= horizon:
                break
            target = min(2 * target, horizon)
        if snap is None:
            continue
        if require is not None and not require(snap):
            continue
        states.append(snap)
    return states


# ---------------------------------------------------------------------------
# interval helpers
# ---------------------------------------------------------------------------

def wilson_interval(successes: int, trials: int,
                    z: float = 1.959963984540054) -> Tuple[float, float]:
    """Wilson score 95% interval; robust at the 0/1 boundaries."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    phat = successes / trials
    denom = 1 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials
                         + z * z / (4 * trials * trials)) / denom
    low = 0.0 if successes == 0 else max(0.0, center - half)
    high = 1.0 if successes == trials else min(1.0, center + half)
    return low, high


def _freq_se(successes: int, trials: int) -> float:
    phat = successes / trials
    return math.sqrt(max(phat * (1 - phat), 1e-12) / trials)


# ---------------------------------------------------------------------------
# survival estimation
# ---------------------------------------------------------------------------

@dataclass
class SurvivalEstimate:
    params: Params
    trials: int
    t_max: int
    survived: int
    survived_half: int
    frequency: float
    frequency_half: float
    wilson_low: float
    wilson_high: float
    extinction_times: List[int] = field(default_factory=list)

    @property
    def standard_error(self) -> float:
        return _freq_se(self.survived, self.trials)


def _tracked_alive(state: KnowledgeState) -> bool:
    """Does the tracked False subtree still hold a PT node?

    Simple model: the whole tree is the CF root's subtree, so this is
    just non-extinction. General model: the subtree of the first CF node
    (no CF node yet counts as alive-by-vacuity only if the tree lives).
    """
    if state.extinct:
        return False
    u = state.first_cf
    if u is None:
        return False
    return subtree_pt_count(state, u) > 0


def survival_estimate(params: Params, init: InitKind, trials: int,
                      t_max: int, master_seed: int) -> SurvivalEstimate:
    """Fraction of independent trajectories whose tracked False subtree
    still has a PT node at t_max (and at t_max/2, for stabilisation),
    plus the extinction-time histogram as a side product.

    Survival at a finite horizon is a proxy for survival forever; the
    regimes the theory separates show up as stabilising vs decaying
    frequencies between the two horizons.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    half = t_max // 2
    survived = survived_half = 0
    ext_times: List[int] = []
    simple = isinstance(init, (SimpleRootCF, UnivalentInit))

    def alive_now(st: KnowledgeState) -> bool:
        return (not st.extinct) if simple else _tracked_alive(st)

    for i in range(trials):
        rng = split(master_seed, i)
        st = new_state(params, init, capacity=t_max + 4)
        halfway: List[bool] = []
        run(st, t_max, rng,
            plan=MetricsPlan(times=[half]),
            record=lambda s: halfway.append(alive_now(s)))
        alive = alive_now(st)
        survived += alive
        survived_half += halfway[0] if halfway else alive
        if st.extinct:
            ext_times.append(st.extinction_time)
        elif not simple and not alive:
            ext_times.append(-1)  # tracked subtree died, tree lives on
    low, high = wilson_interval(survived, trials)
    return SurvivalEstimate(
        params=params, trials=trials, t_max=t_max,
        survived=survived, survived_half=survived_half,
        frequency=survived / trials, frequency_half=survived_half / trials,
        wilson_low=low, wilson_high=high,
        extinction_times=ext_times,
    )


# ---------------------------------------------------------------------------
# univalent-initialisation waiting time
# ---------------------------------------------------------------------------

@dataclass
class TauStatistics:
    trials: int
    cap: int
    values: np.ndarray       # tau per trial, cap+1 when censored
    tail: Dict[int, float]   # t -> empirical P(tau > t)

    def tail_at(self, t: int) -> float:
        return float(np.count_nonzero(self.values > t)) / self.trials


def tau_statistics(p, chain_length: int, trials: int, master_seed: int,
                   cap: int = 4096) -> TauStatistics:
    """Distribution of the first time the PF root's single child gains a
    second PT child (or stops being PT), under depth-2 checks.

    Starting from a univalent chain, no depth-2 check can reach the
    tracked node before that attachment happens, so the tail law is the
    pure preferential-attachment one: P(tau > t) = 1 / (2t + 1).
    """
    params = Params.make(0, p, 2)
    tracked = 1  # child of the PF root in the univalent initialisation
    values = np.empty(trials, dtype=np.int64)
    for i in range(trials):
        rng = split(master_seed, i)
        st = new_state(params, UnivalentInit(chain_length), capacity=cap + 8)
        st.ensure_capacity(st.n_nodes + cap)
        tau = cap + 1
        while st.clock < cap:
            _kernels.advance(st.parent, st.label, st.birth, st.deg_pt,
                             st.deg_cf, st.fen, st.scal, rng.state,
                             st.params.eps_float, st.params.p_float,
                             np.int64(st.params.k_eff),
                             np.int64(st.clock + 1))
            if st.extinct:
                tau = st.clock
                break
            if st.label[tracked] == PF or st.deg_pt[tracked] != 1:
                tau = st.clock
                break
        values[i] = tau
    stats = TauStatistics(trials=trials, cap=cap, values=values, tail={})
    for t in (1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 2000):
        if t <= cap:
            stats.tail[t] = stats.tail_at(t)
    return stats


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log(y) against log(x)."""
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.asarray(ys, dtype=float))
    return float(np.polyfit(lx, ly, 1)[0])


# ---------------------------------------------------------------------------
# growth urn oracle
# ---------------------------------------------------------------------------

@dataclass
class UrnOracle:
    """Closed-form moments of the number of new same-colour arrivals in
    a growth urn started with t0-1 black balls and 1 white ball; the law
    is Beta-Binomial(t; 1, t0-1). This stochastically lower-bounds a
    surviving leaf's subtree growth."""

    t0: int
    t: int

    def __post_init__(self):
        if self.t0 < 2:
            raise ValueError("t0 must be >= 2")
        if self.t < 0:
            raise ValueError("t must be >= 0")

    @property
    def mean(self) -> Fraction:
        return Fraction(self.t, self.t0)

    @property
    def second_moment(self) -> Fraction:
        return Fraction(self.t * (2 * self.t + self.t0 - 1),
                        self.t0 * (self.t0 + 1))

    def sample(self, rng: Stream) -> int:
        return int(_kernels.urn_draws(rng.state, np.int64(self.t0),
                                      np.int64(self.t)))


def polya_urn_oracle(t0: int, t: int) -> UrnOracle:
    return UrnOracle(t0=t0, t=t)


# ---------------------------------------------------------------------------
# reliability
# ---------------------------------------------------------------------------

def reliability_ratio(final_records: Sequence[MetricsRecord]
                      ) -> Tuple[float, float]:
    """Mean and standard error of the final-time False-PT proportion
    among observable-PT nodes, across trials."""
    if not final_records:
        raise ValueError("need at least one trial record")
    ratios = np.array([(r.n_false_pt / r.n_pt) if r.n_pt else 0.0
                       for r in final_records])
    se = float(ratios.std(ddof=1) / math.sqrt(len(ratios))) \
        if len(ratios) > 1 else 0.0
    return float(ratios.mean()), se
