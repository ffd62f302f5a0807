"""Exact distribution over trees at a small horizon, by exhaustive
enumeration.

The state space at horizon h is finite; breadth-first expansion with
merging of identical trees (same parent array and label array) keeps the
atom count far below the naive branch count. Probabilities are exact
rationals, so the returned distribution sums to exactly one and any
discrepancy against a sampler is the sampler's. Extinct states absorb:
their mass is carried to the horizon unchanged.

Enumeration cost is explicitly budgeted in branch visits; exceeding the
budget raises rather than silently truncating.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

from . import potentials
from .evolution import apply_outcome, one_step_support
from .state import InitKind, KnowledgeState, Params, new_state

Digest = Tuple[Tuple[int, ...], Tuple[int, ...]]


class BudgetExceededError(RuntimeError):
    """Enumeration would visit more branches than allowed."""


@dataclass(frozen=True)
class TrajectoryAtom:
    """One point of the exact horizon distribution."""

    digest: Digest
    probability: Fraction
    extinct: bool


@dataclass
class HorizonDistribution:
    params: Params
    horizon: int
    atoms: Tuple[TrajectoryAtom, ...]
    branch_visits: int

    def total(self) -> Fraction:
        return sum((a.probability for a in self.atoms), Fraction(0))

    def as_dict(self) -> Dict[Digest, Fraction]:
        return {a.digest: a.probability for a in self.atoms}

    def survival_probability(self) -> Fraction:
        return sum((a.probability for a in self.atoms if not a.extinct),
                   Fraction(0))

    def __len__(self) -> int:
        return len(self.atoms)


def enumerate_horizon(params: Params, init: InitKind, horizon: int,
                      budget: int = 100_000_000) -> HorizonDistribution:
    """Exact law of the tree after ``horizon`` insertions.

    Breadth-first over insertion counts; states with equal digests are
    merged level by level, so cost is the number of distinct trees times
    their branching, not the raw tree of outcomes.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    root = new_state(params, init, capacity=init_capacity(init, horizon))
    level: Dict[Digest, Tuple[Fraction, KnowledgeState]] = {
        root.digest(): (Fraction(1), root)}
    absorbed: Dict[Digest, Fraction] = {}
    visits = 0
    for _ in range(horizon):
        nxt: Dict[Digest, Tuple[Fraction, KnowledgeState]] = {}
        for dg, (prob, st) in level.items():
            support = one_step_support(st)
            visits += len(support)
            if visits > budget:
                raise BudgetExceededError(
                    f"enumeration exceeded {budget} branch visits")
            for pr, outcome in support:
                child = st.copy()
                apply_outcome(child, outcome)
                cdg = child.digest()
                mass = prob * pr
                if child.extinct:
                    absorbed[cdg] = absorbed.get(cdg, Fraction(0)) + mass
                elif cdg in nxt:
                    nxt[cdg] = (nxt[cdg][0] + mass, nxt[cdg][1])
                else:
                    nxt[cdg] = (mass, child)
        level = nxt
        if not level:
            break
    atoms: List[TrajectoryAtom] = []
    for dg, (prob, _) in sorted(level.items()):
        atoms.append(TrajectoryAtom(digest=dg, probability=prob,
                                    extinct=False))
    for dg, prob in sorted(absorbed.items()):
        atoms.append(TrajectoryAtom(digest=dg, probability=prob,
                                    extinct=True))
    dist = HorizonDistribution(params=params, horizon=horizon,
                               atoms=tuple(atoms), branch_visits=visits)
    assert dist.total() == 1
    return dist


def init_capacity(init: InitKind, horizon: int) -> int:
    base = getattr(init, "chain_length", None)
    if base is None:
        parents = getattr(init, "parents", None)
        base = len(parents) if parents is not None else 1
    return int(base) + horizon + 2


def expected_potential(dist: HorizonDistribution, init: InitKind,
                       which: str = "exp") -> Fraction:
    """Exact E[potential] at the horizon, by rebuilding each atom."""
    from .state import ExplicitInit
    total = Fraction(0)
    for atom in dist.atoms:
        parents, labels = atom.digest
        st = new_state(dist.params, ExplicitInit(parents=list(parents),
                                                 labels=list(labels)),
                       capacity=len(parents) + 1)
        if which == "exp":
            val = Fraction(potentials.phi_exp(st))
        elif which == "lc":
            val = potentials.phi_lc(st)
        else:
            raise ValueError(f"unknown potential {which!r}")
        total += atom.probability * val
    return total


# ---------------------------------------------------------------------------
# sampler comparison
# ---------------------------------------------------------------------------

@dataclass
class ComparisonReport:
    n_samples: int
    n_atoms: int
    total_variation: float
    chi2_statistic: float
    chi2_pvalue: float
    chi2_cells: int
    unseen_mass: Fraction  # exact mass of atoms never sampled


def compare(empirical: Mapping[Digest, int],
            dist: HorizonDistribution,
            min_expected: float = 5.0) -> ComparisonReport:
    """Empirical digest counts against the exact law.

    Total variation is computed over the full support. The chi-square
    test pools atoms whose expected count falls below ``min_expected``
    into one cell (standard validity condition). A sampled digest
    outside the exact support is a correctness bug, not a statistical
    fluctuation, and raises.
    """
    from scipy import stats

    n = sum(empirical.values())
    if n <= 0:
        raise ValueError("empirical sample is empty")
    exact = dist.as_dict()
    for dg in empirical:
        if dg not in exact:
            raise ValueError("sampled a tree outside the exact support; "
                             "the sampler and the dynamics disagree")

    tv = Fraction(0)
    unseen = Fraction(0)
    for dg, prob in exact.items():
        c = empirical.get(dg, 0)
        tv += abs(Fraction(c, n) - prob)
        if c == 0:
            unseen += prob
    tv = tv / 2

    observed: List[float] = []
    expected: List[float] = []
    pool_obs = 0.0
    pool_exp = 0.0
    for dg, prob in exact.items():
        e = float(prob) * n
        o = float(empirical.get(dg, 0))
        if e < min_expected:
            pool_obs += o
            pool_exp += e
        else:
            observed.append(o)
            expected.append(e)
    if pool_exp > 0:
        observed.append(pool_obs)
        expected.append(pool_exp)
    if len(observed) < 2:
        chi2, pval = 0.0, 1.0
    else:
        chi2, pval = stats.chisquare(observed, expected)
        chi2, pval = float(chi2), float(pval)
    return ComparisonReport(
        n_samples=n, n_atoms=len(dist), total_variation=float(tv),
        chi2_statistic=chi2, chi2_pvalue=pval, chi2_cells=len(observed),
        unseen_mass=unseen,
    )


# ---------------------------------------------------------------------------
# serialisation
# ---------------------------------------------------------------------------

def dump_jsonl(dist: HorizonDistribution, path: str) -> None:
    """One atom per line: parents, labels, probability as "a/b"."""
    with open(path, "w") as fh:
        for atom in dist.atoms:
            parents, labels = atom.digest
            fh.write(json.dumps({
                "parents": list(parents),
                "labels": list(labels),
                "probability": f"{atom.probability.numerator}"
                               f"/{atom.probability.denominator}",
                "extinct": atom.extinct,
            }, separators=(",", ":")) + "\n")


def load_jsonl(path: str, params: Params, horizon: int
               ) -> HorizonDistribution:
    atoms: List[TrajectoryAtom] = []
    with open(path) as fh:
        for line in fh:
            rec = json.loads(line)
            num, den = rec["probability"].split("/")
            atoms.append(TrajectoryAtom(
                digest=(tuple(rec["parents"]), tuple(rec["labels"])),
                probability=Fraction(int(num), int(den)),
                extinct=bool(rec["extinct"]),
            ))
    return HorizonDistribution(params=params, horizon=horizon,
                               atoms=tuple(atoms), branch_visits=0)
