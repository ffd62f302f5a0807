"""Shared fixtures and independent reference implementations.

The reference functions here recompute structural quantities from the
raw (parents, labels) encoding with plain recursion and dictionaries,
deliberately sharing no code with the package's array passes; tests
compare the two on randomly evolved states.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, List, Optional, Set, Tuple

import pytest

import ckpsim as ck
from ckpsim import CT, CF, PF


# ---------------------------------------------------------------------------
# reference structure computations (independent of the package internals)
# ---------------------------------------------------------------------------

def ref_children(parents: Tuple[int, ...]) -> Dict[int, List[int]]:
    ch: Dict[int, List[int]] = {v: [] for v in range(len(parents))}
    for v, p in enumerate(parents):
        if p >= 0:
            ch[p].append(v)
    return ch


def ref_is_true(parents, labels, v) -> bool:
    """True node: every node on the root path (inclusive) is CT."""
    while v >= 0:
        if labels[v] != CT:
            return False
        v = parents[v]
    return True


def ref_minimal_false(parents, labels) -> List[int]:
    out = []
    for v in range(len(parents)):
        if labels[v] == PF:
            continue
        par = parents[v]
        if labels[v] == CF or (par >= 0 and labels[par] == PF):
            out.append(v)
    return out


def ref_blocks(parents, labels) -> Dict[int, Set[int]]:
    """Minimal False root -> members, by walking down through CT nodes."""
    ch = ref_children(parents)
    out: Dict[int, Set[int]] = {}
    for r in ref_minimal_false(parents, labels):
        members = {r}
        stack = [r]
        while stack:
            u = stack.pop()
            for w in ch[u]:
                if labels[w] == CT:
                    members.add(w)
                    stack.append(w)
        out[r] = members
    return out


def ref_components(parents, labels) -> Dict[int, Set[int]]:
    """False-PT connectivity: root of each component -> members."""
    false_pt = {v for v in range(len(parents))
                if labels[v] != PF and not ref_is_true(parents, labels, v)}
    comp_of: Dict[int, int] = {}
    for v in sorted(false_pt):
        par = parents[v]
        if par in comp_of:
            comp_of[v] = comp_of[par]
        else:
            comp_of[v] = v
    out: Dict[int, Set[int]] = {}
    for v, r in comp_of.items():
        out.setdefault(r, set()).add(v)
    return out


def ref_depth_within(parents, members: Set[int], v: int) -> int:
    d = 0
    while parents[v] in members:
        v = parents[v]
        d += 1
    return d


def ref_phi_exp(parents, labels, deg_pt=None) -> int:
    if deg_pt is None:
        deg_pt = ref_deg_pt(parents, labels)
    total = 0
    for root, members in ref_blocks(parents, labels).items():
        for v in members:
            total += (1 + deg_pt[v]) * 2 ** ref_depth_within(
                parents, members, v)
    return total


def ref_deg_pt(parents, labels) -> List[int]:
    deg = [0] * len(parents)
    for v, p in enumerate(parents):
        if p >= 0 and labels[v] != PF:
            deg[p] += 1
    return deg


def ref_deg_cf(parents, labels) -> List[int]:
    deg = [0] * len(parents)
    for v, p in enumerate(parents):
        if p >= 0 and labels[v] == CF:
            deg[p] += 1
    return deg


def ref_phi_lc(parents, labels) -> Fraction:
    ch = ref_children(parents)
    deg_cf = ref_deg_cf(parents, labels)
    total = Fraction(0)
    for root, members in ref_blocks(parents, labels).items():
        if len(members) == 1:
            total += 1
            continue
        total += 1
        for v in members:
            if not any(w in members for w in ch[v]):
                total += Fraction(1, deg_cf[v] + 1)
    return total


def ref_phi_reliability(parents, labels, eps: Fraction,
                        p: Fraction) -> Fraction:
    n_true_pt = sum(1 for v in range(len(parents))
                    if labels[v] != PF and ref_is_true(parents, labels, v))
    return eps * (1 - p) / (1 - eps) * n_true_pt \
        - ref_phi_exp(parents, labels)


# ---------------------------------------------------------------------------
# evolved random states
# ---------------------------------------------------------------------------

def evolve_state(eps, p, k, t, seed, init=None) -> ck.KnowledgeState:
    params = ck.Params.make(eps, p, k)
    if init is None:
        init = ck.SimpleRootCF() if params.eps == 0 else ck.GeneralRootCT()
    st = ck.new_state(params, init, capacity=t + 8)
    ck.run(st, t, ck.split(seed, 0), plan=ck.MetricsPlan(times=[]),
           record=lambda s: None)
    return st


@pytest.fixture(scope="session")
def evolved_states():
    """A mixed bag of evolved states across regimes, some extinct."""
    out = []
    for seed, (eps, p, k, t) in enumerate([
            (0, "1/2", 2, 30), (0, "1/4", 3, 50), (0, "1/5", 5, 80),
            ("1/3", "1/2", 2, 40), ("1/20", "19/20", 10, 60),
            ("3/10", "1/10", 5, 70), (0, "9/10", 4, 50),
            (0, "1/10", "inf", 40)]):
        for rep in range(4):
            out.append(evolve_state(eps, p, k, t, 1000 * seed + rep))
    return out
