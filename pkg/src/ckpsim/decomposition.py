"""PT components, minimal False nodes, and the block partition.

A PT component is a maximal connected set of False nodes with observable
PT; its root is the oldest (earliest-birth) member. A block is a minimal
False node (PT and either CF or with a PF parent) together with the
descendants reached through CT-labelled PT nodes; blocks partition the
False PT nodes with at most one CF node each. With eps = 0 the two
notions coincide.

Everything here is recomputed by traversal over a frozen state; degree
caches on the state itself are the only incrementally-maintained data,
and ``KnowledgeState.audit`` cross-checks them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Set

import numpy as np

from . import _kernels
from ._kernels import CF, CT, PF
from .state import KnowledgeState


@dataclass
class Structure:
    """Raw per-node arrays from one structural pass (ids < n)."""

    n: int
    is_true: np.ndarray
    depth: np.ndarray
    blk_root: np.ndarray
    blk_depth: np.ndarray
    blk_inner: np.ndarray
    comp_root: np.ndarray
    comp_depth: np.ndarray
    top_false: np.ndarray
    has_uni_desc: np.ndarray


def structure(state: KnowledgeState) -> Structure:
    n = state.n_nodes
    out = _kernels.tree_structure(state.parent, state.label, state.deg_pt,
                                  np.int64(n))
    return Structure(n, *out)


@dataclass
class PTComponent:
    root: int
    members: Set[int]
    depth_of: Dict[int, int]
    leaf_set: Set[int]

    def __len__(self) -> int:
        return len(self.members)


@dataclass
class Block:
    root: int
    members: Set[int]
    depth_of: Dict[int, int]
    leaf_set: Set[int]
    cf_children_of: Dict[int, int]

    def __len__(self) -> int:
        return len(self.members)


def pt_components(state: KnowledgeState) -> List[PTComponent]:
    """Partition of the False PT nodes into maximal connected components,
    ordered by root birth."""
    s = structure(state)
    groups: Dict[int, PTComponent] = {}
    inner_children: Dict[int, int] = {}
    for v in range(s.n):
        r = int(s.comp_root[v])
        if r < 0:
            continue
        comp = groups.get(r)
        if comp is None:
            comp = groups[r] = PTComponent(root=r, members=set(),
                                           depth_of={}, leaf_set=set())
        comp.members.add(v)
        comp.depth_of[v] = int(s.comp_depth[v])
        par = int(state.parent[v])
        if par >= 0 and int(s.comp_root[par]) == r and par != v:
            inner_children[par] = inner_children.get(par, 0) + 1
    for comp in groups.values():
        comp.leaf_set = {v for v in comp.members
                         if inner_children.get(v, 0) == 0}
    return [groups[r] for r in sorted(groups)]


def minimal_false_nodes(state: KnowledgeState) -> List[int]:
    """Observable-PT nodes that are CF, or CT-and-False with a PF parent;
    sorted by birth (== id)."""
    s = structure(state)
    return [v for v in range(s.n) if int(s.blk_root[v]) == v]


def blocks(state: KnowledgeState) -> List[Block]:
    """One block per minimal False node, ordered by root birth."""
    s = structure(state)
    groups: Dict[int, Block] = {}
    for v in range(s.n):
        r = int(s.blk_root[v])
        if r < 0:
            continue
        blk = groups.get(r)
        if blk is None:
            blk = groups[r] = Block(root=r, members=set(), depth_of={},
                                    leaf_set=set(), cf_children_of={})
        blk.members.add(v)
        blk.depth_of[v] = int(s.blk_depth[v])
        blk.cf_children_of[v] = int(state.deg_cf[v])
        if int(s.blk_inner[v]) == 0:
            blk.leaf_set.add(v)
    return [groups[r] for r in sorted(groups)]


def subtree_pt_count(state: KnowledgeState, u: int) -> int:
    """Number of observable-PT nodes in the subtree rooted at u; zero
    means u's error effect is eliminated at this time."""
    n = state.n_nodes
    if not 0 <= u < n:
        raise IndexError(f"node {u} does not exist")
    mask = _kernels.subtree_mask(state.parent, np.int64(n), np.int64(u))
    return int(np.count_nonzero((np.asarray(mask[:n]) == 1)
                                & (state.label[:n] != PF)))
