"""Labelled rooted-tree knowledge state with preferential-attachment weights.

Hidden labels are CT ("conditionally true"), CF ("conditionally false") and
PF ("proclaimed false"); the observable map collapses CT and CF to PT.
A node's sampling weight is 1 + (number of PT children) while it is PT,
and 0 once it is PF. Weights live in a Fenwick prefix-sum tree so parent
sampling and the updates caused by one insertion are O(log n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from . import _kernels
from ._kernels import CT, CF, PF, K_UNBOUNDED, SCAL_LEN
from ._kernels import S_N, S_CLOCK, S_WEIGHT, S_FIRST_CF, S_EXTINCT
from .rng import Stream

LABEL_NAMES = {CT: "CT", CF: "CF", PF: "PF"}
PT = "PT"

ProbabilityLike = Union[int, float, str, Fraction]


class ExtinctError(RuntimeError):
    """Raised when an operation needs a live (PT-bearing) state."""


class InvalidStateError(ValueError):
    """Raised when an explicit tree violates a state invariant."""


def as_probability(x: ProbabilityLike, name: str) -> Fraction:
    """Exact probability from an int, Fraction, rational string, or float
    (floats go through their shortest decimal repr, so 0.16 means 4/25)."""
    if isinstance(x, Fraction):
        f = x
    elif isinstance(x, float):
        f = Fraction(repr(x))
    else:
        f = Fraction(x)
    if not 0 <= f <= 1:
        raise ValueError(f"{name} must be in [0, 1], got {f}")
    return f


def observable(label: int) -> str:
    """The public view of a hidden label: PF maps to PF, CT and CF to PT."""
    if label == PF:
        return "PF"
    if label in (CT, CF):
        return "PT"
    raise ValueError(f"unknown label {label!r}")


@dataclass(frozen=True)
class Params:
    """(error probability, check probability, check depth); k=None is
    an unbounded check that walks all the way to the root."""

    eps: Fraction
    p: Fraction
    k: Optional[int]

    @classmethod
    def make(cls, eps: ProbabilityLike, p: ProbabilityLike,
             k: Union[int, None, str, float]) -> "Params":
        if k is None or k == "inf" or (isinstance(k, float) and math.isinf(k)):
            kk: Optional[int] = None
        else:
            kk = int(k)
            if kk < 1:
                raise ValueError("k must be >= 1 (or unbounded)")
        return cls(as_probability(eps, "eps"), as_probability(p, "p"), kk)

    @property
    def k_eff(self) -> int:
        return int(K_UNBOUNDED) if self.k is None else self.k

    @property
    def eps_float(self) -> float:
        return float(self.eps)

    @property
    def p_float(self) -> float:
        return float(self.p)


# --- initial states ---------------------------------------------------------

@dataclass(frozen=True)
class SimpleRootCF:
    """Single CF root; with eps = 0 this is the simple process."""


@dataclass(frozen=True)
class GeneralRootCT:
    """Single CT root (the general process's true origin)."""


@dataclass(frozen=True)
class UnivalentInit:
    """A path whose PF root and its single child each have one PT child;
    the deepest node is the growth frontier."""

    chain_length: int = 3


@dataclass(frozen=True)
class ExplicitInit:
    """A hand-built tree: parents[i] is the parent id of node i (-1 for
    the root, which must be node 0), labels[i] a hidden label."""

    parents: Sequence[int]
    labels: Sequence[int]


InitKind = Union[SimpleRootCF, GeneralRootCT, UnivalentInit, ExplicitInit]


@dataclass
class NodeRecord:
    id: int
    parent: Optional[int]
    children: list
    label: int
    birth: int
    deg_pt: int
    deg_cf: int

    @property
    def observable(self) -> str:
        return observable(self.label)


class KnowledgeState:
    """Mutable process state: node arrays, degree caches, Fenwick weights.

    Node ids are birth order (dense, never reused); id 0 is the root.
    The state is confined to one thread at a time; parallelism happens
    across independent states.
    """

    __slots__ = ("params", "parent", "label", "birth", "deg_pt", "deg_cf",
                 "fen", "scal", "n_init")

    def __init__(self, params: Params, capacity: int = 16):
        self.params = params
        capacity = max(capacity, 4)
        self.parent = np.full(capacity, -1, dtype=np.int64)
        self.label = np.zeros(capacity, dtype=np.int8)
        self.birth = np.zeros(capacity, dtype=np.int64)
        self.deg_pt = np.zeros(capacity, dtype=np.int64)
        self.deg_cf = np.zeros(capacity, dtype=np.int64)
        self.fen = np.zeros(capacity + 1, dtype=np.int64)
        self.scal = np.zeros(SCAL_LEN, dtype=np.int64)
        self.scal[S_FIRST_CF] = -1
        self.scal[S_EXTINCT] = -1
        self.n_init = 0

    # --- scalar views ---

    @property
    def n_nodes(self) -> int:
        return int(self.scal[S_N])

    @property
    def clock(self) -> int:
        return int(self.scal[S_CLOCK])

    @property
    def total_weight(self) -> int:
        return int(self.scal[S_WEIGHT])

    @property
    def first_cf(self) -> Optional[int]:
        v = int(self.scal[S_FIRST_CF])
        return None if v < 0 else v

    @property
    def extinct(self) -> bool:
        return self.total_weight == 0

    @property
    def extinction_time(self) -> Optional[int]:
        v = int(self.scal[S_EXTINCT])
        if v >= 0:
            return v
        return self.clock if self.extinct else None

    # --- construction ---

    def _append_raw(self, parent: int, label: int, birth: int) -> int:
        """Append a node without touching the Fenwick tree (init only)."""
        v = self.n_nodes
        self.ensure_capacity(v + 1)
        self.parent[v] = parent
        self.label[v] = label
        self.birth[v] = birth
        self.deg_pt[v] = 0
        self.deg_cf[v] = 0
        if parent >= 0 and label != PF:
            self.deg_pt[parent] += 1
            if label == CF:
                self.deg_cf[parent] += 1
        if label == CF and self.scal[S_FIRST_CF] < 0:
            self.scal[S_FIRST_CF] = v
        self.scal[S_N] = v + 1
        return v

    def _finish_init(self) -> None:
        self.n_init = self.n_nodes
        self.rebuild_weights()
        if self.extinct and self.scal[S_EXTINCT] < 0:
            self.scal[S_EXTINCT] = 0

    def weight(self, v: int) -> int:
        if self.label[v] == PF:
            return 0
        return 1 + int(self.deg_pt[v])

    def rebuild_weights(self) -> None:
        n = self.n_nodes
        w = np.where(self.label[:n] != PF, 1 + self.deg_pt[:n], 0)
        _kernels.fenwick_build(self.fen, w.astype(np.int64), n)
        self.scal[S_WEIGHT] = int(w.sum())

    def ensure_capacity(self, target: int) -> None:
        cap = self.parent.shape[0]
        if target <= cap:
            return
        newcap = max(target, 2 * cap)
        for name in ("parent", "label", "birth", "deg_pt", "deg_cf"):
            old = getattr(self, name)
            new = np.zeros(newcap, dtype=old.dtype)
            new[:cap] = old
            setattr(self, name, new)
        self.parent[cap:] = -1
        self.fen = np.zeros(newcap + 1, dtype=np.int64)
        self.rebuild_weights()

    def copy(self) -> "KnowledgeState":
        other = KnowledgeState.__new__(KnowledgeState)
        other.params = self.params
        for name in ("parent", "label", "birth", "deg_pt", "deg_cf",
                     "fen", "scal"):
            setattr(other, name, getattr(self, name).copy())
        other.n_init = self.n_init
        return other

    # --- inspection ---

    def children(self, v: int) -> list:
        n = self.n_nodes
        return [int(i) for i in np.nonzero(self.parent[:n] == v)[0]]

    def node(self, v: int) -> NodeRecord:
        if not 0 <= v < self.n_nodes:
            raise IndexError(f"node {v} does not exist")
        par = int(self.parent[v])
        return NodeRecord(
            id=v,
            parent=None if par < 0 else par,
            children=self.children(v),
            label=int(self.label[v]),
            birth=int(self.birth[v]),
            deg_pt=int(self.deg_pt[v]),
            deg_cf=int(self.deg_cf[v]),
        )

    def digest(self) -> tuple:
        """Canonical encoding of the labelled tree (birth order kept)."""
        n = self.n_nodes
        return (tuple(int(x) for x in self.parent[:n]),
                tuple(int(x) for x in self.label[:n]))

    def pt_nodes(self) -> np.ndarray:
        n = self.n_nodes
        return np.nonzero(self.label[:n] != PF)[0]

    # --- sampling ---

    def sample_parent(self, rng: Stream) -> int:
        """Draw a PT node with probability proportional to 1 + deg_pt.

        Consumes one draw; the state is not modified.
        """
        w = self.total_weight
        if w <= 0:
            raise ExtinctError("every node is PF; the process has stopped")
        r = rng.randint_below(w)
        return int(_kernels.fenwick_select(self.fen, np.int64(r)))

    # --- auditing ---

    def audit(self) -> None:
        """Full-scan consistency check of every cached quantity."""
        n = self.n_nodes
        if n == 0:
            raise InvalidStateError("empty state")
        total = 0
        deg_pt = np.zeros(n, dtype=np.int64)
        deg_cf = np.zeros(n, dtype=np.int64)
        for v in range(n):
            par = int(self.parent[v])
            if v == 0:
                if par != -1:
                    raise InvalidStateError("node 0 must be the root")
            else:
                if not 0 <= par < v:
                    raise InvalidStateError(
                        f"node {v}: parent {par} must exist and be older")
                if self.label[v] != PF:
                    deg_pt[par] += 1
                    if self.label[v] == CF:
                        deg_cf[par] += 1
            if int(self.label[v]) not in (CT, CF, PF):
                raise InvalidStateError(f"node {v}: unknown label")
        for v in range(n):
            if deg_pt[v] != self.deg_pt[v]:
                raise InvalidStateError(
                    f"node {v}: deg_pt cache {int(self.deg_pt[v])} != "
                    f"recount {int(deg_pt[v])}")
            if deg_cf[v] != self.deg_cf[v]:
                raise InvalidStateError(
                    f"node {v}: deg_cf cache {int(self.deg_cf[v])} != "
                    f"recount {int(deg_cf[v])}")
            w = 0 if self.label[v] == PF else 1 + int(deg_pt[v])
            fw = int(_kernels.fenwick_prefix(self.fen, v))
            fw -= int(_kernels.fenwick_prefix(self.fen, v - 1)) if v else 0
            if fw != w:
                raise InvalidStateError(
                    f"node {v}: fenwick weight {fw} != label/degree rule {w}")
            total += w
        if total != self.total_weight:
            raise InvalidStateError(
                f"totalWeight cache {self.total_weight} != recount {total}")


def new_state(params: Params, init: InitKind,
              capacity: int = 16) -> KnowledgeState:
    """Build a validated initial state for the given parameters."""
    st = KnowledgeState(params, capacity=capacity)
    if isinstance(init, SimpleRootCF):
        st._append_raw(-1, CF, -1)
    elif isinstance(init, GeneralRootCT):
        st._append_raw(-1, CT, -1)
    elif isinstance(init, UnivalentInit):
        length = init.chain_length
        if length < 2:
            raise ValueError("chain_length must be >= 2")
        st.ensure_capacity(length)
        st._append_raw(-1, PF, -1)
        for i in range(1, length):
            st._append_raw(i - 1, CT, -1)
    elif isinstance(init, ExplicitInit):
        parents = list(init.parents)
        labels = list(init.labels)
        if len(parents) != len(labels) or not parents:
            raise InvalidStateError("parents and labels must be nonempty "
                                    "and of equal length")
        st.ensure_capacity(len(parents))
        for v, (par, lab) in enumerate(zip(parents, labels)):
            if v == 0:
                if par not in (-1, None):
                    raise InvalidStateError("node 0 must be the root")
                par = -1
            elif not 0 <= par < v:
                raise InvalidStateError(
                    f"node {v}: parent {par} is dangling or not older "
                    "(ids must be birth-ordered)")
            if lab not in (CT, CF, PF):
                raise InvalidStateError(f"node {v}: unknown label {lab!r}")
            st._append_raw(par, lab, -1)
    else:
        raise TypeError(f"unknown init kind {init!r}")
    st._finish_init()
    st.audit()
    return st
