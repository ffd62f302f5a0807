"""Hot inner loops, written once and run either jitted or as plain Python.

Every function below is nopython-compatible. At import time the module
decides between two execution paths:

* numba path (default): functions are wrapped with ``@njit``; the main
  trajectory loop additionally releases the GIL so trials can run on a
  thread pool.
* fallback path: selected by setting ``CKP_DISABLE_NUMBA=1`` (or when
  numba is not importable). The same Python definitions run as-is, with
  numpy's integer-overflow warnings suppressed (the counter RNG relies
  on wrapping uint64 arithmetic).

Both paths consume the random stream in the same order and therefore
produce bit-identical trajectories for a given seed.
"""

from __future__ import annotations

import functools
import os

import numpy as np

# hidden labels
CT = 0
CF = 1
PF = 2

# layout of the scalar side-array passed to the kernels
S_N = 0          # number of nodes
S_CLOCK = 1      # insertions performed
S_WEIGHT = 2     # total sampling weight
S_FIRST_CF = 3   # id of the first CF node ever created, -1 if none
S_EXTINCT = 4    # clock value at extinction, -1 while alive
SCAL_LEN = 5

# k is "unbounded" above this sentinel; depths never get near it
K_UNBOUNDED = np.int64(1) << np.int64(60)

# splitmix64 constants
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U11 = np.uint64(11)
_INV53 = np.float64(1.0 / 9007199254740992.0)  # 2**-53


def use_numba() -> bool:
    if os.environ.get("CKP_DISABLE_NUMBA", "0") in ("1", "true", "yes"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


NUMBA_ENABLED = use_numba()


# ---------------------------------------------------------------------------
# counter RNG (splitmix64)
# ---------------------------------------------------------------------------

def mix64(z):
    z = (z ^ (z >> _U30)) * _MIX1
    z = (z ^ (z >> _U27)) * _MIX2
    return z ^ (z >> _U31)


def next_u64(rng):
    """Advance the stream (a length-1 uint64 array) and return 64 bits."""
    s = rng[0] + _GOLDEN
    rng[0] = s
    return mix64(s)


def next_unit(rng):
    """Uniform double in [0, 1) from the stream."""
    return np.float64(next_u64(rng) >> _U11) * _INV53


# ---------------------------------------------------------------------------
# Fenwick prefix-sum tree over int64 weights, append-only ids
# ---------------------------------------------------------------------------

def fenwick_add(fen, i, delta):
    """Add delta to entry i (0-based). fen[0] is unused."""
    size = fen.shape[0] - 1
    j = i + 1
    while j <= size:
        fen[j] += delta
        j += j & (-j)


def fenwick_prefix(fen, i):
    """Sum of entries 0..i inclusive (0-based)."""
    j = i + 1
    s = np.int64(0)
    while j > 0:
        s += fen[j]
        j -= j & (-j)
    return s


def fenwick_select(fen, r):
    """Smallest 0-based index i with prefix(0..i) > r.

    Entries are non-negative; r must satisfy 0 <= r < total weight.
    """
    size = fen.shape[0] - 1
    bm = np.int64(1)
    while (bm << np.int64(1)) <= size:
        bm <<= np.int64(1)
    pos = np.int64(0)
    rem = r
    while bm > 0:
        nxt = pos + bm
        if nxt <= size and fen[nxt] <= rem:
            rem -= fen[nxt]
            pos = nxt
        bm >>= np.int64(1)
    return pos  # 0-based id


def fenwick_build(fen, weights, n):
    """Rebuild fen in place from the first n entries of weights."""
    size = fen.shape[0] - 1
    for j in range(size + 1):
        fen[j] = 0
    for i in range(n):
        fen[i + 1] = weights[i]
    for j in range(1, size + 1):
        par = j + (j & (-j))
        if par <= size:
            fen[par] += fen[j]


# ---------------------------------------------------------------------------
# one-trajectory advance loop
# ---------------------------------------------------------------------------

def advance(parent, label, birth, deg_pt, deg_cf, fen, scal, rng,
            eps, p, k_eff, target_clock):
    """Run insertions until the clock reaches target_clock or the process
    goes extinct. Arrays must have capacity for every new node.

    Each step consumes exactly three draws from the stream (parent pick,
    error coin, check coin), in that order, regardless of which are used.
    """
    n = scal[S_N]
    clock = scal[S_CLOCK]
    w = scal[S_WEIGHT]
    first_cf = scal[S_FIRST_CF]

    while clock < target_clock:
        if w <= 0:
            if scal[S_EXTINCT] < 0:
                scal[S_EXTINCT] = clock
            break

        r = next_u64(rng) % np.uint64(w)
        u = fenwick_select(fen, np.int64(r))
        u_err = next_unit(rng)
        u_chk = next_unit(rng)

        v = n
        parent[v] = u
        birth[v] = clock
        deg_pt[v] = 0
        deg_cf[v] = 0
        if u_err < eps:
            label[v] = CF
            deg_cf[u] += 1
            if first_cf < 0:
                first_cf = v
        else:
            label[v] = CT
        deg_pt[u] += 1
        fenwick_add(fen, u, np.int64(1))
        fenwick_add(fen, v, np.int64(1))
        w += 2
        n += 1
        clock += 1

        if u_chk < p:
            # walk up to k_eff edges looking for the first non-CT node
            m = np.int64(-1)
            cur = v
            i = np.int64(0)
            while True:
                if label[cur] != CT:
                    m = cur
                    break
                if i >= k_eff or parent[cur] < 0:
                    break
                cur = parent[cur]
                i += 1
            if m >= 0:
                # zero the weights of the PT nodes on the marked path
                cur = v
                while True:
                    if label[cur] != PF:
                        wc = np.int64(1) + deg_pt[cur]
                        fenwick_add(fen, cur, -wc)
                        w -= wc
                    if cur == m:
                        break
                    cur = parent[cur]
                # relabel bottom-up and fix degree caches
                m_was = label[m]
                cur = v
                while cur != m:
                    nxt = parent[cur]
                    label[cur] = PF  # cur was CT by the walk rule
                    deg_pt[nxt] -= 1
                    cur = nxt
                if m_was != PF:
                    label[m] = PF
                    q = parent[m]
                    if q >= 0:
                        deg_pt[q] -= 1
                        if m_was == CF:
                            deg_cf[q] -= 1
                        if label[q] != PF:
                            fenwick_add(fen, q, np.int64(-1))
                            w -= 1
        if w <= 0 and scal[S_EXTINCT] < 0:
            scal[S_EXTINCT] = clock

    scal[S_N] = n
    scal[S_CLOCK] = clock
    scal[S_WEIGHT] = w
    scal[S_FIRST_CF] = first_cf
    return scal[S_EXTINCT]


# ---------------------------------------------------------------------------
# structural passes used by decomposition / potentials / metrics
# ---------------------------------------------------------------------------

def tree_structure(parent, label, deg_pt, n):
    """Single-trajectory structural decomposition.

    Returns, per node (valid for indices < n):
      is_true      1 iff every node on the root path (inclusive) is CT
      depth        edges from the tree root
      blk_root     minimal-False-node block root, -1 if not a False PT node
      blk_depth    edges from blk_root within the block
      blk_inner    number of children inside the same block
      comp_root    PT-component root (False PT subgraph), -1 otherwise
      comp_depth   edges from comp_root within the component
      top_false    topmost minimal-False ancestor owning this node's
                   subtree position, -1 outside any False subtree
      has_uni_desc 1 iff some strict descendant is PT with deg_pt == 1

    Relies on ids being birth-ordered (parent[i] < i).
    """
    is_true = np.zeros(n, dtype=np.int8)
    depth = np.zeros(n, dtype=np.int64)
    blk_root = np.full(n, -1, dtype=np.int64)
    blk_depth = np.zeros(n, dtype=np.int64)
    blk_inner = np.zeros(n, dtype=np.int64)
    comp_root = np.full(n, -1, dtype=np.int64)
    comp_depth = np.zeros(n, dtype=np.int64)
    top_false = np.full(n, -1, dtype=np.int64)
    has_uni_desc = np.zeros(n, dtype=np.int8)

    for i in range(n):
        par = parent[i]
        if par < 0:
            depth[i] = 0
            is_true[i] = 1 if label[i] == CT else 0
        else:
            depth[i] = depth[par] + 1
            is_true[i] = 1 if (label[i] == CT and is_true[par] == 1) else 0

        pt = label[i] != PF
        false_pt = pt and is_true[i] == 0

        # subtree ownership by the topmost minimal False node
        if par >= 0 and top_false[par] >= 0:
            top_false[i] = top_false[par]

        if false_pt:
            # minimal False: PT and (CF or parent is PF)
            minimal = label[i] == CF or par < 0 or label[par] == PF
            if minimal:
                blk_root[i] = i
                blk_depth[i] = 0
                if top_false[i] < 0:
                    top_false[i] = i
            else:
                # parent is a False PT node; membership continues only
                # through CT-labelled nodes below the block root
                if label[i] == CT and blk_root[par] >= 0:
                    blk_root[i] = blk_root[par]
                    blk_depth[i] = blk_depth[par] + 1
            # PT components ignore the CF boundaries
            if par >= 0 and label[par] != PF and is_true[par] == 0:
                comp_root[i] = comp_root[par]
                comp_depth[i] = comp_depth[par] + 1
            else:
                comp_root[i] = i
                comp_depth[i] = 0

    for i in range(n):
        par = parent[i]
        if par >= 0 and blk_root[i] >= 0 and blk_root[i] == blk_root[par]:
            blk_inner[par] += 1

    for i in range(n - 1, 0, -1):
        par = parent[i]
        uni = 1 if (label[i] != PF and deg_pt[i] == 1) else 0
        if uni == 1 or has_uni_desc[i] == 1:
            has_uni_desc[par] = 1

    return (is_true, depth, blk_root, blk_depth, blk_inner,
            comp_root, comp_depth, top_false, has_uni_desc)


def subtree_mask(parent, n, u):
    """Boolean (int8) mask of the subtree rooted at u."""
    mask = np.zeros(n, dtype=np.int8)
    mask[u] = 1
    for i in range(u + 1, n):
        par = parent[i]
        if par >= 0 and mask[par] == 1:
            mask[i] = 1
    return mask


def urn_draws(rng, t0, t):
    """Growth urn: start with t0-1 black balls and 1 white, draw a ball
    proportionally and return it with a duplicate, t times. Returns the
    number of white balls added."""
    total = t0
    white = np.int64(1)
    added = np.int64(0)
    for _ in range(t):
        r = next_u64(rng) % np.uint64(total)
        if np.int64(r) < white:
            white += 1
            added += 1
        total += 1
    return added


# ---------------------------------------------------------------------------
# path selection
# ---------------------------------------------------------------------------

_PUBLIC = [
    "mix64", "next_u64", "next_unit",
    "fenwick_add", "fenwick_prefix", "fenwick_select", "fenwick_build",
    "advance", "tree_structure", "subtree_mask", "urn_draws",
]


def _wrap_errstate(fn):
    @functools.wraps(fn)
    def wrapped(*args, **kwargs):
        with np.errstate(over="ignore"):
            return fn(*args, **kwargs)
    return wrapped


if NUMBA_ENABLED:
    from numba import njit

    mix64 = njit(cache=True)(mix64)
    next_u64 = njit(cache=True)(next_u64)
    next_unit = njit(cache=True)(next_unit)
    fenwick_add = njit(cache=True)(fenwick_add)
    fenwick_prefix = njit(cache=True)(fenwick_prefix)
    fenwick_select = njit(cache=True)(fenwick_select)
    fenwick_build = njit(cache=True)(fenwick_build)
    advance = njit(cache=True, nogil=True)(advance)
    tree_structure = njit(cache=True)(tree_structure)
    subtree_mask = njit(cache=True)(subtree_mask)
    urn_draws = njit(cache=True, nogil=True)(urn_draws)
else:
    for _name in _PUBLIC:
        globals()[_name] = _wrap_errstate(globals()[_name])
