"""Multi-kernel construction tree, layered transform and good-index selection.

Level ``j`` of the tree holds ``ell**j`` nodes in ``tau`` order: node ``r``
has path ``tau(j, r + 1)`` and children ``r * ell + c`` for ``c < ell``.
Each node carries the binned channel parameters and, above the leaves, the
kernel chosen for it.
"""

from __future__ import annotations

import dataclasses
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import channel as ch
from .errors import BudgetError, PlanError, SearchExhaustedError
from .kernel import (Kernel, SearchPolicy, arikan_kernel, kernel_search,
                     log2_exact)
from .rng import derive_seed


# --- index maps -----------------------------------------------------------

def tau(j: int, i: int, ell: int) -> tuple[int, ...]:
    """Digits of ``i - 1`` in base ``ell``, most significant first, each plus one."""
    if not 1 <= i <= ell**j:
        raise IndexError(f"index {i} outside [1, {ell}^{j}]")
    digits = []
    x = i - 1
    for _ in range(j):
        x, d = divmod(x, ell)
        digits.append(d + 1)
    return tuple(reversed(digits))


def tau_inv(digits: Sequence[int], ell: int) -> int:
    i = 0
    for d in digits:
        if not 1 <= d <= ell:
            raise IndexError(f"digit {d} outside [1, {ell}]")
        i = i * ell + (d - 1)
    return i + 1


def pi_perm(j: int, t: int, ell: int, i: int) -> int:
    """Keep the first ``t-j-1`` digits of ``i`` and rotate the last ``j+1``
    so that the final digit moves to the front of that group."""
    if not 1 <= j <= t - 1:
        raise IndexError(f"layer {j} outside [1, {t - 1}]")
    d = tau(t, i, ell)
    head, tail = d[:t - j - 1], d[t - j - 1:]
    return tau_inv(head + (tail[-1],) + tail[:-1], ell)


def pi_table(j: int, t: int, ell: int) -> np.ndarray:
    """0-based table ``P`` with ``P[k] = pi(k + 1) - 1`` (vectorized)."""
    N = ell**t
    k = np.arange(N)
    low = ell ** (j + 1)
    head, tail = np.divmod(k, low)
    rest, last = np.divmod(tail, ell)
    return head * low + last * ell**j + rest


# --- plan -----------------------------------------------------------------

@dataclass(frozen=True)
class SelectorParams:
    """Good-index selection rule.

    ``entropy_threshold`` keeps leaves with binned entropy at most ``theta``
    (default ``7 ell log2(N) / N^2``), or the ``dimension`` most reliable
    leaves when a dimension is given.  ``staged`` uses checkpointed
    Bhattacharyya values plus branch counts read from the index digits.
    """

    strategy: str = "entropy_threshold"
    theta: float | None = None
    dimension: int | None = None
    stage_length: int | None = None
    z_exponent: float = 2.0
    beta: float = 1.0 / 20
    alpha_sel: float = 1.0 / 20

    def __post_init__(self):
        if self.strategy not in ("entropy_threshold", "staged"):
            raise ValueError(f"unknown selector strategy {self.strategy!r}")
        if self.theta is not None and not 0 <= self.theta <= 1:
            raise ValueError("theta must lie in [0, 1]")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if self.dimension is not None and self.dimension < 0:
            raise ValueError("dimension must be non-negative")
        if self.stage_length is not None and self.stage_length < 1:
            raise ValueError("stage_length must be >= 1")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class Node:
    path: tuple[int, ...]
    kernel: Kernel | None
    H_bin: float
    Z_bin: float


@dataclass(frozen=True, eq=False)
class ConstructionPlan:
    """Built code: kernel tree, leaf parameters and the good index set.

    ``nodes[j][r]`` is the node at level ``j`` with ``tau`` index ``r + 1``.
    ``good`` lists 0-based message positions in increasing order.
    """

    ell: int
    t: int
    Q: int
    Delta: float
    nodes: tuple[tuple[Node, ...], ...]
    good: np.ndarray
    selector: SelectorParams
    seed: int
    policy: SearchPolicy

    @property
    def N(self) -> int:
        return self.ell**self.t

    @property
    def K(self) -> int:
        return int(self.good.size)

    @property
    def rate(self) -> float:
        return self.K / self.N

    @property
    def good_mask(self) -> np.ndarray:
        m = np.zeros(self.N, dtype=bool)
        m[self.good] = True
        return m

    def leaf_entropies(self) -> np.ndarray:
        return np.array([n.H_bin for n in self.nodes[self.t]])

    def level_values(self, j: int, field: str = "H_bin") -> np.ndarray:
        return np.array([getattr(n, field) for n in self.nodes[j]])

    def kernels(self, j: int) -> np.ndarray:
        """Stacked kernels of level ``j`` in ``tau`` order, shape ``(ell**j, ell, ell)``."""
        return np.stack([n.kernel.rows for n in self.nodes[j]]).astype(np.int64)

    def perm_tables(self) -> dict[int, np.ndarray]:
        return {j: pi_table(j, self.t, self.ell) for j in range(1, self.t)}

    def with_good(self, good) -> "ConstructionPlan":
        good = np.unique(np.asarray(good, dtype=np.int64))
        if good.size and (good[0] < 0 or good[-1] >= self.N):
            raise PlanError("good indices out of range")
        return dataclasses.replace(self, good=good)


def default_Q(N: int) -> int:
    return int(min(N**3, 4096))


def default_Delta(ell: int, N: int) -> float:
    return 6 * ell * math.log2(N) / N**2


def default_theta(ell: int, N: int) -> float:
    return 7 * ell * math.log2(N) / N**2


def build_plan(W: ch.BmsChannel, ell: int, t: int, Q: int | None = None,
               Delta: float | None = None, policy: SearchPolicy | None = None,
               selector: SelectorParams | None = None, seed: int = 0,
               threads: int = 1) -> ConstructionPlan:
    """Construct the kernel tree for ``W`` and select good indices.

    Every node channel is binned to ``Q`` outputs before its kernel is
    searched; children come out of the search already binned.

    Parameters
    ----------
    W : BmsChannel
    ell : int
        Kernel size (power of 2).
    t : int
        Depth; block length is ``ell**t``.
    Q : int, optional
        Bin count, default ``min(N^3, 4096)``.
    Delta : float, optional
        Upper suction slack, default ``6 ell log2(N) / N^2``.
    policy : SearchPolicy, optional
        Kernel search policy; its seed is replaced per node.
    selector : SelectorParams, optional
    seed : int
        Master seed for per-node search seeds.
    threads : int
        Worker threads per tree level.
    """
    log2_exact(ell)
    if t < 1:
        raise ValueError("depth t must be >= 1")
    N = ell**t
    Q = default_Q(N) if Q is None else int(Q)
    if Q < 2:
        raise ValueError("Q must be >= 2")
    Delta = default_Delta(ell, N) if Delta is None else float(Delta)
    policy = policy or SearchPolicy()
    selector = selector or SelectorParams()

    root = ch.degrade_bin(W, Q)
    chans = [root]
    levels: list[list[Node]] = []
    for j in range(t):
        paths = [tau(j, r + 1, ell) for r in range(ell**j)]

        def work(r):
            path = paths[r]
            node_policy = dataclasses.replace(policy, seed=derive_seed(seed, j, *path))
            try:
                return kernel_search(chans[r], Delta, ell, node_policy, bin_Q=Q)
            except (BudgetError, SearchExhaustedError) as exc:
                raise type(exc)(f"node {list(path)}: {exc}") from exc

        if threads > 1 and len(paths) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(work, range(len(paths))))
        else:
            results = [work(r) for r in range(len(paths))]
        levels.append([Node(p, K, ch.entropy(c), ch.bhattacharyya(c))
                       for p, c, (K, _) in zip(paths, chans, results)])
        chans = [c for _, rep in results for c in rep.channels]
    leaf_paths = [tau(t, r + 1, ell) for r in range(N)]
    levels.append([Node(p, None, ch.entropy(c), ch.bhattacharyya(c))
                   for p, c in zip(leaf_paths, chans)])

    plan = ConstructionPlan(ell, t, Q, Delta, tuple(tuple(lv) for lv in levels),
                            np.zeros(0, dtype=np.int64), selector, int(seed), policy)
    return plan.with_good(select_good_indices(plan, selector))


# --- selection ------------------------------------------------------------

def _is_tensor_kernel(K: Kernel) -> bool:
    """Arikan tensor kernel up to a column permutation."""
    try:
        A = arikan_kernel(log2_exact(K.ell)).rows
    except ValueError:
        return False
    cols = sorted(map(bytes, K.rows.T))
    return cols == sorted(map(bytes, A.T))


def _good_branch_counts(plan: ConstructionPlan) -> np.ndarray:
    """``G[i, j]``: good 2x2 branches taken by leaf ``i`` at level ``j``, or -1
    where the kernel on the path is not a tensor kernel."""
    ell, t, N = plan.ell, plan.t, plan.N
    G = np.empty((N, t), dtype=np.int64)
    idx = np.arange(N)
    for j in range(t):
        tensor = np.array([_is_tensor_kernel(n.kernel) for n in plan.nodes[j]])
        anc = idx // ell ** (t - j)
        digit = (idx // ell ** (t - j - 1)) % ell
        pop = np.array([bin(d).count("1") for d in range(ell)])[digit]
        G[:, j] = np.where(tensor[anc], pop, -1)
    return G


def _branch_sum(G: np.ndarray, a: int, b: int) -> np.ndarray:
    """Good branches over levels ``a..b-1``; -inf if any level there is unusable."""
    seg = G[:, a:b]
    out = seg.sum(axis=1).astype(float)
    out[np.any(seg < 0, axis=1)] = -np.inf
    return out


def _ancestor_z(plan: ConstructionPlan, m: int) -> np.ndarray:
    z = plan.level_values(m, "Z_bin")
    return z[np.arange(plan.N) // plan.ell ** (plan.t - m)]


def _stage(n: int) -> int:
    return max(1, int(round(math.sqrt(n))))


def _inner_stage(plan, G, n, sel) -> np.ndarray:
    """Leaves whose level-``n`` ancestor passed some checkpoint ``m < n``."""
    s = log2_exact(plan.ell)
    L = _stage(n)
    hit = np.zeros(plan.N, dtype=bool)
    for m in range(L, n - L + 1, L):
        small = _ancestor_z(plan, m) < 2.0 ** (-sel.z_exponent * s * m)
        hit |= small & (_branch_sum(G, m, m + L) > sel.beta * s * L)
    return hit


def select_good_indices(plan: ConstructionPlan, selector: SelectorParams) -> np.ndarray:
    """0-based good positions for ``plan`` under ``selector`` (sorted)."""
    H = plan.leaf_entropies()
    if selector.strategy == "entropy_threshold":
        if selector.dimension is not None:
            if selector.dimension > plan.N:
                raise ValueError("dimension exceeds block length")
            order = np.argsort(H, kind="stable")
            return np.sort(order[:selector.dimension])
        theta = default_theta(plan.ell, plan.N) if selector.theta is None else selector.theta
        return np.flatnonzero(H <= theta)

    s = log2_exact(plan.ell)
    t = plan.t
    G = _good_branch_counts(plan)
    L = selector.stage_length or _stage(t)
    chosen = np.zeros(plan.N, dtype=bool)
    for n in range(L, t - L + 1, L):
        chosen |= _inner_stage(plan, G, n, selector) & (
            _branch_sum(G, n, t) > selector.alpha_sel * s * t)
    return np.flatnonzero(chosen)


def potential_trace(plan: ConstructionPlan, alpha: float) -> np.ndarray:
    """Per-level mean of ``(H (1 - H))**alpha`` over binned node entropies."""
    if not 0 < alpha < 0.5:
        raise ValueError("alpha must lie in (0, 1/2)")
    out = []
    for j in range(plan.t + 1):
        H = np.clip(plan.level_values(j), 0.0, 1.0)
        out.append(float(np.mean((H * (1 - H)) ** alpha)))
    return np.array(out)


# --- dense oracle ---------------------------------------------------------

def dense_matrix(plan: ConstructionPlan) -> np.ndarray:
    """Multiply out the layers into the ``N x N`` generator (small N only)."""
    if plan.N > 4096:
        raise BudgetError("dense generator is only built for N <= 4096")
    from .codec import apply_transform
    return apply_transform(plan, np.eye(plan.N, dtype=np.uint8))


# --- serialization --------------------------------------------------------

def _hex_bitmap(good: np.ndarray) -> str:
    v = 0
    for k in good.tolist():
        v |= 1 << k
    return format(v, "x")


def _from_bitmap(text: str, N: int) -> np.ndarray:
    v = int(text, 16) if text else 0
    if v >> N:
        raise PlanError("good_set bitmap has bits beyond N")
    return np.array([k for k in range(N) if v >> k & 1], dtype=np.int64)


def plan_to_dict(plan: ConstructionPlan) -> dict:
    nodes = []
    for level in plan.nodes:
        for n in level:
            nodes.append({
                "path": list(n.path),
                "kernel": n.kernel.to_strings() if n.kernel is not None else None,
                "H_bin": n.H_bin,
                "Z_bin": n.Z_bin,
            })
    return {
        "ell": plan.ell, "t": plan.t, "Q": plan.Q, "Delta": plan.Delta,
        "nodes": nodes,
        "good_set": _hex_bitmap(plan.good),
        "selector": plan.selector.to_dict(),
        "policy": dataclasses.asdict(plan.policy),
        "seed": plan.seed,
    }


def plan_from_dict(doc: dict) -> ConstructionPlan:
    try:
        ell, t = int(doc["ell"]), int(doc["t"])
        log2_exact(ell)
        flat = doc["nodes"]
        levels, k = [], 0
        for j in range(t + 1):
            level = []
            for r in range(ell**j):
                d = flat[k]
                k += 1
                path = tuple(int(x) for x in d["path"])
                if path != tau(j, r + 1, ell):
                    raise PlanError(f"node {k - 1} has path {list(path)}, expected "
                                    f"{list(tau(j, r + 1, ell))}")
                K = Kernel(d["kernel"]) if d.get("kernel") is not None else None
                if (K is None) != (j == t):
                    raise PlanError(f"node {list(path)}: kernel presence mismatch")
                level.append(Node(path, K, float(d["H_bin"]), float(d["Z_bin"])))
            levels.append(tuple(level))
        if k != len(flat):
            raise PlanError("plan has extra nodes")
        selector = SelectorParams(**doc.get("selector", {}))
        policy = SearchPolicy(**doc.get("policy", {}))
        good = _from_bitmap(doc["good_set"], ell**t)
        return ConstructionPlan(ell, t, int(doc["Q"]), float(doc.get("Delta", 0.0)),
                                tuple(levels), good, selector, int(doc.get("seed", 0)), policy)
    except (KeyError, TypeError, IndexError) as exc:
        raise PlanError(f"malformed plan document: {exc}") from exc


def dumps(plan: ConstructionPlan) -> str:
    return json.dumps(plan_to_dict(plan))


def loads(text: str) -> ConstructionPlan:
    return plan_from_dict(json.loads(text))
