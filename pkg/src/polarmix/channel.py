"""Binary-input memoryless symmetric (BMS) channels.

A channel is stored as two arrays ``w0[y] = W(y|0)`` and ``w1[y] = W(y|1)``
over a finite output alphabet, kept in canonical order (posterior
``p(0|y)`` ascending, then symbol mass).  Every BMS channel is also a
mixture of binary symmetric channels; :func:`to_mixture` gives that view,
and most numerical work (entropy, binning, the 2x2 transform) runs on it.

The output pairing ``pi`` may have fixed points: a symbol with
``w0 == w1`` is its own mirror (an erasure).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import BudgetError, ChannelError, SymmetryError

#: Default cap on elementary accumulations for exhaustive enumeration.
ENUMERATION_BUDGET = 2**30

_NORM_TOL = 1e-12
_SYM_P_TOL = 1e-9
_SYM_MASS_TOL = 1e-9
_GROUP_RTOL = 1e-13
_CHUNK = 2**21


def binary_entropy(p):
    """h(p) in bits, elementwise; ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    q = np.minimum(p, 1.0 - p)
    tiny = (q > 0) & (q < 1e-12)
    mid = q >= 1e-12
    # h(q) = q log(1/q) + q/ln2 + O(q^2) for tiny q
    out[tiny] = q[tiny] * (-np.log2(q[tiny]) + 1.0 / np.log(2.0))
    qm = q[mid]
    out[mid] = -qm * np.log2(qm) - (1.0 - qm) * np.log2(1.0 - qm)
    return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class BscMixture:
    """A BMS channel written as ``sum_i q_i * BSC(p_i)`` with ``p_i`` increasing."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        p = np.asarray(self.p, dtype=float)
        if q.shape != p.shape or q.ndim != 1:
            raise ChannelError("mixture weights and crossovers must be 1-d and aligned")
        if np.any(q <= 0):
            raise ChannelError("mixture weights must be positive")
        if np.any((p < 0) | (p > 0.5)):
            raise ChannelError("crossover probabilities must lie in [0, 1/2]")
        if np.any(np.diff(p) <= 0):
            raise ChannelError("crossover probabilities must be strictly increasing")
        if abs(q.sum() - 1.0) > _NORM_TOL * max(1.0, np.sqrt(q.size)):
            raise ChannelError(f"mixture weights sum to {q.sum()!r}, not 1")
        q.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def components(self) -> list[tuple[float, float]]:
        return list(zip(self.q.tolist(), self.p.tolist()))

    def __len__(self):
        return self.q.size


class BmsChannel:
    """Finite-output BMS channel with transition table ``(w0, w1)`` per symbol.

    Zero-probability symbols are dropped and the rest sorted canonically.
    Construction validates normalization and the symmetry pairing.
    """

    __slots__ = ("w0", "w1")

    def __init__(self, w0, w1, *, validate: bool = True):
        w0 = np.asarray(w0, dtype=float).ravel()
        w1 = np.asarray(w1, dtype=float).ravel()
        if w0.shape != w1.shape:
            raise ChannelError("w0 and w1 must have the same length")
        if np.any(~np.isfinite(w0)) or np.any(~np.isfinite(w1)):
            raise ChannelError("transition probabilities must be finite")
        if np.any(w0 < 0) or np.any(w1 < 0):
            raise ChannelError("transition probabilities must be non-negative")
        keep = (w0 + w1) > 0
        w0, w1 = w0[keep], w1[keep]
        m = w0 + w1
        order = np.lexsort((m, w0 / m))
        w0 = np.ascontiguousarray(w0[order])
        w1 = np.ascontiguousarray(w1[order])
        if validate:
            _check_channel(w0, w1)
        w0.setflags(write=False)
        w1.setflags(write=False)
        object.__setattr__(self, "w0", w0)
        object.__setattr__(self, "w1", w1)

    def __setattr__(self, name, value):
        raise AttributeError("BmsChannel is immutable")

    def __len__(self):
        return self.w0.size

    def __repr__(self):
        return f"BmsChannel(outputs={len(self)}, H={entropy(self):.6g})"

    @property
    def pairs(self) -> list[tuple[float, float]]:
        return list(zip(self.w0.tolist(), self.w1.tolist()))

    @classmethod
    def from_pairs(cls, pairs: Sequence[Sequence[float]]) -> "BmsChannel":
        arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1])

    @classmethod
    def from_mixture(cls, mixture: "BscMixture | Sequence[Sequence[float]]") -> "BmsChannel":
        if not isinstance(mixture, BscMixture):
            arr = np.asarray(mixture, dtype=float).reshape(-1, 2)
            mixture = BscMixture(arr[:, 0], arr[:, 1])
        w0, w1 = _expand_mixture(mixture.q, mixture.p)
        return cls(w0, w1)

    def equivalent(self, other: "BmsChannel", tol: float = 1e-12) -> bool:
        """True when both channels have the same BSC-mixture form within ``tol``."""
        a, b = to_mixture(self), to_mixture(other)
        return (len(a) == len(b) and np.allclose(a.q, b.q, rtol=0, atol=tol)
                and np.allclose(a.p, b.p, rtol=0, atol=tol))


def _expand_mixture(q, p):
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    erasure = p == 0.5
    qs, ps = q[~erasure], p[~erasure]
    w0 = np.concatenate([qs * (1 - ps), qs * ps, q[erasure]])
    w1 = np.concatenate([qs * ps, qs * (1 - ps), q[erasure]])
    return w0, w1


def _check_channel(w0, w1):
    n = w0.size
    if n == 0:
        raise ChannelError("channel has no output symbols")
    tol = _NORM_TOL * max(1.0, np.sqrt(n))
    for name, w in (("W(.|0)", w0), ("W(.|1)", w1)):
        s = w.sum()
        if abs(s - 1.0) > tol:
            raise ChannelError(f"{name} sums to {s!r}, not 1")
    # Symmetric iff the mass measure over the posterior p(0|y) is invariant
    # under p -> 1 - p; compared as CDFs with a small posterior tolerance.
    m = w0 + w1
    p0 = w0 / m
    ps = p0  # already sorted ascending
    cf = np.cumsum(m)
    qs = 1.0 - ps[::-1]
    cg = np.cumsum(m[::-1])

    def cdf(points, cums, s):
        idx = np.searchsorted(points, s, side="right") - 1
        return np.where(idx >= 0, cums[np.maximum(idx, 0)], 0.0)

    grid = np.concatenate([ps, qs])
    # Levy-type comparison: the sup of G(x) - F(x + tol) sits at an atom
    f_at, f_hi = cdf(ps, cf, grid), cdf(ps, cf, grid + _SYM_P_TOL)
    g_at, g_hi = cdf(qs, cg, grid), cdf(qs, cg, grid + _SYM_P_TOL)
    if np.any(g_at > f_hi + _SYM_MASS_TOL) or np.any(f_at > g_hi + _SYM_MASS_TOL):
        raise SymmetryError("channel output table admits no symmetric pairing")


# --- constructors ---------------------------------------------------------

def bsc(p: float) -> BmsChannel:
    """Binary symmetric channel with crossover probability ``p`` in [0, 1/2]."""
    if not 0.0 <= p <= 0.5:
        raise ChannelError(f"BSC crossover must lie in [0, 1/2], got {p}")
    return BmsChannel([1.0 - p, p], [p, 1.0 - p])


def bec(eps: float) -> BmsChannel:
    """Binary erasure channel; the erasure is the single symbol with w0 == w1."""
    if not 0.0 <= eps <= 1.0:
        raise ChannelError(f"erasure probability must lie in [0, 1], got {eps}")
    return BmsChannel([1.0 - eps, eps, 0.0], [0.0, eps, 1.0 - eps])


def noiseless() -> BmsChannel:
    return bsc(0.0)


# --- measurements ---------------------------------------------------------

def _mixture_arrays(w0, w1):
    """Per-symbol (weight, crossover) with weight = P(y) = (w0 + w1) / 2."""
    m = w0 + w1
    return 0.5 * m, np.minimum(w0, w1) / m


def entropy(W: BmsChannel) -> float:
    """H(X|Y) in bits for uniform input."""
    q, p = _mixture_arrays(W.w0, W.w1)
    # clipped: masses may sum to 1 + O(eps)
    return min(1.0, float(np.dot(q, binary_entropy(p))))


def bhattacharyya(W: BmsChannel) -> float:
    """Z(W) = sum_y sqrt(W(y|0) W(y|1))."""
    return float(np.sqrt(W.w0 * W.w1).sum())


def capacity(W: BmsChannel) -> float:
    return 1.0 - entropy(W)


def to_mixture(W: BmsChannel) -> BscMixture:
    """BSC-mixture form; symbols sharing a crossover are grouped."""
    q, p = _mixture_arrays(W.w0, W.w1)
    return _group_mixture(q, p)


def _group_mixture(q, p) -> BscMixture:
    order = np.argsort(p, kind="stable")
    q, p = q[order], p[order]
    keep = q > 0
    q, p = q[keep], p[keep]
    if not q.size:
        return BscMixture(q, p)
    # crossovers within relative _GROUP_RTOL are one component (rounding
    # noise); relative so that tiny crossovers, which dominate Z, stay apart
    start = np.flatnonzero(np.concatenate([[True], np.diff(p) > _GROUP_RTOL * p[1:]]))
    return BscMixture(np.add.reduceat(q, start), p[start])


# --- binning --------------------------------------------------------------

def _bin_index(p, Q):
    b = np.ceil(Q * p).astype(np.int64)
    b[b == 0] = 1
    return b


class _BinAccumulator:
    """Streaming degraded binning of (weight, crossover) pairs into Q bins.

    The low-posterior member of each mirror pair lands in bin ceil(Q p)
    (bin 0 merged into 1) and its mirror in bin Q + 1 - ceil(Q p), so the
    binned channel is exactly symmetric.
    """

    def __init__(self, Q: int):
        self.Q = Q
        self.a = np.zeros(Q + 2)  # sum q p      (bin index 1..Q)
        self.c = np.zeros(Q + 2)  # sum q (1-p)
        self.H = 0.0
        self.Z = 0.0

    def add(self, q, p):
        if q.size == 0:
            return
        b = _bin_index(p, self.Q)
        n = self.Q + 2
        self.a += np.bincount(b, weights=q * p, minlength=n)
        self.c += np.bincount(b, weights=q * (1.0 - p), minlength=n)
        self.H += float(np.dot(q, binary_entropy(p)))
        self.Z += float(np.dot(q, 2.0 * np.sqrt(p * (1.0 - p))))

    def add_symbols(self, w0, w1):
        m = w0 + w1
        keep = m > 0
        w0, w1, m = w0[keep], w1[keep], m[keep]
        self.add(0.5 * m, np.minimum(w0, w1) / m)

    def channel(self) -> BmsChannel:
        Q = self.Q
        w0 = np.zeros(Q + 2)
        w1 = np.zeros(Q + 2)
        idx = np.arange(Q + 2)
        mirror = np.clip(Q + 1 - idx, 0, Q + 1)
        w0 += self.a
        w1 += self.c
        np.add.at(w0, mirror, self.c)
        np.add.at(w1, mirror, self.a)
        return BmsChannel(w0[1:Q + 1], w1[1:Q + 1])


def degrade_bin(W: BmsChannel, Q: int) -> BmsChannel:
    """Degraded binning by posterior into at most ``Q`` outputs.

    Entropy grows by at most ``2 log2(Q) / Q``.
    """
    if int(Q) != Q or Q < 2:
        raise ChannelError(f"bin count Q must be an integer >= 2, got {Q}")
    acc = _BinAccumulator(int(Q))
    acc.add_symbols(W.w0, W.w1)
    return acc.channel()


def upgrade_bin(W: BmsChannel, m: int) -> BmsChannel:
    """Upgraded channel with at most ``m`` BSC components.

    Each crossover is rounded down to the grid ``(j-1)/(2m)``, j = 1..m, and
    components on the same grid point are merged.
    """
    if int(m) != m or m < 1:
        raise ChannelError(f"grid size m must be a positive integer, got {m}")
    mix = to_mixture(W)
    j = np.minimum(np.floor(2 * m * mix.p).astype(np.int64), m - 1)
    q = np.bincount(j, weights=mix.q, minlength=m)
    theta = np.arange(m) / (2.0 * m)
    keep = q > 0
    w0, w1 = _expand_mixture(q[keep], theta[keep])
    return BmsChannel(w0, w1)


# --- polarization transforms ---------------------------------------------

def _arikan_pair_arrays(q, p):
    """(weights, crossovers) of W- and W+ for a mixture given as arrays."""
    qa, qb = np.meshgrid(q, q, indexing="ij")
    pa, pb = np.meshgrid(p, p, indexing="ij")
    qq = (qa * qb).ravel()
    pa, pb = pa.ravel(), pb.ravel()
    x = pa * (1 - pb)
    y = pb * (1 - pa)
    s = x + y
    minus = (qq, s)
    r = 1.0 - s
    agree = r > 0
    disagree = s > 0
    plus_q = np.concatenate([qq[agree] * r[agree], qq[disagree] * s[disagree]])
    plus_p = np.concatenate([
        (pa * pb)[agree] / r[agree],
        np.minimum(x, y)[disagree] / s[disagree],
    ])
    return minus, (plus_q, plus_p)


def _mixture_channel(q, p) -> BmsChannel:
    mix = _group_mixture(np.asarray(q), np.minimum(np.asarray(p), 0.5))
    w0, w1 = _expand_mixture(mix.q, mix.p)
    return BmsChannel(w0, w1)


def arikan_pair(W: BmsChannel) -> tuple[BmsChannel, BmsChannel]:
    """Bit-channels of the 2x2 kernel [[1,0],[1,1]]: ``(W-, W+)``."""
    mix = to_mixture(W)
    (qm, pm), (qp, pp) = _arikan_pair_arrays(mix.q, mix.p)
    return _mixture_channel(qm, pm), _mixture_channel(qp, pp)


def _as_bits(K) -> np.ndarray:
    rows = getattr(K, "rows", K)
    return np.asarray(rows, dtype=np.uint8) % 2


def enumeration_cost(n_outputs: int, ell: int) -> int:
    return n_outputs**ell * 2**ell


def _likelihood_chunks(W: BmsChannel, codewords: np.ndarray) -> Iterator[np.ndarray]:
    """Yield blocks of W^ell(y | x) with rows = codewords, columns = y in
    lexicographic order (first coordinate most significant)."""
    ncw, ell = codewords.shape
    ny = len(W)
    table = np.stack([W.w0, W.w1])  # table[x, y]
    # fix the first `lead` coordinates per block
    lead = 0
    while lead < ell and ncw * ny ** (ell - lead) > _CHUNK:
        lead += 1
    tail = np.ones((ncw, 1))
    for j in range(lead, ell):
        tail = (tail[:, :, None] * table[codewords[:, j]][:, None, :]).reshape(ncw, -1)
    for prefix in itertools.product(range(ny), repeat=lead):
        scale = np.ones(ncw)
        for j, y in enumerate(prefix):
            scale = scale * table[codewords[:, j], y]
        yield tail * scale[:, None]


def _codewords(K: np.ndarray) -> np.ndarray:
    """All u K over GF(2), u in lexicographic order with u_1 most significant."""
    ell = K.shape[0]
    u = (np.arange(2**ell)[:, None] >> np.arange(ell - 1, -1, -1)) & 1
    return (u @ K.astype(np.int64)) % 2


def bit_channels(W: BmsChannel, K, bin_Q: int | None = None,
                 budget: int = ENUMERATION_BUDGET) -> list[BmsChannel]:
    """Arikan bit-channels ``U_i -> (Y^ell, U_<i)`` of ``W`` under kernel ``K``.

    The output of channel ``i`` is the pair ``(y, u_<i)``; its transition
    probability is ``2^-(ell-1) * sum_v W^ell(y | (u_<i, u_i, v) K)``.  With
    ``bin_Q`` the outputs are binned on the fly and never materialized.
    """
    channels, _ = _bit_channels(W, K, bin_Q, budget)
    return channels


def bit_channel_entropies(W: BmsChannel, K, budget: int = ENUMERATION_BUDGET) -> np.ndarray:
    """Exact entropies of all bit-channels, streamed without storing outputs."""
    _, H = _bit_channels(W, K, 2, budget)
    return H


def _bit_channels(W, K, bin_Q, budget):
    Kb = _as_bits(K)
    ell = Kb.shape[0]
    if Kb.shape != (ell, ell):
        raise ChannelError("kernel must be square")
    from .kernel import is_invertible  # kernel imports this module
    if not is_invertible(Kb):
        raise ChannelError("kernel must be invertible over GF(2)")
    cost = enumeration_cost(len(W), ell)
    if cost > budget:
        raise BudgetError(
            f"enumerating {len(W)}^{ell} outputs x 2^{ell} inputs = {cost} exceeds "
            f"budget {budget}; bin the channel first or lower ell")
    cw = _codewords(Kb)
    scale = 2.0 ** -(ell - 1)
    accs = [_BinAccumulator(int(bin_Q)) for _ in range(ell)] if bin_Q else None
    raw0 = [[] for _ in range(ell)]
    raw1 = [[] for _ in range(ell)]
    for block in _likelihood_chunks(W, cw):
        ny = block.shape[1]
        for i in range(1, ell + 1):
            s = block.reshape(2 ** (i - 1), 2, 2 ** (ell - i), ny).sum(axis=2) * scale
            w0 = s[:, 0, :].ravel()
            w1 = s[:, 1, :].ravel()
            if accs is not None:
                accs[i - 1].add_symbols(w0, w1)
            else:
                raw0[i - 1].append(w0)
                raw1[i - 1].append(w1)
    if accs is not None:
        return [a.channel() for a in accs], np.clip([a.H for a in accs], 0.0, 1.0)
    chans = [BmsChannel(np.concatenate(a), np.concatenate(b)) for a, b in zip(raw0, raw1)]
    return chans, np.array([entropy(c) for c in chans])


# --- serialization --------------------------------------------------------

def channel_to_dict(W: BmsChannel) -> dict:
    mix = to_mixture(W)
    return {"mixture": [[float(q), float(p)] for q, p in mix.components]}


def channel_from_dict(doc: dict) -> BmsChannel:
    if "mixture" in doc:
        return BmsChannel.from_mixture(doc["mixture"])
    if "symbols" in doc:
        return BmsChannel.from_pairs(doc["symbols"])
    raise ChannelError("channel document needs a 'symbols' or 'mixture' key")


def dumps(W: BmsChannel) -> str:
    return json.dumps(channel_to_dict(W))


def loads(text: str) -> BmsChannel:
    return channel_from_dict(json.loads(text))
