"""Exact bit-decoding entropies of small random linear codes and related
Monte Carlo statistics.

For a ``k x ell`` generator ``G`` and uniform ``V`` in ``{0,1}^k`` the codeword
``V G`` is sent over ``ell`` independent uses of a BMS channel; the central
quantity is ``H(V_1 | Y)``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import channel as ch
from .channel import ENUMERATION_BUDGET, binary_entropy
from .errors import BudgetError
from .kernel import Kernel, gf2_rank, is_invertible
from .rng import derive_seed, random_bits


class GeneratorMatrix:
    """``k x ell`` binary generator matrix, ``1 <= k <= ell``."""

    __slots__ = ("rows",)

    def __init__(self, rows):
        a = np.array(rows, dtype=np.int64)
        if a.ndim != 2 or not 1 <= a.shape[0] <= a.shape[1]:
            raise ValueError(f"generator must be k x ell with 1 <= k <= ell, got {a.shape}")
        if np.any((a != 0) & (a != 1)):
            raise ValueError("generator entries must be bits")
        a = a.astype(np.uint8)
        a.setflags(write=False)
        object.__setattr__(self, "rows", a)

    def __setattr__(self, name, value):
        raise AttributeError("GeneratorMatrix is immutable")

    @property
    def k(self) -> int:
        return self.rows.shape[0]

    @property
    def ell(self) -> int:
        return self.rows.shape[1]

    def __repr__(self):
        return f"GeneratorMatrix(k={self.k}, ell={self.ell})"

    def codewords(self) -> np.ndarray:
        """All ``v G`` with ``v`` in lexicographic order (``v_1`` most significant)."""
        k = self.k
        v = (np.arange(2**k)[:, None] >> np.arange(k - 1, -1, -1)) & 1
        return (v @ self.rows.astype(np.int64)) & 1


def random_generator(k: int, ell: int, seed: int) -> GeneratorMatrix:
    return GeneratorMatrix(random_bits(seed, k * ell).reshape(k, ell))


def _merge_identical(W: ch.BmsChannel) -> ch.BmsChannel:
    pairs = np.stack([W.w0, W.w1], axis=1)
    uniq, inv = np.unique(pairs, axis=0, return_inverse=True)
    counts = np.bincount(inv.ravel(), minlength=len(uniq))
    merged = uniq * counts[:, None]
    return ch.BmsChannel(merged[:, 0], merged[:, 1], validate=False)


def bit_entropy_exact(G: GeneratorMatrix, W: ch.BmsChannel,
                      budget: int = ENUMERATION_BUDGET) -> float:
    """``H(V_1 | Y)`` by enumerating every output word and message.

    Output symbols with identical likelihood pairs are merged first; this
    leaves the conditional entropy unchanged.
    """
    G = G if isinstance(G, GeneratorMatrix) else GeneratorMatrix(G)
    Wm = _merge_identical(W)
    cost = len(Wm) ** G.ell * 2**G.k
    if cost > budget:
        raise BudgetError(f"enumeration of {len(Wm)}^{G.ell} outputs x 2^{G.k} messages "
                          f"= {cost} exceeds budget {budget}")
    cw = G.codewords()
    half = 2 ** (G.k - 1)
    total = 0.0
    for block in ch._likelihood_chunks(Wm, cw):
        py = block.sum(axis=0)
        p0 = block[:half].sum(axis=0)
        keep = py > 0
        total += float(np.dot(py[keep], binary_entropy(p0[keep] / py[keep])))
    return min(1.0, max(0.0, total / 2**G.k))


def bec_bit_entropy_rank(G: GeneratorMatrix, eps: float) -> float:
    """``H(V_1|Y)`` over BEC(eps): probability that ``e_1`` is outside the
    column span of the unerased columns of ``G``."""
    G = G if isinstance(G, GeneratorMatrix) else GeneratorMatrix(G)
    k, ell = G.k, G.ell
    e1 = np.zeros((k, 1), dtype=np.int64)
    e1[0, 0] = 1
    A = G.rows.astype(np.int64)
    total = 0.0
    for mask in itertools.product((0, 1), repeat=ell):
        S = np.flatnonzero(mask)
        GS = A[:, S]
        r = gf2_rank(GS.T) if S.size else 0
        r1 = gf2_rank(np.hstack([GS, e1]).T)
        if r1 > r:
            total += (1 - eps) ** S.size * eps ** (ell - S.size)
    return total


# --- scans ----------------------------------------------------------------

def margins(ell: int) -> dict:
    """Large-``ell`` dimension margins around ``ell (1 - H)``."""
    lg = math.log2(ell)
    r = math.sqrt(ell)
    return {"bsc": 8 * r * lg**2, "bms": 14 * r * lg**3, "below": r * lg**3}


@dataclass
class ScanRow:
    k: int
    samples: int
    mean: float
    min: float
    max: float
    stderr: float
    regime: str


@dataclass
class ConverseScan:
    """Per-``k`` statistics of ``H(V_1|Y)`` over random generators."""

    ell: int
    channel_digest: str
    seed: int
    capacity_dim: float
    rows: list[ScanRow] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["k,samples,mean,min,max"]
        for r in self.rows:
            lines.append(f"{r.k},{r.samples},{r.mean!r},{r.min!r},{r.max!r}")
        return "\n".join(lines) + "\n"

    def metadata(self) -> dict:
        return {
            "ell": self.ell,
            "channel_digest": self.channel_digest,
            "seed": self.seed,
            "capacity_dim": self.capacity_dim,
            "margins": margins(self.ell),
            "regimes": {r.k: r.regime for r in self.rows},
            "stderr": {r.k: r.stderr for r in self.rows},
        }

    def to_json(self) -> str:
        return json.dumps(self.metadata(), sort_keys=True)


def _regime(k: int, ell: int, H: float) -> str:
    """Where ``k`` sits relative to the capacity dimension and both margins.

    At desk scale the margins usually exceed ``ell``, so most ``k`` land in
    ``"inside-margins"``.
    """
    c = ell * (1 - H)
    m = margins(ell)
    if k >= c + m["bms"]:
        return "above-bms"
    if k >= c + m["bsc"]:
        return "above-bsc"
    if k <= c - m["below"]:
        return "below"
    return "inside-margins"


def sharp_transition_scan(W: ch.BmsChannel, ell: int, k_range, samples: int, seed: int,
                          budget: int = ENUMERATION_BUDGET) -> ConverseScan:
    """Sample ``samples`` uniform generators per ``k`` and record
    ``H(V_1|Y)`` statistics; deterministic in ``seed``."""
    from .sim import channel_digest

    H = ch.entropy(W)
    scan = ConverseScan(ell, channel_digest(W), seed, ell * (1 - H))
    if samples <= 0:
        return scan
    for k in sorted(set(int(k) for k in k_range)):
        vals = np.array([
            bit_entropy_exact(random_generator(k, ell, derive_seed(seed, k, s)), W, budget)
            for s in range(samples)
        ])
        se = float(vals.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
        scan.rows.append(ScanRow(k, samples, float(vals.mean()), float(vals.min()),
                                 float(vals.max()), se, _regime(k, ell, H)))
    return scan


def shifted_weight_distribution(g: GeneratorMatrix, y, budget: int = 2**24) -> np.ndarray:
    """``B[d] = #{v != 0 : wt(v g + y) = d}`` for ``d = 0..ell``."""
    g = g if isinstance(g, GeneratorMatrix) else GeneratorMatrix(g)
    if 2**g.k > budget:
        raise BudgetError(f"2^{g.k} messages exceed budget {budget}")
    y = np.asarray(y, dtype=np.int64).reshape(-1)
    if y.size != g.ell:
        raise ValueError(f"y must have length {g.ell}")
    words = g.codewords()[1:] ^ y
    return np.bincount(words.sum(axis=1), minlength=g.ell + 1)


def weight_moments(ell: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Mean and variance of ``B_g(d, 0)`` for a uniform ``k x ell`` generator.

    Each nonzero ``v`` gives a uniform word, and distinct ``v`` give pairwise
    independent words, so the count is a sum of ``2^k - 1`` pairwise
    independent indicators.
    """
    d = np.arange(ell + 1)
    p = np.array([math.comb(ell, int(x)) for x in d], dtype=float) / 2.0**ell
    n = 2**k - 1
    return n * p, n * p * (1 - p)


@dataclass
class TypicalityReport:
    samples: int
    bound1: float
    bound2: float
    cond1: float | None
    cond2: float | None
    both: float | None


def typicality_stats(W: ch.BmsChannel, ell: int, samples: int, seed: int) -> TypicalityReport:
    """Fraction of zero-input output words meeting both typicality sums.

    With mixture components ``(q_i, p_i)``, ``d_i`` counts coordinates routed
    through component ``i`` and ``t_i`` the flips among them.  Logs are base 2.
    """
    lg = math.log2(ell)
    b1 = 2 * math.sqrt(ell) * lg
    b2 = 3 * math.sqrt(ell) * lg**2
    if samples <= 0:
        return TypicalityReport(0, b1, b2, None, None, None)
    mix = ch.to_mixture(W)
    q, p = mix.q, mix.p
    rng = np.random.Generator(np.random.Philox(key=seed))
    d = rng.multinomial(ell, q / q.sum(), size=samples)
    t = rng.binomial(d, p)
    h = binary_entropy(p)
    with np.errstate(divide="ignore"):
        w = np.where((p > 0) & (p < 0.5), np.log2((1 - p) / np.where(p > 0, p, 1)), 0.0)
    s1 = ((ell * q - d) * h).sum(axis=1)
    s2 = ((p * d - t) * w).sum(axis=1)
    c1 = s1 <= b1
    c2 = s2 <= b2
    return TypicalityReport(samples, b1, b2, float(c1.mean()), float(c2.mean()),
                            float((c1 & c2).mean()))


def arikan_bit_identity_check(W: ch.BmsChannel, K, i: int,
                              budget: int = ENUMERATION_BUDGET) -> tuple[float, float, float]:
    """Compare bit-channel ``i`` of kernel ``K`` with the random-code bit
    entropy of the code spanned by the last ``ell - i + 1`` rows of ``K``."""
    K = Kernel(K)
    if not is_invertible(K):
        raise ValueError("kernel must be invertible")
    if not 1 <= i <= K.ell:
        raise ValueError(f"position {i} outside [1, {K.ell}]")
    lhs = ch.entropy(ch.bit_channels(W, K, budget=budget)[i - 1])
    rhs = bit_entropy_exact(GeneratorMatrix(K.rows[i - 1:]), W, budget)
    return lhs, rhs, abs(lhs - rhs)
