"""GF(2) kernel matrices and per-channel kernel search."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from . import channel as ch
from .errors import SearchExhaustedError
from .rng import derive_seed, random_bits


class Kernel:
    """Square binary matrix over GF(2).

    Parameters
    ----------
    rows : array_like
        ``ell x ell`` array of 0/1 entries, or a sequence of bit strings.
    """

    __slots__ = ("_a",)

    def __init__(self, rows):
        if isinstance(rows, Kernel):
            a = rows._a
        else:
            if len(rows) and isinstance(rows[0], str):
                rows = [[int(c) for c in r.strip()] for r in rows]
            a = np.array(rows, dtype=np.int64)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise ValueError(f"kernel must be a non-empty square matrix, got shape {a.shape}")
        if np.any((a != 0) & (a != 1)):
            raise ValueError("kernel entries must be bits")
        a = a.astype(np.uint8)
        a.setflags(write=False)
        object.__setattr__(self, "_a", a)

    def __setattr__(self, name, value):
        raise AttributeError("Kernel is immutable")

    @property
    def ell(self) -> int:
        return self._a.shape[0]

    @property
    def rows(self) -> np.ndarray:
        return self._a

    def __array__(self, dtype=None, copy=None):
        return self._a.astype(dtype) if dtype is not None else self._a.copy()

    def __eq__(self, other):
        if not isinstance(other, Kernel):
            try:
                other = Kernel(other)
            except (ValueError, TypeError):
                return NotImplemented
        return self._a.shape == other._a.shape and bool(np.all(self._a == other._a))

    def __hash__(self):
        return hash((self.ell, self._a.tobytes()))

    def __repr__(self):
        return f"Kernel({self.to_strings()})"

    def to_strings(self) -> list[str]:
        return ["".join(str(int(b)) for b in r) for r in self._a]

    def tolist(self) -> list[list[int]]:
        return self._a.astype(int).tolist()


def _row_masks(rows: np.ndarray) -> list[int]:
    return [int("".join(str(int(b)) for b in r) or "0", 2) for r in rows]


def gf2_rank(rows) -> int:
    """Rank over GF(2) of a 0/1 matrix (rows as bit-vectors)."""
    basis: list[int] = []
    for r in _row_masks(np.atleast_2d(np.asarray(rows))):
        for b in basis:
            r = min(r, r ^ b)
        if r:
            basis.append(r)
    return len(basis)


def is_invertible(K) -> bool:
    K = Kernel(K)
    return gf2_rank(K.rows) == K.ell


def gf2_matmul(a, b) -> np.ndarray:
    return (np.asarray(a, dtype=np.int64) @ np.asarray(b, dtype=np.int64)) % 2


A2 = Kernel([[1, 0], [1, 1]])


def arikan_kernel(s: int) -> Kernel:
    """``A2`` Kronecker-powered ``s`` times (``ell = 2**s``)."""
    if s < 1:
        raise ValueError("s must be >= 1")
    a = np.array([[1]], dtype=np.int64)
    for _ in range(s):
        a = np.kron(a, A2.rows.astype(np.int64))
    return Kernel(a)


def identity_kernel(ell: int) -> Kernel:
    return Kernel(np.eye(ell, dtype=np.int64))


def random_kernel(ell: int, seed: int) -> Kernel:
    """Uniform random ``ell x ell`` bit matrix (row-major, LSB-first SplitMix64 bits)."""
    if ell < 2:
        raise ValueError("ell must be >= 2")
    return Kernel(random_bits(seed, ell * ell).reshape(ell, ell))


def log2_exact(ell: int) -> int:
    s = int(ell).bit_length() - 1
    if ell < 2 or 1 << s != ell:
        raise ValueError(f"ell must be a power of 2, got {ell}")
    return s


def is_arikan_2x2(K) -> bool:
    """True when K equals A2 up to a column permutation."""
    K = Kernel(K)
    return K.ell == 2 and (K == A2 or K == Kernel([[0, 1], [1, 1]]))


# --- text formats ---------------------------------------------------------

def parse_kernel(text: str) -> Kernel:
    """Parse ``ell`` lines of 0/1 characters, or a JSON array of such strings."""
    s = text.strip()
    if s.startswith("["):
        rows = json.loads(s)
        if rows and not isinstance(rows[0], str):
            return Kernel(rows)
    else:
        rows = [ln.strip() for ln in s.splitlines() if ln.strip()]
    if not rows or any(set(r) - {"0", "1"} for r in rows):
        raise ValueError("kernel text must contain only 0/1 rows")
    return Kernel(rows)


def format_kernel(K: Kernel) -> str:
    return "\n".join(K.to_strings()) + "\n"


# --- search ---------------------------------------------------------------

@dataclass(frozen=True)
class SearchPolicy:
    """How :func:`kernel_search` enumerates and accepts candidates.

    ``mode`` is ``"exhaustive"`` or ``"randomized"`` (first candidate meeting
    the stop conditions wins, otherwise :class:`SearchExhaustedError`), or
    ``"best_effort"`` (score every candidate, keep the best).  Stop-condition
    constants default to the large-kernel formulas; ``relaxed=True`` swaps in
    a preset usable at ``ell <= 16``.
    """

    mode: str = "best_effort"
    max_candidates: int = 256
    seed: int = 0
    theta: float | None = None
    near0: float | None = None
    source: str = "auto"
    good_margin: float = 1.0
    bad_margin: float = 14.0
    good_exp_div: float = 5.0
    bad_exp_div: float = 20.0
    relaxed: bool = False

    def __post_init__(self):
        if self.mode not in ("exhaustive", "randomized", "best_effort"):
            raise ValueError(f"unknown search mode {self.mode!r}")
        if self.source not in ("auto", "exhaustive", "randomized"):
            raise ValueError(f"unknown candidate source {self.source!r}")
        if self.max_candidates < 1:
            raise ValueError("max_candidates must be >= 1")
        if self.theta is not None and not 0 < self.theta < 0.5:
            raise ValueError("theta must lie in (0, 1/2)")
        for name in ("good_margin", "bad_margin", "good_exp_div", "bad_exp_div"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def unpolarized_theta(self, ell: int) -> float:
        # Half the suction threshold: any channel that reaches the search then
        # counts as unpolarized under a kernel that leaves it unchanged.
        return 0.5 * self.suction(ell) if self.theta is None else self.theta

    def suction(self, ell: int) -> float:
        return float(ell) ** -4 if self.near0 is None else self.near0

    def stop_thresholds(self, ell: int) -> tuple[float, float, float, float]:
        """``(good_start_offset, good_bound, bad_end_offset, bad_bound)``.

        Indices ``i >= ell*H + good_start_offset`` must have entropy at most
        ``good_bound``; indices ``i <= ell*H - bad_end_offset`` at least
        ``1 - bad_bound``.
        """
        lg = math.log2(ell)
        if self.relaxed:
            r = math.sqrt(ell)
            return r, 1.0 / ell, r, 1.0 / ell
        base = math.sqrt(ell) * lg**3
        return (self.good_margin * base, float(ell) ** (-lg / self.good_exp_div),
                self.bad_margin * base, float(ell) ** (-lg / self.bad_exp_div))

    def candidate_source(self, ell: int) -> str:
        if self.source != "auto":
            return self.source
        if self.mode == "best_effort":
            return "exhaustive" if ell <= 3 else "randomized"
        return self.mode


@dataclass(frozen=True)
class SearchReport:
    """Outcome of one :func:`kernel_search` call.

    ``branch`` is ``"suction"``, ``"strict"`` or ``"best_effort"``.
    """

    branch: str
    candidates_tried: int
    entropies: tuple[float, ...]
    unpolarized: int
    channels: tuple = field(default=(), repr=False, compare=False)


def _exhaustive_candidates(ell: int) -> Iterator[Kernel]:
    n = ell * ell
    if n > 20:
        raise ValueError(f"exhaustive search over 2^{n} matrices is not feasible")
    shifts = np.arange(n - 1, -1, -1)
    for code in range(1 << n):
        a = ((code >> shifts) & 1).reshape(ell, ell)
        K = Kernel(a)
        if is_invertible(K):
            yield K


def _random_candidates(ell: int, seed: int, limit: int) -> Iterator[Kernel]:
    # The tensor kernel goes first so best-effort never does worse than it.
    if ell & (ell - 1) == 0:
        yield arikan_kernel(log2_exact(ell))
    draws = 0
    while draws < 64 * limit:
        K = random_kernel(ell, derive_seed(seed, draws))
        draws += 1
        if is_invertible(K):
            yield K


def evaluate_kernel(Wq: ch.BmsChannel, K: Kernel, bin_Q: int | None = None):
    """Binned bit-channels and their exact (pre-binning) entropies."""
    K = Kernel(K)
    if bin_Q is None:
        bin_Q = max(2, len(Wq))
    if K.ell == 2 and is_invertible(K):
        if is_arikan_2x2(K):
            # a column swap only relabels outputs, so both share the closed form
            (minus, h_minus), (plus, h_plus) = _arikan_pair_binned(Wq, bin_Q)
            return (minus, plus), np.array([h_minus, h_plus])
        # last row of weight one: each bit sees one clean use of W
        Wb = ch.degrade_bin(Wq, bin_Q)
        h = ch.entropy(Wq)
        return (Wb, Wb), np.array([h, h])
    chans, H = ch._bit_channels(Wq, K, bin_Q, ch.ENUMERATION_BUDGET)
    return tuple(chans), H


def _eval_key(K: Kernel):
    # at ell = 2 every invertible kernel behaves like A2 or like the identity
    return is_arikan_2x2(K) if K.ell == 2 else None


def _arikan_pair_binned(W: ch.BmsChannel, Q: int):
    mix = ch.to_mixture(W)
    out = []
    for q, p in ch._arikan_pair_arrays(mix.q, mix.p):
        acc = ch._BinAccumulator(Q)
        acc.add(q, np.minimum(p, 0.5))
        out.append((acc.channel(), min(1.0, acc.H)))
    return out


def _strict_ok(H: np.ndarray, H0: float, ell: int, policy: SearchPolicy) -> bool:
    g_off, g_bound, b_off, b_bound = policy.stop_thresholds(ell)
    i = np.arange(1, ell + 1)
    good = i >= ell * H0 + g_off
    bad = i <= ell * H0 - b_off
    return bool(np.all(H[good] <= g_bound) and np.all(H[bad] >= 1.0 - b_bound))


def _score(H: np.ndarray, theta: float) -> tuple[int, float]:
    return int(np.sum((H > theta) & (H < 1 - theta))), float(np.sum(H * (1 - H)))


def kernel_search(Wq: ch.BmsChannel, Delta: float, ell: int,
                  policy: SearchPolicy | None = None,
                  bin_Q: int | None = None) -> tuple[Kernel, SearchReport]:
    """Pick a kernel for channel ``Wq``.

    Near-noiseless or near-useless channels get the Arikan tensor kernel
    with no search.  Otherwise candidates are evaluated in a fixed order.

    Parameters
    ----------
    Wq : BmsChannel
        Channel, usually already binned.
    Delta : float
        Slack added to the upper suction threshold.
    ell : int
        Kernel size, a power of 2.
    policy : SearchPolicy, optional
    bin_Q : int, optional
        Bin count for the returned bit-channels (default ``len(Wq)``).

    Returns
    -------
    kernel : Kernel
    report : SearchReport
    """
    policy = policy or SearchPolicy()
    s = log2_exact(ell)
    H0 = ch.entropy(Wq)
    near0 = policy.suction(ell)
    if H0 < near0 or H0 > 1.0 - near0 + Delta:
        K = arikan_kernel(s)
        chans, H = evaluate_kernel(Wq, K, bin_Q)
        return K, SearchReport("suction", 0, tuple(H.tolist()), _score(H, policy.unpolarized_theta(ell))[0], chans)

    source = policy.candidate_source(ell)
    if source == "exhaustive":
        cands = _exhaustive_candidates(ell)
    else:
        cands = _random_candidates(ell, policy.seed, policy.max_candidates)

    best = None
    tried = 0
    cache: dict = {}
    for K in cands:
        if source == "randomized" and tried >= policy.max_candidates:
            break
        tried += 1
        key = _eval_key(K)
        if key is None:
            chans, H = evaluate_kernel(Wq, K, bin_Q)
        else:
            if key not in cache:
                cache[key] = evaluate_kernel(Wq, K, bin_Q)
            chans, H = cache[key]
        if policy.mode != "best_effort":
            if _strict_ok(H, H0, ell, policy):
                return K, SearchReport("strict", tried, tuple(H.tolist()),
                                       _score(H, policy.unpolarized_theta(ell))[0], chans)
            continue
        score = _score(H, policy.unpolarized_theta(ell))
        if best is None or score < best[0]:
            best = (score, K, H, chans)
    if best is None:
        raise SearchExhaustedError(
            f"no kernel among {tried} candidates met the stop conditions (H = {H0:.6g})")
    score, K, H, chans = best
    return K, SearchReport("best_effort", tried, tuple(H.tolist()), score[0], chans)
