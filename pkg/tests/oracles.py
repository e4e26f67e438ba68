"""Independent reference computations used by the tests.

Nothing here calls into the package's numerical routines; everything is
built from dense joint distributions or plain recursions.
"""

from __future__ import annotations

import itertools
from decimal import Decimal, getcontext

import numpy as np


def h_decimal(p: float) -> float:
    """Binary entropy in 50-digit decimal arithmetic."""
    getcontext().prec = 50
    p = Decimal(repr(p))
    if p in (0, 1):
        return 0.0
    ln2 = Decimal(2).ln()
    q = 1 - p
    return float(-(p * p.ln() + q * q.ln()) / ln2)


def h(p):
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -p * np.log2(p) - (1 - p) * np.log2(1 - p)
    return np.nan_to_num(out)


def cond_entropy(joint: np.ndarray) -> float:
    """H(A|B) for a joint table of shape (2, ...) with A on axis 0."""
    j = joint.reshape(2, -1)
    py = j.sum(axis=0)
    keep = py > 0
    return float(np.sum(py[keep] * h(j[0, keep] / py[keep])))


def symbol_entropy(pairs) -> float:
    """H(X|Y) straight from the transition table."""
    a = np.asarray(pairs, dtype=float)
    return cond_entropy(0.5 * a.T)


def random_symmetric_pairs(rng: np.random.Generator, n_comp: int, erasure: bool = False):
    """Random BMS table as explicit (w0, w1) symbols."""
    q = rng.dirichlet(np.ones(n_comp + erasure))
    p = rng.uniform(0, 0.5, n_comp)
    pairs = []
    for qi, pi in zip(q, p):
        pairs += [(qi * (1 - pi), qi * pi), (qi * pi, qi * (1 - pi))]
    if erasure:
        pairs.append((q[-1], q[-1]))
    return pairs


def random_invertible(rng: np.random.Generator, ell: int) -> np.ndarray:
    while True:
        K = rng.integers(0, 2, (ell, ell))
        if round(abs(np.linalg.det(K))) % 2 == 1:
            return K


def word_likelihoods(pairs, X: np.ndarray) -> np.ndarray:
    """P(y | x) for every row x of X and every y in Y^n (y_1 most significant)."""
    a = np.asarray(pairs, dtype=float)
    out = np.ones((X.shape[0], 1))
    for col in X.T:
        out = (out[:, :, None] * a[:, col].T[:, None, :]).reshape(X.shape[0], -1)
    return out


def all_words(n: int) -> np.ndarray:
    return np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.int64)


def bit_channel_entropies(pairs, K) -> np.ndarray:
    """H(U_i | Y, U_<i) for X = U K, U uniform, from the dense joint table."""
    K = np.asarray(K, dtype=np.int64)
    ell = K.shape[0]
    U = all_words(ell)
    joint = word_likelihoods(pairs, (U @ K) % 2) / 2**ell  # (2^ell, |Y|^ell)
    out = []
    for i in range(ell):
        # group by (u_1..u_i) then drop u_{>i}
        j = joint.reshape(2**i, 2, 2 ** (ell - i - 1), -1).sum(axis=2)
        out.append(sum(cond_entropy(j[a]) for a in range(2**i)))
    return np.array(out)


def code_bit_entropy(pairs, G) -> float:
    """H(V_1 | Y) for Y = W^ell(V G), V uniform."""
    G = np.asarray(G, dtype=np.int64)
    k = G.shape[0]
    V = all_words(k)
    joint = word_likelihoods(pairs, (V @ G) % 2) / 2**k
    return cond_entropy(joint.reshape(2, 2 ** (k - 1), -1).sum(axis=1))


def bec_leaf_erasures(eps: float, t: int) -> np.ndarray:
    """Exact Arikan leaf erasure rates, leaf order matching the tree index."""
    e = np.array([eps])
    for _ in range(t):
        e = np.stack([2 * e - e * e, e * e], axis=1).ravel()
    return e


def sc_map_decisions(G: np.ndarray, good: np.ndarray, lik: np.ndarray, tie: float = 0.0):
    """Successive bitwise-MAP decisions.

    ``lik[b, u]`` is P(y_b | x = u G) for every input word ``u`` (row index in
    lexicographic order).  Bit ``i`` is decided from the posterior of ``u_i``
    given ``y`` and the earlier decisions, with later bits uniform.  Frozen
    bits are set to 0, and so are bits whose relative margin is ``<= tie``.  Returns decided words and the decision margins.
    """
    N = G.shape[0]
    U = all_words(N)
    B = lik.shape[0]
    alive = np.ones((B, 2**N), dtype=bool)
    dec = np.zeros((B, N), dtype=np.int64)
    margin = np.full((B, N), np.inf)
    for i in range(N):
        if good[i]:
            w = np.where(alive, lik, 0.0)
            p0 = (w * (U[:, i] == 0)).sum(axis=1)
            p1 = (w * (U[:, i] == 1)).sum(axis=1)
            margin[:, i] = np.abs(p0 - p1) / np.maximum(p0 + p1, 1e-300)
            dec[:, i] = ((p1 > p0) & (margin[:, i] > tie)).astype(np.int64)
        alive &= U[None, :, i] == dec[:, i:i + 1]
    return dec, margin
