"""Layered encoder and successive-cancellation decoder for construction plans.

LLRs are natural-log ratios ``ln W(y|0)/W(y|1)``; positive favours 0.
All routines accept a single word of length ``N`` or a batch ``(B, N)``.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from .construct import ConstructionPlan, pi_table
from .errors import PlanError
from .kernel import A2, Kernel

LLR_CLAMP = 40.0
# |LLR| at or below this is a tie: exact 50/50 posteriors come out of the
# log-domain recursion as +-1e-16 rather than 0
TIE_TOL = 1e-9

_A2_SWAP = Kernel([[0, 1], [1, 1]])


def _as_batch(a, N: int, what: str, dtype) -> tuple[np.ndarray, bool]:
    a = np.asarray(a, dtype=dtype)
    single = a.ndim == 1
    a = np.atleast_2d(a)
    if a.ndim != 2 or a.shape[1] != N:
        raise PlanError(f"{what} must have length {N}, got shape {np.shape(a)}")
    return a, single


# --- encoding -------------------------------------------------------------

def _apply_layer(plan: ConstructionPlan, X: np.ndarray, j: int) -> np.ndarray:
    ell, t = plan.ell, plan.t
    B = X.shape[0]
    X4 = X.reshape(B, ell ** (t - j - 1), ell**j, ell).astype(np.int64)
    out = np.einsum("bnri,rij->bnrj", X4, plan.kernels(j)) & 1
    return out.reshape(B, -1).astype(np.uint8)


def apply_transform(plan: ConstructionPlan, U) -> np.ndarray:
    """``U M`` over GF(2), applying the block-diagonal and permutation layers
    from the deepest level outwards.

    A permutation layer moves entry ``k`` to position ``pi(k)``; this is the
    orientation under which leaf ``i`` of the tree is bit-channel ``i``.
    """
    U, single = _as_batch(U, plan.N, "input word", np.uint8)
    if np.any(U > 1):
        raise PlanError("input word must contain bits")
    X = U
    for j in range(plan.t - 1, -1, -1):
        X = _apply_layer(plan, X, j)
        if j >= 1:
            X = X[:, np.argsort(pi_table(j, plan.t, plan.ell))]
    return X[0] if single else X


def scatter(plan: ConstructionPlan, message) -> np.ndarray:
    msg, single = _as_batch(message, plan.K, "message", np.uint8)
    U = np.zeros((msg.shape[0], plan.N), dtype=np.uint8)
    U[:, plan.good] = msg
    return U[0] if single else U


def encode(plan: ConstructionPlan, message) -> np.ndarray:
    """Codeword for ``message`` placed on the good positions (frozen bits 0)."""
    msg = np.asarray(message)
    if msg.shape[-1] != plan.K:
        raise PlanError(f"message length {msg.shape[-1]} != code dimension {plan.K}")
    return apply_transform(plan, scatter(plan, message))


def encode_recursive(plan: ConstructionPlan, U) -> np.ndarray:
    """Reference encoder following the tree directly (used as a cross-check)."""
    U, single = _as_batch(U, plan.N, "input word", np.uint8)
    ell, t = plan.ell, plan.t

    def rec(j, r, u):
        if j == t:
            return u
        m = u.shape[1] // ell
        V = np.stack([rec(j + 1, r * ell + c, u[:, c * m:(c + 1) * m]) for c in range(ell)],
                     axis=2)
        K = plan.nodes[j][r].kernel.rows.astype(np.int64)
        return ((V.astype(np.int64) @ K) & 1).reshape(u.shape[0], -1).astype(np.uint8)

    X = rec(0, 0, U)
    return X[0] if single else X


# --- local kernel LLRs ----------------------------------------------------

@lru_cache(maxsize=None)
def _suffix_books(rows: bytes, ell: int, c: int) -> tuple[np.ndarray, np.ndarray]:
    """Codewords ``s K[c:]`` split by the value of ``s_0``."""
    K = np.frombuffer(rows, dtype=np.uint8).reshape(ell, ell).astype(np.int64)
    tail = K[c:]
    s = np.array(list(itertools.product((0, 1), repeat=ell - c)), dtype=np.int64)
    words = (s @ tail) & 1
    return words[s[:, 0] == 0].astype(float), words[s[:, 0] == 1].astype(float)


def _lse(a: np.ndarray) -> np.ndarray:
    m = a.max(axis=-1)
    return m + np.log(np.exp(a - m[..., None]).sum(axis=-1))


def _boxplus(a, b):
    return (np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))
            + np.log1p(np.exp(-np.abs(a + b))) - np.log1p(np.exp(-np.abs(a - b))))


def _local_llr(K: Kernel, L: np.ndarray, prefix: np.ndarray, c: int,
               clamp: float = LLR_CLAMP, closed_form: bool = True) -> np.ndarray:
    """LLR of block input ``c`` (0-based) for many blocks at once.

    ``L`` has shape ``(..., ell)``, ``prefix`` shape ``(..., c)``.
    """
    ell = K.ell
    if closed_form and ell == 2 and (K == A2 or K == _A2_SWAP):
        a, b = (L[..., 0], L[..., 1]) if K == A2 else (L[..., 1], L[..., 0])
        if c == 0:
            out = _boxplus(a, b)
        else:
            out = b + (1 - 2 * prefix[..., 0].astype(float)) * a
        return np.clip(out, -clamp, clamp)
    if c:
        pc = (prefix.astype(np.int64) @ K.rows[:c].astype(np.int64)) & 1
        L = L * (1 - 2 * pc)
    book0, book1 = _suffix_books(K.rows.tobytes(), ell, c)
    out = _lse(-(L @ book0.T)) - _lse(-(L @ book1.T))
    return np.clip(out, -clamp, clamp)


def local_kernel_llr(K, priors, decided_prefix, i: int, clamp: float = LLR_CLAMP) -> float:
    """LLR of kernel input ``i`` (1-based) given ``i - 1`` decided inputs.

    Parameters
    ----------
    K : Kernel or array_like
    priors : array_like
        ``ell`` channel LLRs for the kernel outputs.
    decided_prefix : array_like
        Bits ``u_1 .. u_{i-1}``.
    i : int
    """
    K = Kernel(K)
    if not 1 <= i <= K.ell:
        raise ValueError(f"position {i} outside [1, {K.ell}]")
    prefix = np.asarray(decided_prefix, dtype=np.int64).reshape(-1)
    if prefix.size != i - 1:
        raise ValueError(f"expected {i - 1} decided bits, got {prefix.size}")
    L = np.clip(np.asarray(priors, dtype=float).reshape(-1), -clamp, clamp)
    return float(_local_llr(K, L, prefix, i - 1, clamp))


# --- SC decoding ----------------------------------------------------------

def _good_counts(plan: ConstructionPlan) -> list[np.ndarray]:
    counts = [plan.good_mask.astype(np.int64)]
    for _ in range(plan.t):
        counts.append(counts[-1].reshape(-1, plan.ell).sum(axis=1))
    return counts[::-1]


def sc_decode(plan: ConstructionPlan, llrs, clamp: float = LLR_CLAMP,
              closed_form: bool = True, tie_bits=None,
              tie_tol: float = TIE_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Successive-cancellation decoding.

    An information bit whose LLR is a tie (``|LLR| <= tie_tol``) decodes to 0, or to
    ``tie_bits[..., i]`` when that array (same shape as ``llrs``) is given.
    Fixed tie-breaking favours the all-zero codeword on discrete channels,
    where exact ties have positive probability; coin flips do not.

    Returns
    -------
    message : ndarray
        Decoded bits on the good positions.
    u_hat : ndarray
        Full decoded input word (frozen positions are 0).
    """
    L, single = _as_batch(llrs, plan.N, "LLR word", float)
    if np.any(np.isnan(L)):
        raise PlanError("LLR word contains NaN")
    L = np.clip(L, -clamp, clamp)
    if tie_bits is not None:
        tie_bits, _ = _as_batch(tie_bits, plan.N, "tie word", np.uint8)
        tie_bits = np.broadcast_to(tie_bits, L.shape)
    ell, t = plan.ell, plan.t
    counts = _good_counts(plan)
    good = plan.good_mask
    B = L.shape[0]

    def rec(j, r, Lr):
        n = Lr.shape[1]
        if counts[j][r] == 0:
            z = np.zeros((B, n), dtype=np.uint8)
            return z, z
        if j == t:
            if not good[r]:
                bit = np.zeros((B, 1), np.uint8)
            else:
                tie = np.abs(Lr) <= tie_tol
                alt = 0 if tie_bits is None else tie_bits[:, r:r + 1]
                bit = np.where(tie, alt, Lr < 0).astype(np.uint8)
            return bit, bit
        K = plan.nodes[j][r].kernel
        m = n // ell
        Lb = Lr.reshape(B, m, ell)
        V = np.zeros((B, m, ell), dtype=np.uint8)
        us = []
        for c in range(ell):
            llr = _local_llr(K, Lb, V[:, :, :c], c, clamp, closed_form)
            u_c, v_c = rec(j + 1, r * ell + c, llr)
            V[:, :, c] = v_c
            us.append(u_c)
        X = (V.astype(np.int64) @ K.rows.astype(np.int64)) & 1
        return np.concatenate(us, axis=1), X.reshape(B, n).astype(np.uint8)

    u_hat, _ = rec(0, 0, L)
    msg = u_hat[:, plan.good]
    if single:
        return msg[0], u_hat[0]
    return msg, u_hat


def hard_llrs(bits, clamp: float = LLR_CLAMP) -> np.ndarray:
    """Noiseless LLRs for a bit word: +clamp for 0, -clamp for 1."""
    return clamp * (1.0 - 2.0 * np.asarray(bits, dtype=float))
