import itertools
import json

import numpy as np
import pytest

from polarmix import channel as ch
from polarmix.errors import SearchExhaustedError
from polarmix.kernel import (A2, Kernel, SearchPolicy, arikan_kernel, format_kernel, gf2_matmul,
                             gf2_rank, identity_kernel, is_invertible, kernel_search,
                             parse_kernel, random_kernel)

import oracles

SWAP = [[0, 1], [1, 1]]


def test_is_invertible_examples():
    assert is_invertible(identity_kernel(5))
    assert not is_invertible(np.zeros((4, 4), dtype=int))
    assert not is_invertible(["110", "011", "101"])


def test_rank_matches_enumeration():
    # a 3x3 matrix is invertible iff no nonzero combination of rows vanishes
    for code in range(512):
        a = np.array([(code >> b) & 1 for b in range(9)]).reshape(3, 3)
        singular = any(not ((np.array(c) @ a) % 2).any()
                       for c in itertools.product((0, 1), repeat=3) if any(c))
        assert is_invertible(a) == (not singular)
        assert gf2_rank(a) == gf2_rank(a.T)


def test_invertible_count_small():
    # |GL(n, 2)| = prod (2^n - 2^i)
    count = sum(is_invertible(np.array([(c >> b) & 1 for b in range(9)]).reshape(3, 3))
                for c in range(512))
    assert count == 168


def test_arikan_kernel_examples():
    assert arikan_kernel(1) == Kernel([[1, 0], [1, 1]])
    assert arikan_kernel(2).to_strings() == ["1000", "1100", "1010", "1111"]
    for s in range(1, 5):
        assert is_invertible(arikan_kernel(s))
    with pytest.raises(ValueError):
        arikan_kernel(0)


def test_gf2_matmul():
    K = arikan_kernel(2).rows
    assert np.array_equal(gf2_matmul(K, K), np.eye(4, dtype=np.uint8))


def test_kernel_validation_and_immutability():
    with pytest.raises(ValueError):
        Kernel([[1, 0, 1], [0, 1, 0]])
    with pytest.raises(ValueError):
        Kernel([[2, 0], [0, 1]])
    K = Kernel(SWAP)
    with pytest.raises(AttributeError):
        K.rows = np.eye(2)
    assert hash(K) == hash(Kernel(np.array(SWAP)))


def test_random_kernel_deterministic():
    assert random_kernel(8, 123) == random_kernel(8, 123)
    assert random_kernel(8, 123) != random_kernel(8, 124)


def test_random_kernel_invertible_fraction():
    exact = np.prod([1 - 2.0**-k for k in range(1, 9)])
    assert exact == pytest.approx(0.2899, abs=1e-4)
    frac = np.mean([is_invertible(random_kernel(8, s)) for s in range(1000)])
    assert 0.20 <= frac <= 0.40


def test_random_kernel_reaches_all_2x2():
    seen = {random_kernel(2, s) for s in range(400)}
    assert len(seen) == 16


def test_parse_format_round_trip():
    K = arikan_kernel(2)
    assert parse_kernel(format_kernel(K)) == K
    assert parse_kernel(json.dumps(K.to_strings())) == K
    assert parse_kernel("[[1,0],[1,1]]") == A2
    with pytest.raises(ValueError):
        parse_kernel("10\n1x\n")


# --- search ---------------------------------------------------------------

def test_suction_noiseless():
    K, rep = kernel_search(ch.noiseless(), 0.0, 4)
    assert K == arikan_kernel(2)
    assert rep.branch == "suction"
    assert rep.candidates_tried == 0


@pytest.mark.parametrize("H", [0.0, 1e-5, 1 - 1e-5, 1.0])
def test_suction_both_ends(H):
    # bec(eps) has entropy eps
    K, rep = kernel_search(ch.bec(H), 0.0, 4)
    assert K == arikan_kernel(2) and rep.branch == "suction"


def test_best_effort_bsc_ell2():
    K, rep = kernel_search(ch.bsc(0.11), 0.0, 2)
    assert K in (A2, Kernel(SWAP))
    assert rep.unpolarized == 2
    assert rep.branch == "best_effort"
    assert rep.candidates_tried == 6
    assert sorted(rep.entropies) == pytest.approx(
        sorted(oracles.bit_channel_entropies(ch.bsc(0.11).pairs, A2.rows)), abs=1e-12)


def test_best_effort_bec_ell4_fixture():
    # regression fixture: the tensor kernel comes first and is not beaten
    K, rep = kernel_search(ch.bec(0.5), 0.0, 4, SearchPolicy(theta=0.1))
    assert rep.unpolarized <= 2
    assert K == arikan_kernel(2)
    assert rep.entropies == pytest.approx((0.9375, 0.5625, 0.4375, 0.0625), abs=1e-12)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_search_returns_invertible_and_reproducible(rng, seed):
    W = ch.BmsChannel.from_pairs(oracles.random_symmetric_pairs(rng, 2))
    pol = SearchPolicy(mode="best_effort", max_candidates=12, seed=seed)
    K1, r1 = kernel_search(W, 0.0, 4, pol)
    K2, r2 = kernel_search(W, 0.0, 4, pol)
    assert is_invertible(K1)
    assert K1 == K2 and r1 == r2
    exact = oracles.bit_channel_entropies(W.pairs, K1.rows)
    assert list(r1.entropies) == pytest.approx(list(exact), abs=1e-12)


def test_strict_vacuous_at_small_ell():
    # the large-kernel margins exceed ell, so the first invertible candidate passes
    K, rep = kernel_search(ch.bsc(0.11), 0.0, 2, SearchPolicy(mode="exhaustive"))
    assert rep.branch == "strict" and rep.candidates_tried == 1
    assert K == Kernel([[0, 1], [1, 0]])


def test_search_exhausted():
    pol = SearchPolicy(mode="exhaustive", good_margin=1e-9, good_exp_div=0.01)
    with pytest.raises(SearchExhaustedError):
        kernel_search(ch.bsc(0.11), 0.0, 2, pol)


def test_relaxed_preset_thresholds():
    g_off, g_b, b_off, b_b = SearchPolicy(relaxed=True).stop_thresholds(16)
    assert (g_off, g_b, b_off, b_b) == (4.0, 1 / 16, 4.0, 1 / 16)
    g_off, g_b, b_off, b_b = SearchPolicy().stop_thresholds(16)
    assert g_off == pytest.approx(4 * 64)
    assert g_b == pytest.approx(16 ** (-4 / 5))
    assert b_b == pytest.approx(16 ** (-4 / 20))
    assert SearchPolicy(bad_exp_div=21).stop_thresholds(16)[3] == pytest.approx(16 ** (-4 / 21))


def test_policy_validation():
    with pytest.raises(ValueError):
        SearchPolicy(mode="greedy")
    with pytest.raises(ValueError):
        SearchPolicy(max_candidates=0)
    with pytest.raises(ValueError):
        SearchPolicy(theta=0.7)
