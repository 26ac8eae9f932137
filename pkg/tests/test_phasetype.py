"""Discrete phase-type machinery against the worked n = 5 chain: exact
moments, the reward transform with censoring, and the sparse branch."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

import rankedcoal.phasetype as phasetype
from rankedcoal import ValidationError
from rankedcoal.fmatrix import path_to_fmatrix
from rankedcoal.kingman import enumerate_paths
from rankedcoal.phasetype import (
    DiscretePhaseType,
    build_rewards,
    coalescent_dph,
    dph_mean_var,
    dph_pmf,
    dph_pmf_range,
    mdph_cross_moment,
    reward_moments,
    reward_transform,
)

F = Fraction

N5_T = [
    [0, 1, 0, 0, 0, 0, 0],
    [0, 0, F(1, 2), F(1, 2), 0, 0, 0],
    [0, 0, 0, 0, F(2, 3), 0, F(1, 3)],
    [0, 0, 0, 0, F(1, 3), F(1, 3), F(1, 3)],
    [0, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 0],
]

R_S = [0, 0, 2, 1, 2, 1, 0]
R_E = [5, 3, 2, 1, 1, 0, 0]


@pytest.fixture(scope="module")
def dph5(space5):
    return coalescent_dph(space5)


def test_n5_chain_representation(dph5):
    assert list(dph5.pi) == [1, 0, 0, 0, 0, 0, 0]
    assert dph5.T.tolist() == N5_T
    assert list(dph5.exit) == [0, 0, 0, 0, 1, 1, 1]
    assert dph5.defect == 0


def test_absorption_time_is_deterministic(dph5):
    mean, var = dph_mean_var(dph5)
    assert (mean, var) == (4, 0)
    assert dph_pmf(dph5, 4) == 1
    assert dph_pmf_range(dph5, 6) == [0, 0, 0, 1, 0, 0]


def test_reward_columns(space5, dph5):
    rewards = build_rewards(space5)
    assert rewards.column("S").tolist() == R_S
    assert rewards.column("E").tolist() == R_E
    assert rewards.labels == ["S", "E", "F(3,1)", "F(4,1)", "F(4,2)"]


def test_reward_moments_goldens(dph5):
    assert reward_moments(dph5, R_S) == (F(8, 3), F(11, 9))
    assert reward_moments(dph5, R_E) == (F(10), F(2, 3))
    cross, cov = mdph_cross_moment(dph5, R_S, R_E)
    assert cov == F(5, 6)
    assert cross == F(5, 6) + F(8, 3) * 10


def test_transform_representation(dph5):
    d_s = reward_transform(dph5, R_S)
    assert list(d_s.pi) == [F(1, 2), 0, F(1, 2), 0, 0, 0]
    assert d_s.T.tolist() == [
        [0, 1, 0, 0, 0, 0],
        [0, 0, 0, F(2, 3), 0, 0],
        [0, 0, 0, F(1, 3), 0, F(1, 3)],
        [0, 0, 0, 0, 1, 0],
        [0, 0, 0, 0, 0, 0],
        [0, 0, 0, 0, 0, 0],
    ]
    assert list(d_s.exit) == [0, F(1, 3), F(1, 3), 0, 1, 1]


def test_transform_pmf_matches_enumeration(space5, dph5):
    """P(S = s) from the transform equals the path-enumeration law."""
    d_s = reward_transform(dph5, R_S)
    law = {}
    for path, prob in enumerate_paths(space5):
        s = sum(R_S[idx - 1] for idx in path)
        law[s] = law.get(s, F(0)) + prob
    assert d_s.defect == law.get(0, F(0))
    pmf = dph_pmf_range(d_s, 8)
    for s in range(1, 9):
        assert pmf[s - 1] == law.get(s, F(0))


def test_transform_preserves_e_law(space5, dph5):
    d_e = reward_transform(dph5, R_E)
    assert d_e.defect == 0
    assert dph_mean_var(d_e) == (F(10), F(2, 3))


@given(st.lists(st.integers(min_value=0, max_value=3), min_size=7, max_size=7))
def test_transform_preserves_moments(r):
    assume(any(r))
    from rankedcoal.statespace import enumerate_states

    d = coalescent_dph(enumerate_states(5))
    direct = reward_moments(d, r)
    assert dph_mean_var(reward_transform(d, r)) == direct


def test_all_zero_reward_rejected(dph5):
    with pytest.raises(ValidationError):
        reward_transform(dph5, [0] * 7)


def test_moment_argument_guards(dph5):
    with pytest.raises(ValidationError):
        dph_pmf(dph5, 0)
    with pytest.raises(ValidationError):
        phasetype.dph_factorial_moment(dph5, 0)


def test_invalid_representation_rejected():
    with pytest.raises(ValidationError):
        DiscretePhaseType(pi=np.array([F(1), F(1)]), T=np.array([[F(0)]] * 2))
    bad_t = np.array([[F(1, 2), F(2, 3)], [F(0), F(0)]])
    with pytest.raises(ValidationError):
        DiscretePhaseType(pi=np.array([F(1), F(0)]), T=bad_t)


def test_sparse_transform_agrees_with_dense(space6, monkeypatch):
    d = coalescent_dph(space6, mode="float")
    r = build_rewards(space6).column("S")
    dense = reward_transform(d, r)
    monkeypatch.setattr(phasetype, "SPARSE_MIN_ORDER", 1)
    sparse = reward_transform(d, r)
    assert phasetype.sp.issparse(sparse.T)
    assert not phasetype.sp.issparse(dense.T)
    np.testing.assert_allclose(
        dph_pmf_range(sparse, 15), dph_pmf_range(dense, 15), atol=1e-13
    )
    np.testing.assert_allclose(dph_mean_var(sparse), dph_mean_var(dense), rtol=1e-12)


def test_float_mode_tracks_rational(space5, dph5):
    d_float = coalescent_dph(space5, mode="float")
    mean, var = reward_moments(d_float, R_S)
    assert mean == pytest.approx(8 / 3, rel=1e-14)
    assert var == pytest.approx(11 / 9, rel=1e-14)


def test_nonfixed_reward_moments_match_sample_identities(space5, dph5):
    """E[F_ij] via rewards equals the path-weighted average entry."""
    rewards = build_rewards(space5)
    positions = [(3, 1), (4, 1), (4, 2)]
    paths = enumerate_paths(space5)
    for i, j in positions:
        r = rewards.column(f"F({i},{j})")
        mean, _ = reward_moments(dph5, r)
        direct = sum(
            prob * int(path_to_fmatrix(space5, p).entries[i - 1, j - 1])
            for p, prob in paths
        )
        assert mean == direct
