from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from robustle.stage import (
    EX21_GAMES,
    InvalidInput,
    ValuationState,
    auction_states,
    matrix_stage_payoffs,
    one_stage_equilibrium,
    stage_payoffs,
    verify_one_stage_nash,
    winning_bid,
)


@st.composite
def state_and_profile(draw, max_n=4, max_m=8):
    n = draw(st.integers(2, max_n))
    m = draw(st.integers(1, max_m))
    values = tuple(draw(st.integers(1, m)) for _ in range(n))
    bids = tuple(draw(st.integers(1, m)) for _ in range(n))
    return ValuationState(values, m), bids


# -- winning_bid

@pytest.mark.parametrize("profile, expected", [
    ((5, 4), (5, 1, {0})),
    ((4, 4), (4, 2, {0, 1})),
    ((1, 1, 1), (1, 3, {0, 1, 2})),
])
def test_winning_bid_examples(profile, expected):
    top, count, winners = winning_bid(profile)
    assert (top, count, set(winners)) == expected


@pytest.mark.parametrize("bad", [(), (0, 2), (2, 9)])
def test_winning_bid_rejects_malformed(bad):
    with pytest.raises(InvalidInput):
        winning_bid(bad, m=7)


@given(state_and_profile(), st.randoms())
def test_winning_bid_permutation_equivariant(sp, rnd):
    _, bids = sp
    perm = list(range(len(bids)))
    rnd.shuffle(perm)
    permuted = tuple(bids[perm[k]] for k in range(len(bids)))
    w = winning_bid(bids).winners
    wp = winning_bid(permuted).winners
    assert wp == frozenset(k for k in range(len(bids)) if perm[k] in w)


# -- stage payoffs

@pytest.mark.parametrize("bids, expected", [
    ((5, 4), (2, 0)),
    ((3, 3), (2, 1)),
    ((1, 4), (0, 1)),
])
def test_stage_payoffs_examples(bids, expected):
    assert stage_payoffs(ValuationState((7, 5), 7), bids) == tuple(map(Fraction, expected))


def test_stage_payoffs_can_be_negative_and_exact():
    assert stage_payoffs(ValuationState((3, 3), 7), (6, 6)) == (Fraction(-3, 2), Fraction(-3, 2))
    assert all(isinstance(u, Fraction) for u in stage_payoffs(ValuationState((2, 5, 4), 7), (3, 3, 3)))


def test_stage_payoffs_dimension_mismatch():
    with pytest.raises(InvalidInput):
        stage_payoffs(ValuationState((7, 5), 7), (1, 2, 3))


@given(state_and_profile())
def test_payoff_formula(sp):
    state, bids = sp
    u = stage_payoffs(state, bids)
    top = max(bids)
    count = bids.count(top)
    for v, b, ui in zip(state.values, bids, u):
        if b < top:
            assert ui == 0
        else:
            assert ui * count == v - top


def test_valuation_state_validation():
    with pytest.raises(InvalidInput):
        ValuationState((7,), 7)
    with pytest.raises(InvalidInput):
        ValuationState((8, 1), 7)


# -- one-shot equilibrium

@pytest.mark.parametrize("values, m, expected", [
    ((7, 5), 7, (5, 4)),
    ((4, 4), 4, (3, 3)),
    ((1, 1), 1, (1, 1)),
    ((6, 6, 2), 6, (5, 5, 1)),
])
def test_equilibrium_examples(values, m, expected):
    assert one_stage_equilibrium(ValuationState(values, m)) == expected


@given(state_and_profile())
def test_equilibrium_within_bounds(sp):
    state, _ = sp
    for v, x in zip(state.values, one_stage_equilibrium(state)):
        assert x == 1 if v == 1 else 1 <= x <= max(1, v - 1)


def _nash(state, profile):
    return verify_one_stage_nash(lambda x: stage_payoffs(state, x), profile, range(1, state.m + 1))


@pytest.mark.parametrize("values, m", [((7, 5), 7), ((4, 4), 4)])
def test_nash_passes(values, m):
    st_ = ValuationState(values, m)
    assert _nash(st_, one_stage_equilibrium(st_)).passed


def test_nash_degenerate_second_value_one():
    st_ = ValuationState((7, 1), 7)
    res = _nash(st_, (1, 1))
    assert not res.passed
    # oracle: (7-2)/1 - (7-1)/2 = 2, the best unilateral improvement
    assert (res.player, res.deviation, res.gain) == (0, 2, 2)


def test_nash_exhaustive_sweep():
    count = 0
    for n in (2, 3):
        for m in range(1, 7):
            for st_ in auction_states(n, m, 2):
                assert _nash(st_, one_stage_equilibrium(st_)).passed, st_
                count += 1
    assert count > 400


def test_nash_witness_tie_breaking():
    # symmetric game: both players gain 1 from the same deviation; lowest player wins
    payoff = lambda x: {(0, 0): (0, 0), (1, 0): (1, 0), (0, 1): (0, 1), (1, 1): (0, 0)}[x]
    res = verify_one_stage_nash(payoff, (0, 0), [0, 1])
    assert (res.player, res.deviation, res.gain) == (0, 1, 1)


def test_auction_states_filter():
    states = list(auction_states(2, 3, 2))
    assert len(states) == 4 and all(s.second_highest() >= 2 for s in states)


# -- matrix games

@pytest.mark.parametrize("label, actions, expected", [
    ("A", ("a", "a"), (1, 1)),
    ("B", ("a", "a"), (5, 5)),
    ("A", ("n", "b"), (0, 0)),
    ("A", ("a", "b"), (6, 0)),
    ("B", ("b", "b"), (1, 1)),
])
def test_matrix_payoffs(label, actions, expected):
    assert matrix_stage_payoffs(EX21_GAMES[label], actions) == expected


def test_matrix_n_row_is_zero_and_column_n_only_pays_b_in_a():
    for label, spec in EX21_GAMES.items():
        for other in "abn":
            assert spec.payoffs(("n", other)) == (0, 0)
            expected = (1, 0) if (label, other) == ("A", "b") else (0, 0)
            assert spec.payoffs((other, "n")) == expected


def test_matrix_unknown_action():
    with pytest.raises(InvalidInput):
        matrix_stage_payoffs(EX21_GAMES["A"], ("a", "z"))
