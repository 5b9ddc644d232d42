from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from robustle.core import (
    Absorbed,
    AuctionGame,
    AuctionMonitor,
    AuctionSignal,
    MatrixGame,
    Monitor,
    Periodic,
    PayoffMonitor,
    StrategyError,
    TrivialMonitor,
    Undetermined,
    auction_monitor,
    average_payoff,
    evaluate,
    longrun_payoff,
    prefix_compose,
    run,
)
from robustle.stage import EX21_GAMES, InvalidInput, ValuationState
from robustle.strategies import (
    MaxBidConfig,
    Window,
    constant_strategy,
    maxbid_strategy,
    periodic_strategy,
)

from oracle import naive_play, payoffs

FULL = MaxBidConfig(Window.full(), 2)


def game(*values, m=7):
    return AuctionGame(ValuationState(values, m))


def mb(config=FULL):
    return maxbid_strategy(None, config)


# -- monitor

@pytest.mark.parametrize("profile, signal", [
    ((5, 4), AuctionSignal(5, 1)),
    ((4, 4), AuctionSignal(4, 2)),
    ((2, 5), AuctionSignal(5, 1)),
])
def test_auction_monitor(profile, signal):
    assert auction_monitor([(1, 1), profile]) == signal
    assert AuctionMonitor().signals([profile], 1) == (signal, signal)


def test_auction_monitor_rejects_empty():
    with pytest.raises(InvalidInput):
        auction_monitor([])


def test_payoff_and_trivial_monitors():
    g = MatrixGame(EX21_GAMES["A"])
    assert [s.value for s in PayoffMonitor(g).signals([("a", "b")], 1)] == [6, 0]
    assert TrivialMonitor().signals([("a", "b")], 1)[0].label == "*"


# -- run

def test_example_35_full_history():
    tr = run(game(7, 5), AuctionMonitor(), [mb(), mb()], 10)
    assert tr.actions(0) == [1, 2, 3, 4, 5, 5, 5, 5, 5, 5]
    assert tr.actions(1) == [1, 2, 3, 4, 4, 4, 4, 4, 4, 4]
    assert tr.classification == Absorbed((5, 4), 5)


def test_everyone_bids_one_forever():
    tr = run(game(4, 6, 2), AuctionMonitor(), [constant_strategy(1)] * 3, 25)
    assert set(tr.profiles) == {(1, 1, 1)}
    assert tr.classification == Absorbed((1, 1, 1), 1)


def test_example_36_trace():
    one = MaxBidConfig(Window.constant(1), 2)
    tr = run(game(7, 5), AuctionMonitor(), [mb(one), periodic_strategy([], [1, 1, 3])], 40)
    assert tr.actions(0)[:11] == [1, 2, 2, 4, 3, 2, 4, 3, 2, 4, 3]
    c = tr.classification
    assert isinstance(c, Periodic) and c.entry_round <= 4
    assert set(c.cycle) == {(4, 1), (3, 1), (2, 3)}


def test_invalid_action_aborts_with_round_and_player():
    with pytest.raises(StrategyError) as err:
        run(game(7, 5), AuctionMonitor(), [constant_strategy(1), periodic_strategy([2, 3], [8])], 10)
    assert (err.value.round, err.value.player, err.value.action) == (3, 1, 8)


def test_horizon_one_is_undetermined():
    tr = run(game(7, 5), AuctionMonitor(), [mb(), mb()], 1)
    assert tr.horizon == 1 and isinstance(tr.classification, Undetermined)


def test_bad_dimensions():
    with pytest.raises(ValueError):
        run(game(7, 5), AuctionMonitor(), [mb()], 5)
    with pytest.raises(ValueError):
        run(game(7, 5), AuctionMonitor(), [mb(), mb()], 0)


def test_trace_invariants():
    g = game(6, 4, 5)
    tr = run(g, AuctionMonitor(), [mb(MaxBidConfig(Window.half(), 2)), mb(), periodic_strategy([1], [3, 5])], 60)
    mon = AuctionMonitor()
    for t in range(1, tr.horizon + 1):
        assert tr.signals[t - 1] == mon.signals(tr.profiles[:t], t)
        assert tr.payoffs[t - 1] == payoffs(g.state.values, tr.profiles[t - 1])


def test_determinism():
    def once():
        return run(game(7, 5), AuctionMonitor(), [mb(MaxBidConfig(Window.half(), 2)), periodic_strategy([2], [1, 4])], 500)
    a, b = once(), once()
    assert a.profiles == b.profiles and a.signals == b.signals and a.classification == b.classification


class _StubMonitor(Monitor):
    """Auction monitor whose signals to ``victim`` are scrambled."""

    def __init__(self, victim):
        self.victim = victim

    def signals(self, history, t):
        sig = list(AuctionMonitor().signals(history, t))
        sig[self.victim] = AuctionSignal((t * 7) % 5 + 1, 2)
        return tuple(sig)


def test_information_locality():
    # player 1 ignores signals; scrambling player 2's signals must not change player 1
    strategies = lambda: [periodic_strategy([3], [1, 2]), mb(MaxBidConfig(Window.half(), 2))]
    a = run(game(7, 5), AuctionMonitor(), strategies(), 50)
    b = run(game(7, 5), _StubMonitor(1), strategies(), 50)
    assert a.actions(0) == b.actions(0)
    assert a.actions(1) != b.actions(1)
    # a MaxBid player never sees the other player's signals
    c = run(game(7, 5), _StubMonitor(1), [mb(), periodic_strategy([], [2, 3])], 50)
    d = run(game(7, 5), AuctionMonitor(), [mb(), periodic_strategy([], [2, 3])], 50)
    assert c.actions(0) == d.actions(0)


# -- payoffs

def test_average_payoff_example_36():
    one = MaxBidConfig(Window.constant(1), 2)
    tr = run(game(7, 5), AuctionMonitor(), [mb(one), periodic_strategy([], [1, 1, 3])], 60)
    entry = tr.classification.entry_round
    # full cycles after entry average exactly 2/3 for player 2
    tail = tr.profiles[entry - 1:entry - 1 + 30]
    assert sum(payoffs((7, 5), p)[1] for p in tail) / 30 == Fraction(2, 3)
    assert longrun_payoff(tr, 1) == (Fraction(2, 3), True)


def test_average_payoff_losing_player_and_bounds():
    tr = run(game(7, 5), AuctionMonitor(), [constant_strategy(6), constant_strategy(1)], 10)
    assert average_payoff(tr, 1) == 0
    assert average_payoff(tr, 0, 4) == 1
    with pytest.raises(ValueError):
        average_payoff(tr, 0, 11)


def test_longrun_example_35():
    tr = run(game(7, 5), AuctionMonitor(), [mb(), mb()], 50)
    assert [longrun_payoff(tr, i) for i in range(2)] == [(2, True), (0, True)]
    # the climb rounds pay more than the absorbed profile
    assert average_payoff(tr, 0) == Fraction(101, 50)


def test_longrun_undetermined_is_horizon_average():
    tr = run(game(7, 5), AuctionMonitor(), [mb(), mb()], 3)
    assert longrun_payoff(tr, 0) == (average_payoff(tr, 0), False)


@given(st.integers(2, 7), st.integers(2, 7), st.integers(30, 300))
def test_absorbed_running_average_bound(v1, v2, H):
    tr = run(game(v1, v2), AuctionMonitor(), [mb(), mb()], H)
    c = tr.classification
    assert isinstance(c, Absorbed)
    target = payoffs((v1, v2), c.profile)
    bound = max(abs(u) for p in tr.profiles for u in payoffs((v1, v2), p))
    for i in range(2):
        for T in (H // 3, H // 2, H):
            if T >= 1:
                assert abs(average_payoff(tr, i, T) - target[i]) <= Fraction(c.since_round * bound, T)


# -- prefix composition

def test_prefix_zero_is_f():
    a = run(game(7, 5), AuctionMonitor(), [prefix_compose(constant_strategy(3), mb(), 0), mb()], 30)
    b = run(game(7, 5), AuctionMonitor(), [mb(), mb()], 30)
    assert a.profiles == b.profiles


def test_example_37_prefix():
    strategies = [prefix_compose(constant_strategy(2), mb(), 1), prefix_compose(constant_strategy(5), mb(), 1)]
    tr = run(game(7, 3), AuctionMonitor(), strategies, 8)
    assert tr.actions(0) == [2, 6, 6, 6, 6, 6, 6, 6]
    assert tr.actions(1) == [5, 2, 2, 2, 2, 2, 2, 2]
    assert longrun_payoff(tr, 0) == (1, True)


@given(st.integers(0, 6), st.lists(st.integers(1, 7), min_size=1, max_size=4), st.integers(2, 7))
def test_prefix_agrees_with_g_then_f_continues(T, cycle, v):
    g_play = periodic_strategy([], cycle)
    comp = prefix_compose(periodic_strategy([], cycle), mb(MaxBidConfig(Window.half(), 2)), T)
    opp = lambda: periodic_strategy([2], [3, 1])
    a = run(game(v, 5), AuctionMonitor(), [comp, opp()], 40)
    ref = run(game(v, 5), AuctionMonitor(), [g_play, opp()], 40)
    assert a.actions(0)[:T] == ref.actions(0)[:T]
    # after T the composed player bids what MaxBid would bid given the same history
    from oracle import naive_maxbid_bid
    sigs = [s[0] for s in a.signals]
    own = a.actions(0)
    for t in range(T + 1, 41):
        assert own[t - 1] == naive_maxbid_bid(v, Window.half(), 2, t, own[:t - 1], sigs[:t - 1])


# -- engine against the naive reference

WINDOWS = [Window.full(), Window.half(), Window.constant(1), Window.constant(3), Window.from_table([1, 1, 2, 3, 3, 4])]


@st.composite
def scenario(draw):
    n = draw(st.integers(2, 3))
    m = draw(st.integers(2, 7))
    values = tuple(draw(st.integers(1, m)) for _ in range(n))
    players = []
    for _ in range(n):
        if draw(st.booleans()):
            players.append(("maxbid", draw(st.sampled_from(WINDOWS)), draw(st.sampled_from([1, 2]))))
        else:
            pre = tuple(draw(st.lists(st.integers(1, m), max_size=2)))
            cyc = tuple(draw(st.lists(st.integers(1, m), min_size=1, max_size=3)))
            players.append(("seq", pre, cyc))
    return values, m, players


def _build(players):
    out = []
    for p in players:
        out.append(mb(MaxBidConfig(p[1], p[2])) if p[0] == "maxbid" else periodic_strategy(p[1], p[2]))
    return out


@given(scenario(), st.sampled_from([20, 150, 700]))
def test_engine_matches_naive_reference(sc, H):
    values, m, players = sc
    g = AuctionGame(ValuationState(values, m))
    tr = run(g, AuctionMonitor(), _build(players), H)
    assert tr.profiles == naive_play(values, players, H)
    c = tr.classification
    if isinstance(c, (Absorbed, Periodic)):
        # a certified steady state holds over the whole simulated horizon
        cyc = c.cycle
        for t in range(c.entry_round, H + 1):
            assert tr.profiles[t - 1] == cyc[(t - c.entry_round) % len(cyc)]


@given(scenario(), st.sampled_from([40, 2000, 10_000]))
def test_evaluate_matches_run(sc, H):
    values, m, players = sc
    g = AuctionGame(ValuationState(values, m))
    tr = run(g, AuctionMonitor(), _build(players), H)
    ref = tuple(longrun_payoff(tr, i) for i in range(len(values)))
    assert evaluate(g, AuctionMonitor(), _build(players), H) == ref


@given(scenario())
def test_lock_free_reference_agrees(sc):
    values, m, players = sc
    g = AuctionGame(ValuationState(values, m))
    a = run(g, AuctionMonitor(), _build(players), 3000)
    b = run(g, AuctionMonitor(), _build(players), 3000, lock=False)
    assert a.profiles == b.profiles and a.signals == b.signals


def test_early_stop_keeps_classification():
    g = game(7, 5)
    full = run(g, AuctionMonitor(), [mb(), mb()], 10_000)
    short = run(g, AuctionMonitor(), [mb(), mb()], 10_000, early_stop=True)
    assert short.horizon < 50 and short.classification == full.classification


def test_half_window_self_play_is_not_absorbed():
    # sliding windows keep revisiting non-equilibrium profiles (recorded behaviour)
    tr = run(game(7, 5), AuctionMonitor(), [mb(MaxBidConfig(Window.half(), 2)), mb(MaxBidConfig(Window.half(), 2))], 10_000)
    assert isinstance(tr.classification, Undetermined)
    off = [t for t, p in enumerate(tr.profiles, 1) if p != (5, 4)]
    assert off[:4] == [1, 2, 3, 4] and off[4:8] == [10, 22, 46, 94]
    assert len(off) < 20
