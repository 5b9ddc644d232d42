"""Repeated-game machinery: signals, monitors, the strategy interface, play
generation and long-run payoff evaluation.

Rounds are 1-based. After round ``t`` every player receives her signal for
that round and only then chooses her action for round ``t + 1``.

Play generation is exact and event driven. Whenever the recent play is
periodic and every strategy can certify that the period will persist (a
finite-state strategy by repeating its summary, a growing-window strategy
by a window argument), the engine either stops with a proven steady state
or jumps straight to the first round at which something may change.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from math import inf
from typing import Hashable, NamedTuple, Sequence

from .stage import (
    MATRIX_ACTIONS,
    InvalidInput,
    MatrixGameSpec,
    ValuationState,
    stage_payoffs,
    winning_bid,
)

log = logging.getLogger(__name__)


# -- signals ----------------------------------------------------------------

class AuctionSignal(NamedTuple):
    max_bid: int
    winner_count: int


class PayoffSignal(NamedTuple):
    value: Fraction


class Opaque(NamedTuple):
    label: str = "*"


# -- games ------------------------------------------------------------------

@dataclass(frozen=True)
class AuctionGame:
    """The repeated first-price auction at a fixed valuation state."""

    state: ValuationState
    _cache: dict = field(default_factory=dict, compare=False, hash=False, repr=False)

    kind = "auction"

    @property
    def n(self) -> int:
        return self.state.n

    @property
    def m(self) -> int:
        return self.state.m

    @property
    def label(self) -> str:
        return f"v=({self.state}) m={self.state.m}"

    def action_set(self, player: int) -> range:
        return range(1, self.state.m + 1)

    def is_action(self, player: int, action) -> bool:
        return type(action) is int and 1 <= action <= self.state.m

    def payoffs(self, profile: tuple) -> tuple:
        try:
            return self._cache[profile]
        except KeyError:
            value = self._cache[profile] = stage_payoffs(self.state, profile)
            return value

    def initial_signals(self) -> tuple:
        # each bidder learns her own valuation and nothing else
        return self.state.values


@dataclass(frozen=True)
class MatrixGame:
    """One of the two-player matrix games; the column player knows the label."""

    spec: MatrixGameSpec
    _cache: dict = field(default_factory=dict, compare=False, hash=False, repr=False)

    kind = "matrix"
    n = 2

    @property
    def m(self) -> int:
        return len(MATRIX_ACTIONS)

    @property
    def label(self) -> str:
        return self.spec.label

    def action_set(self, player: int) -> tuple:
        return MATRIX_ACTIONS

    def is_action(self, player: int, action) -> bool:
        return action in MATRIX_ACTIONS

    def payoffs(self, profile: tuple) -> tuple:
        try:
            return self._cache[profile]
        except KeyError:
            value = self._cache[profile] = dict(self.spec.table)[profile]
            return value

    def initial_signals(self) -> tuple:
        return (Opaque(), self.spec.label)


# -- monitors ---------------------------------------------------------------

class Monitor:
    """Per-player signal devices ``history -> signal`` for rounds t >= 1.

    ``recovery_round`` is the first round from which the device depends on
    the last action profile only; the engine never certifies a steady state
    that reaches back before it.
    """

    recovery_round = 1

    def initial(self, game) -> tuple:
        return game.initial_signals()

    def signals(self, history: Sequence[tuple], t: int) -> tuple:
        raise NotImplementedError


def auction_monitor(history: Sequence[Sequence[int]]) -> AuctionSignal:
    """Winning bid and number of winning bidders of the last round."""
    if not history:
        raise InvalidInput("auction monitor needs a non-empty history")
    top, count, _ = winning_bid(history[-1])
    return AuctionSignal(top, count)


class AuctionMonitor(Monitor):
    """Everyone sees the winning bid and the number of players who made it."""

    def __init__(self):
        self._cache = {}

    def signals(self, history, t):
        profile = history[t - 1]
        try:
            return self._cache[profile]
        except KeyError:
            top = max(profile)
            sig = AuctionSignal(top, profile.count(top))
            value = self._cache[profile] = (sig,) * len(profile)
            return value


class PayoffMonitor(Monitor):
    """Each player observes her own stage payoff."""

    def __init__(self, game):
        self.game = game
        self._cache = {}

    def signals(self, history, t):
        profile = history[t - 1]
        try:
            return self._cache[profile]
        except KeyError:
            value = self._cache[profile] = tuple(PayoffSignal(u) for u in self.game.payoffs(profile))
            return value


class TrivialMonitor(Monitor):
    """No monitoring: every player receives ``*`` after every round."""

    def signals(self, history, t):
        return (Opaque(),) * len(history[t - 1])


def default_monitor(game) -> Monitor:
    return AuctionMonitor() if game.kind == "auction" else PayoffMonitor(game)


# -- strategies ---------------------------------------------------------------

class Strategy:
    """A deterministic transducer from signals and own actions to actions.

    ``start`` resets the strategy and returns the round-1 action; each call
    to ``step`` consumes the signal and own action of the round just played
    and returns the action for the next round.

    Strategies with a finite state return a hashable ``summary()`` that
    fully determines their future behaviour. Strategies without one may
    implement ``lock_horizon`` instead.
    """

    spec = None

    def start(self, initial_signal):
        raise NotImplementedError

    def step(self, signal, own_action):
        raise NotImplementedError

    def summary(self) -> Hashable | None:
        return None

    def lock_horizon(self, period: int):
        """First round at which the action may leave the current ``period``-cycle.

        Called only for strategies whose ``summary()`` is None, and only when
        the last ``2 * period`` rounds are periodic. Returns ``math.inf`` for
        "never", or None when nothing can be certified.
        """
        return None

    def fast_forward(self, items: Sequence[tuple], k: int, action):
        """Consume ``k`` rounds whose (signal, own action) pairs cycle through ``items``.

        ``action`` is the currently pending action; the return value is the
        action after the last consumed round.
        """
        q = len(items)
        for j in range(k):
            action = self.step(*items[j % q])
        return action

    def __repr__(self):
        return f"<{type(self).__name__} {self.spec}>" if self.spec is not None else super().__repr__()


class Composed(Strategy):
    """Plays ``g`` for the first ``T`` rounds and ``f`` afterwards.

    ``f`` is fed every signal and every own action from round 1 on, so at
    round ``T + 1`` it sees the history that ``g`` produced.
    """

    def __init__(self, g: Strategy, f: Strategy, T: int):
        if T < 0:
            raise ValueError(f"prefix length must be >= 0, got {T}")
        self.g, self.f, self.T = g, f, T

    def start(self, initial_signal):
        self.t = 0  # rounds consumed
        a_g = self.g.start(initial_signal)
        a_f = self.f.start(initial_signal)
        return a_g if self.T >= 1 else a_f

    def step(self, signal, own_action):
        self.t += 1
        a_f = self.f.step(signal, own_action)
        if self.t < self.T:
            return self.g.step(signal, own_action)
        return a_f

    def summary(self):
        if self.t < self.T:
            return ("g", self.t, self.g.summary())
        s = self.f.summary()
        return None if s is None else ("f", s)

    def lock_horizon(self, period):
        # every compared round must already have been played by f
        if self.t - period + 1 <= self.T:
            return None
        return self.f.lock_horizon(period)

    def fast_forward(self, items, k, action):
        if self.t < self.T:
            return super().fast_forward(items, k, action)
        self.t += k
        return self.f.fast_forward(items, k, action)


def prefix_compose(g: Strategy, f: Strategy, T: int) -> Strategy:
    """Strategy that follows ``g`` in rounds 1..T and ``f`` from round T+1."""
    return Composed(g, f, T)


# -- play -------------------------------------------------------------------

class StrategyError(RuntimeError):
    """A strategy produced an action outside its action set."""

    def __init__(self, round_: int, player: int, action):
        super().__init__(f"round {round_}: player {player + 1} chose invalid action {action!r}")
        self.round = round_
        self.player = player
        self.action = action


@dataclass(frozen=True)
class Absorbed:
    profile: tuple
    since_round: int
    certified: bool = True

    @property
    def cycle(self) -> tuple:
        return (self.profile,)

    @property
    def entry_round(self) -> int:
        return self.since_round


@dataclass(frozen=True)
class Periodic:
    cycle: tuple
    entry_round: int
    certified: bool = True


@dataclass(frozen=True)
class Undetermined:
    pass


UNDETERMINED = Undetermined()


@dataclass
class PlayTrace:
    """The generated play. ``profiles[t - 1]`` is the action profile of round ``t``."""

    game: object
    profiles: list
    signals: list
    classification: object = UNDETERMINED

    @property
    def horizon(self) -> int:
        return len(self.profiles)

    @property
    def state(self):
        return getattr(self.game, "state", getattr(self.game, "spec", None))

    @property
    def payoffs(self) -> list:
        return [self.game.payoffs(p) for p in self.profiles]

    def actions(self, player: int) -> list:
        return [p[player] for p in self.profiles]


_RECENT = 4  # remembered occurrences per round key


class _Sim:
    """One simulation. In compact mode only a tail of the play is kept and
    skipped rounds are accounted for in ``counts``."""

    def __init__(self, game, monitor, strategies, horizon, *, early_stop, max_period, lock, compact):
        if horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {horizon}")
        if len(strategies) != game.n:
            raise ValueError(f"{len(strategies)} strategies for {game.n} players")
        self.game, self.monitor, self.strategies = game, monitor, strategies
        self.horizon, self.early_stop = horizon, early_stop
        self.max_period, self.lock, self.compact = max_period, lock, compact
        self.profiles: list = []
        self.signals: list = []
        self.keys: list = []
        self.off = 0  # rounds dropped from the front of the lists
        self.counts: Counter = Counter()
        self.run_start = 1  # first round of the current constant stretch
        self.classification = UNDETERMINED
        self.t = 0

    def go(self):
        game, monitor, strategies = self.game, self.monitor, self.strategies
        profiles, signals, keys = self.profiles, self.signals, self.keys
        horizon, compact, counts = self.horizon, self.compact, self.counts
        intern: dict = {}
        seen: dict = {}
        recovery = monitor.recovery_round
        init = monitor.initial(game)
        actions = [s.start(init[i]) for i, s in enumerate(strategies)]
        t = 0
        while t < horizon:
            t += 1
            for i, a in enumerate(actions):
                if not game.is_action(i, a):
                    raise StrategyError(t, i, a)
            profile = tuple(actions)
            if profiles and profile != profiles[-1]:
                self.run_start = t
            profiles.append(profile)
            if compact:
                counts[profile] += 1
            sig = monitor.signals(profiles, len(profiles))
            signals.append(sig)
            actions = [s.step(sig[i], profile[i]) for i, s in enumerate(strategies)]
            summaries = tuple(s.summary() for s in strategies)
            kid = intern.setdefault((profile, sig, summaries), len(intern))
            keys.append(kid)
            if not self.lock:
                continue
            previous = seen.get(kid)
            if previous is None:
                seen[kid] = [t]
                continue
            found = self._try_lock(t, previous, summaries, recovery)
            previous.append(t)
            if len(previous) > _RECENT:
                del previous[0]
            if found is None:
                continue
            q, until = found
            if until == inf:
                self.t = t
                self.classification = _steady(profiles, t - self.off, q)
                if not self.early_stop:
                    self._extend(t, q, horizon - t)
                    t = horizon
                break
            k = min(until - 1, horizon) - t
            if k <= 0:
                continue
            base = t - q - self.off
            for i, s in enumerate(strategies):
                items = [(signals[base + j][i], profiles[base + j][i]) for j in range(q)]
                actions[i] = s.fast_forward(items, k, actions[i])
            self._extend(t, q, k)
            for r in range(max(t + 1, t + k - 2 * q + 1), t + k + 1):
                occ = seen.setdefault(keys[r - 1 - self.off], [])
                occ.append(r)
                if len(occ) > _RECENT:
                    del occ[0]
            t += k
        self.t = t
        return self

    def _extend(self, t, q, k):
        """Append rounds t+1..t+k continuing the ``q``-cycle that ends at round t."""
        profiles, signals, keys = self.profiles, self.signals, self.keys
        base = t - q - self.off
        block = profiles[base:base + q]
        if any(p != block[0] for p in block):
            j, last = 1, (k - 1) % q
            while block[(last - j) % q] == block[last]:
                j += 1
            self.run_start = t + k - j + 1
        if not self.compact:
            for j in range(k):
                profiles.append(profiles[base + j])
                signals.append(signals[base + j])
                keys.append(keys[base + j])
            return
        full, rest = divmod(k, q)
        for j in range(q):
            self.counts[profiles[base + j]] += full + (j < rest)
        keep = min(t + k - self.off, 2 * self.max_period + 2)
        ext = min(k, keep)
        shift = (k - ext) % q
        reps = ext // q + 2
        for lst in (profiles, signals, keys):
            block = lst[base:base + q]
            rot = (block[shift:] + block[:shift]) * reps
            lst[:] = lst[len(lst) - (keep - ext):] + rot[:ext] if keep > ext else rot[:ext]
        self.off = t + k - keep

    def _try_lock(self, t, previous, summaries, recovery):
        keys, off = self.keys, self.off
        finite = all(s is not None for s in summaries)
        for r in reversed(previous):
            q = t - r
            if finite:
                # identical joint state after rounds r and t
                if r + 1 >= recovery and q <= t - off:
                    return q, inf
                continue
            if q > self.max_period or t - 2 * q + 1 < max(recovery, off + 1):
                continue
            a = t - off
            if keys[a - 2 * q:a - q] != keys[a - q:a]:
                continue
            until = inf
            for s, summ in zip(self.strategies, summaries):
                if summ is not None:
                    continue
                h = s.lock_horizon(q)
                if h is None:
                    until = None
                    break
                until = min(until, h)
            if until is not None:
                return q, until
        return None


def _steady(profiles, a, q):
    # ``a`` is the list position of the last simulated round
    block = profiles[a - q:a]
    p = next(d for d in range(1, q + 1) if q % d == 0 and block == block[d:] + block[:d])
    start = a - p + 1  # 1-based list position
    while start > 1 and profiles[start - 2] == profiles[start + p - 2]:
        start -= 1
    cycle = tuple(profiles[start - 1:start - 1 + p])
    return cycle, start


def _classify(steady, off, certified=True):
    cycle, start = steady
    if len(cycle) == 1:
        return Absorbed(cycle[0], start + off, certified)
    return Periodic(cycle, start + off, certified)


def run(game, monitor: Monitor, strategies: Sequence[Strategy], horizon: int, *,
        early_stop: bool = False, max_period: int = 64, heuristic: bool = True,
        lock: bool = True) -> PlayTrace:
    """Generate the play of ``strategies`` at ``game`` for ``horizon`` rounds.

    With ``early_stop`` the simulation ends as soon as a steady state is
    certified; the trace then holds fewer than ``horizon`` rounds but its
    classification describes the whole infinite play. ``lock=False`` steps
    through every round and never classifies (reference behaviour).
    """
    sim = _Sim(game, monitor, strategies, horizon, early_stop=early_stop,
               max_period=max_period, lock=lock, compact=False).go()
    trace = PlayTrace(game, sim.profiles, sim.signals)
    if sim.classification is not UNDETERMINED:
        trace.classification = _classify(sim.classification, 0)
    elif heuristic and lock:
        trace.classification = _heuristic_absorption(game, monitor, strategies, sim)
    return trace


class Outcome(NamedTuple):
    """What a simulation says about the infinite play: a steady state, or the
    profile counts of the simulated horizon when none was found."""

    classification: object
    counts: Counter
    rounds: int

    def value(self, game, player: int) -> LongRun:
        c = self.classification
        if isinstance(c, (Absorbed, Periodic)):
            total = sum((game.payoffs(p)[player] for p in c.cycle), Fraction(0))
            return LongRun(total / len(c.cycle), c.certified)
        total = sum((game.payoffs(p)[player] * k for p, k in self.counts.items()), Fraction(0))
        return LongRun(total / self.rounds, False)

    def longrun(self, game) -> tuple:
        c = self.classification
        if isinstance(c, (Absorbed, Periodic)):
            return tuple(LongRun(v, c.certified) for v in _cycle_mean(game, c.cycle))
        totals = [Fraction(0)] * game.n
        for p, k in self.counts.items():
            for i, u in enumerate(game.payoffs(p)):
                totals[i] += u * k
        return tuple(LongRun(x / self.rounds, False) for x in totals)


def play_outcome(game, monitor: Monitor, strategies: Sequence[Strategy], horizon: int, *,
                 max_period: int = 64, heuristic: bool = True) -> Outcome:
    sim = _Sim(game, monitor, strategies, horizon, early_stop=True,
               max_period=max_period, lock=True, compact=True).go()
    if sim.classification is not UNDETERMINED:
        c = _classify(sim.classification, sim.off)
    elif heuristic:
        c = _heuristic_absorption(game, monitor, strategies, sim)
    else:
        c = UNDETERMINED
    return Outcome(c, sim.counts, sim.t)


def evaluate(game, monitor: Monitor, strategies: Sequence[Strategy], horizon: int, *,
             max_period: int = 64, heuristic: bool = True) -> tuple:
    """Long-run payoff of every player without materialising the play.

    Same semantics as ``longrun_payoff`` applied to ``run(...)``, at a
    fraction of the cost for long horizons.
    """
    out = play_outcome(game, monitor, strategies, horizon, max_period=max_period, heuristic=heuristic)
    return out.longrun(game)


def _cycle_mean(game, cycle):
    sums = [Fraction(0)] * game.n
    for p in cycle:
        for i, u in enumerate(game.payoffs(p)):
            sums[i] += u
    return [s / len(cycle) for s in sums]


def _heuristic_absorption(game, monitor, strategies, sim):
    """Fallback for strategies that certify nothing: a long constant tail,
    confirmed by re-simulating to twice the point where it became long."""
    H = sim.t
    run_len = max(2 * game.m, 50)
    s = sim.run_start
    if H - s + 1 < run_len:
        return UNDETERMINED
    last = sim.profiles[-1]
    point = s + run_len - 1
    if H < 2 * point:
        longer = _Sim(game, monitor, strategies, 2 * point, early_stop=False,
                      max_period=sim.max_period, lock=True, compact=True).go()
        if longer.run_start > s or longer.profiles[-1] != last:
            return UNDETERMINED
    return Absorbed(last, s, certified=False)


# -- payoff evaluation --------------------------------------------------------

def average_payoff(trace: PlayTrace, player: int, through_round: int | None = None) -> Fraction:
    """Exact mean stage payoff of ``player`` over rounds 1..through_round."""
    T = trace.horizon if through_round is None else through_round
    if not 1 <= T <= trace.horizon:
        raise ValueError(f"through_round {T} outside 1..{trace.horizon}")
    counts = Counter(trace.profiles[:T])
    total = sum((trace.game.payoffs(p)[player] * c for p, c in counts.items()), Fraction(0))
    return total / T


class LongRun(NamedTuple):
    value: Fraction
    exact: bool


def longrun_payoff(trace: PlayTrace, player: int) -> LongRun:
    """Long-run average payoff; exact when the steady state is certified."""
    c = trace.classification
    if isinstance(c, (Absorbed, Periodic)):
        cycle = c.cycle
        value = sum((trace.game.payoffs(p)[player] for p in cycle), Fraction(0)) / len(cycle)
        return LongRun(value, c.certified)
    return LongRun(average_payoff(trace, player), False)


@dataclass(frozen=True)
class PayoffSummary:
    player: int
    running_average: Fraction
    longrun: Fraction
    exact_longrun: bool


def summarize(trace: PlayTrace) -> list:
    out = []
    for i in range(trace.game.n):
        lr = longrun_payoff(trace, i)
        out.append(PayoffSummary(i, average_payoff(trace, i), lr.value, lr.exact))
    return out
