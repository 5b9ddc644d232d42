"""Equilibrium verification over finite deviation families.

The learning-equilibrium notions quantify over every strategy of a player.
Here that quantifier ranges over an explicit finite family (the known
counterexample witnesses, all constant bids, all short eventually-periodic
sequences), so a passing verdict is evidence over that family and never a
proof.

A deviation replaces the deviating player's whole strategy, prefix included;
the baseline is the (possibly prefix-composed, possibly failure-augmented)
profile itself.
"""
from __future__ import annotations

import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

from .core import (
    Absorbed,
    AuctionGame,
    LongRun,
    MatrixGame,
    Outcome,
    Periodic,
    PlayTrace,
    default_monitor,
    play_outcome,
    run,
)
from .failures import IDENTITY, FailureSchedule, apply_failures, enumerate_lifted, validate_recovery
from .stage import EX21_GAMES, MatrixGameSpec, ValuationState, one_stage_equilibrium
from .strategies import ComposeSpec, ConstantSpec, PeriodicSpec

log = logging.getLogger(__name__)

DEFAULT_HORIZON = 10_000
DEFAULT_TOLERANCE = Fraction(1, 100)
DEFAULT_BUDGET = 100_000


def make_game(state):
    """Coerce a valuation state, matrix label or game object to a game."""
    if isinstance(state, (AuctionGame, MatrixGame)):
        return state
    if isinstance(state, ValuationState):
        return AuctionGame(state)
    if isinstance(state, MatrixGameSpec):
        return MatrixGame(state)
    if isinstance(state, str) and state in EX21_GAMES:
        return MatrixGame(EX21_GAMES[state])
    raise TypeError(f"cannot make a game from {state!r}")


# -- scenarios ------------------------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    """A repeated game at one state with one strategy spec per player."""

    game: object
    specs: tuple
    horizon: int = DEFAULT_HORIZON
    schedule: FailureSchedule = IDENTITY

    def __post_init__(self):
        object.__setattr__(self, "game", make_game(self.game))
        object.__setattr__(self, "specs", tuple(self.specs))
        if len(self.specs) != self.game.n:
            raise ValueError(f"{len(self.specs)} strategies for {self.game.n} players")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        self.schedule.validate()
        self.schedule.check_players(self.game.n)

    def monitor(self):
        return apply_failures(default_monitor(self.game), self.schedule)

    def strategies(self) -> list:
        return [s.build() for s in self.specs]

    def run(self, *, early_stop: bool = False) -> PlayTrace:
        return run(self.game, self.monitor(), self.strategies(), self.horizon, early_stop=early_stop)

    def longrun(self) -> tuple:
        """Long-run payoff of every player (memoized)."""
        return _outcome(self).longrun(self.game)

    def with_player(self, player: int, spec) -> "Scenario":
        specs = self.specs[:player] + (spec,) + self.specs[player + 1:]
        return Scenario(self.game, specs, self.horizon, self.schedule)


_CACHE: dict = {}
_CACHE_LIMIT = 400_000


def _outcome_key(sc: Scenario):
    specs = tuple(s.canonical() for s in sc.specs)
    g = sc.game
    if g.kind == "auction":
        # signals do not depend on valuations, so the play does not depend on
        # the valuation of a player whose strategy ignores it
        values = tuple(None if s.oblivious else v for s, v in zip(specs, g.state.values))
        gkey = ("auction", g.m, values)
    else:
        gkey = ("matrix", g.label)
    return gkey, specs, sc.horizon, sc.schedule


def _outcome(sc: Scenario) -> Outcome:
    key = _outcome_key(sc)
    hit = _CACHE.get(key)
    if hit is not None:
        return hit
    strategies = [s.build() for s in key[1]]
    out = play_outcome(sc.game, sc.monitor(), strategies, sc.horizon)
    if isinstance(out.classification, (Absorbed, Periodic)):
        out = Outcome(out.classification, None, out.rounds)
    if len(_CACHE) >= _CACHE_LIMIT:
        _CACHE.clear()
    _CACHE[key] = out
    return out


def clear_cache() -> None:
    _CACHE.clear()


# -- convergence -------------------------------------------------------------

@dataclass(frozen=True)
class ConvergedAt:
    round: int


@dataclass(frozen=True)
class DensityReport:
    density: Fraction
    window: tuple  # (first round, last round)


@dataclass(frozen=True)
class NotConverged:
    window: tuple


def convergence_round(trace: PlayTrace, state: ValuationState | None = None):
    """Round from which play sits at the one-shot equilibrium forever.

    Without an absorbed classification at that profile, report the share of
    equilibrium rounds over the trailing half of the trace instead.
    """
    state = state if state is not None else trace.state
    eq = one_stage_equilibrium(state)
    c = trace.classification
    if isinstance(c, Absorbed) and c.profile == eq:
        return ConvergedAt(c.since_round)
    H = trace.horizon
    first = H // 2 + 1
    hits = sum(1 for p in trace.profiles[first - 1:] if p == eq)
    if hits == 0:
        return NotConverged((first, H))
    return DensityReport(Fraction(hits, H - first + 1), (first, H))


def equilibrium_density(trace: PlayTrace, state: ValuationState | None = None, first: int = 1) -> Fraction:
    """Share of rounds ``first..H`` played at the one-shot equilibrium."""
    state = state if state is not None else trace.state
    eq = one_stage_equilibrium(state)
    tail = trace.profiles[first - 1:]
    return Fraction(sum(1 for p in tail if p == eq), len(tail))


# -- deviations ---------------------------------------------------------------

class Gain(NamedTuple):
    baseline: Fraction
    deviated: Fraction
    gain: Fraction
    exact: bool


def deviation_gain(scenario: Scenario, player: int, deviation) -> Gain:
    """Long-run payoff change when ``player`` alone switches to ``deviation``."""
    spec = getattr(deviation, "spec", None) or deviation
    base: LongRun = scenario.longrun()[player]
    dev: LongRun = scenario.with_player(player, spec).longrun()[player]
    return Gain(base.value, dev.value, dev.value - base.value, base.exact and dev.exact)


class FamilyTooLarge(RuntimeError):
    def __init__(self, size: int, budget: int):
        super().__init__(f"deviation family has up to {size} members, budget is {budget}")
        self.size = size
        self.budget = budget


def explicit_witnesses(game) -> list:
    if game.kind == "matrix":
        return [ConstantSpec("b")]
    specs = [PeriodicSpec((), (1, 1, 3)), ConstantSpec(5)]
    return [s for s in specs if all(game.is_action(0, a) for a in s.actions())]


@dataclass(frozen=True)
class DeviationFamily:
    """A union of finite strategy families, enumerated part by part.

    Parts are ``("witnesses",)``, ``("constant",)`` and
    ``("periodic", p, q)``: every sequence with a prefix of length <= p and
    a cycle of length <= q, ordered by prefix length, then period, then
    lexicographically. Members equal to an earlier one (same action
    sequence) are skipped.
    """

    parts: tuple

    @classmethod
    def witnesses(cls) -> "DeviationFamily":
        return cls((("witnesses",),))

    @classmethod
    def constant_all(cls) -> "DeviationFamily":
        return cls((("constant",),))

    @classmethod
    def periodic_exhaustive(cls, max_prefix: int, max_period: int) -> "DeviationFamily":
        if max_prefix < 0 or max_period < 1:
            raise ValueError("need max_prefix >= 0 and max_period >= 1")
        return cls((("periodic", max_prefix, max_period),))

    def __or__(self, other: "DeviationFamily") -> "DeviationFamily":
        return DeviationFamily(self.parts + other.parts)

    def size(self, game, player: int = 0) -> int:
        k = len(game.action_set(player))
        total = 0
        for part in self.parts:
            if part[0] == "witnesses":
                total += len(explicit_witnesses(game))
            elif part[0] == "constant":
                total += k
            else:
                _, p, q = part
                total += sum(k ** a for a in range(p + 1)) * sum(k ** b for b in range(1, q + 1))
        return total

    def members(self, game, player: int = 0):
        actions = tuple(game.action_set(player))
        seen = set()
        for part in self.parts:
            for spec in self._part(part, game, actions):
                c = spec.canonical()
                if c not in seen:
                    seen.add(c)
                    yield spec

    @staticmethod
    def _part(part, game, actions):
        if part[0] == "witnesses":
            yield from explicit_witnesses(game)
        elif part[0] == "constant":
            for a in actions:
                yield ConstantSpec(a)
        else:
            _, p, q = part
            for plen in range(p + 1):
                for qlen in range(1, q + 1):
                    for seq in itertools.product(actions, repeat=plen + qlen):
                        yield PeriodicSpec(seq[:plen], seq[plen:])

    def __str__(self):
        names = []
        for part in self.parts:
            if part[0] == "periodic":
                names.append(f"periodic(p<={part[1]}, q<={part[2]})")
            else:
                names.append(part[0])
        return " | ".join(names)


STANDARD_FAMILY = (DeviationFamily.witnesses() | DeviationFamily.constant_all()
                   | DeviationFamily.periodic_exhaustive(1, 3))


class BestDeviation(NamedTuple):
    deviation: object
    gain: Gain
    evaluated: int


def best_deviation(scenario: Scenario, player: int, family: DeviationFamily, *,
                   budget: int = DEFAULT_BUDGET) -> BestDeviation:
    """Largest-gain member of ``family``; ties keep the first in enumeration order."""
    size = family.size(scenario.game, player)
    if size > budget:
        raise FamilyTooLarge(size, budget)
    best = None
    count = 0
    for spec in family.members(scenario.game, player):
        g = deviation_gain(scenario, player, spec)
        count += 1
        if best is None or g.gain > best[1].gain:
            best = (spec, g)
    if best is None:
        raise ValueError("empty deviation family")
    return BestDeviation(best[0], best[1], count)


# -- verdicts -----------------------------------------------------------------

@dataclass(frozen=True)
class Witness:
    state: str
    context: str
    player: int  # 0-based
    deviation: str
    baseline: Fraction
    deviated: Fraction
    gain: Fraction
    exact: bool
    violates: bool

    def to_dict(self) -> dict:
        return {
            "state": self.state,
            "context": self.context,
            "player": self.player + 1,
            "deviation": self.deviation,
            "baseline": str(self.baseline),
            "deviated": str(self.deviated),
            "gain": str(self.gain),
            "exact": self.exact,
            "violates": self.violates,
        }


@dataclass
class Verdict:
    test: str
    passed: bool
    tolerance: Fraction
    family: str
    witnesses: list = field(default_factory=list)
    evaluated: int = 0
    note: str = "evidence over a finite deviation family, not a proof"

    def __bool__(self):
        return self.passed

    @property
    def failures(self) -> list:
        return [w for w in self.witnesses if w.violates]

    def to_dict(self) -> dict:
        return {
            "test": self.test,
            "passed": self.passed,
            "tolerance": str(self.tolerance),
            "family": self.family,
            "note": self.note,
            "evaluated_deviations": self.evaluated,
            "failures": [w.to_dict() for w in self.failures],
            "witnesses": [w.to_dict() for w in self.witnesses],
        }


def _violates(g: Gain, tolerance: Fraction) -> bool:
    return g.gain > (0 if g.exact else tolerance)


class _Unit(NamedTuple):
    scenario: Scenario
    context: str


def _deviation_key(sc: Scenario, player: int, blind: bool):
    """Everything the play after a deviation by ``player`` depends on."""
    specs = tuple(None if i == player else s.canonical() for i, s in enumerate(sc.specs))
    g = sc.game
    if g.kind == "auction":
        values = tuple(
            None if (i == player and blind) or (i != player and specs[i].oblivious) else v
            for i, v in enumerate(g.state.values))
        gkey = ("auction", g.m, values)
    else:
        gkey = ("matrix", g.label)
    return gkey, player, specs, sc.horizon, sc.schedule


def _best_in_group(args):
    """Best deviation for every (game, baseline) member of one group.

    All members share the play after any deviation, so each deviation is
    simulated once and only scored per member.
    """
    rep, player, members, deviations = args
    best = [None] * len(members)
    for spec in deviations:
        sc = rep.with_player(player, spec)
        out = play_outcome(sc.game, sc.monitor(), sc.strategies(), sc.horizon)
        for k, (game, base) in enumerate(members):
            dev = out.value(game, player)
            g = Gain(base.value, dev.value, dev.value - base.value, base.exact and dev.exact)
            if best[k] is None or g.gain > best[k][1].gain:
                best[k] = (spec, g)
    return best


def _verdict(test, units, family, tolerance, budget, jobs) -> Verdict:
    tolerance = Fraction(tolerance)
    for u in units:
        size = family.size(u.scenario.game)
        if size > budget:
            raise FamilyTooLarge(size, budget)
    members_of: dict = {}  # action set -> deviation list
    groups: dict = {}
    slots = []  # (unit index, player) -> (group key, member index)
    for ui, u in enumerate(units):
        sc = u.scenario
        base = sc.longrun()
        for i in range(sc.game.n):
            acts = tuple(sc.game.action_set(i))
            if acts not in members_of:
                members_of[acts] = list(family.members(sc.game, i))
            deviations = members_of[acts]
            blind = all(d.oblivious for d in deviations)
            key = (_deviation_key(sc, i, blind), acts)
            grp = groups.setdefault(key, [sc, i, [], deviations])
            grp[2].append((sc.game, base[i]))
            slots.append((ui, i, key, len(grp[2]) - 1))
    tasks = list(groups.values())
    log.info("%s: %d scenarios, %d deviation groups", test, len(units), len(tasks))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(jobs) as ex:
            results = list(ex.map(_best_in_group, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        results = [_best_in_group(t) for t in tasks]
    by_key = dict(zip(groups, results))
    verdict = Verdict(test, True, tolerance, str(family))
    for ui, i, key, k in slots:
        spec, g = by_key[key][k]
        u = units[ui]
        verdict.witnesses.append(Witness(u.scenario.game.label, u.context, i, str(spec), g.baseline,
                                         g.deviated, g.gain, g.exact, _violates(g, tolerance)))
        verdict.evaluated += len(groups[key][3])
    verdict.passed = not verdict.failures
    return verdict


def _profile_for(profile, game) -> tuple:
    if hasattr(profile, "build"):
        return (profile,) * game.n
    profile = tuple(profile)
    if len(profile) != game.n:
        raise ValueError(f"profile has {len(profile)} strategies, game has {game.n} players")
    return profile


@dataclass(frozen=True)
class ConstantPrefixes:
    """Every profile of constant actions, for each prefix length in ``lengths``."""

    lengths: tuple

    def members(self, game):
        for T in self.lengths:
            for acts in itertools.product(*(game.action_set(i) for i in range(game.n))):
                yield tuple(ConstantSpec(a) for a in acts), T

    def __str__(self):
        return f"all constant prefixes, T in {list(self.lengths)}"


def _prefix_members(prefixes, game):
    if hasattr(prefixes, "members"):
        return list(prefixes.members(game))
    return [(tuple(g), T) for g, T in prefixes]


def _prefix_context(g, T) -> str:
    return "prefix=(" + ", ".join(map(str, g)) + f") T={T}"


def le_test(profile, states: Iterable, family: DeviationFamily,
            tolerance=DEFAULT_TOLERANCE, *, horizon: int = DEFAULT_HORIZON,
            budget: int = DEFAULT_BUDGET, jobs: int = 1,
            schedule: FailureSchedule = IDENTITY) -> Verdict:
    """Is ``profile`` an equilibrium of the repeated game at every state?"""
    units = []
    for st in states:
        game = make_game(st)
        units.append(_Unit(Scenario(game, _profile_for(profile, game), horizon, schedule), ""))
    return _verdict("learning-equilibrium", units, family, tolerance, budget, jobs)


def _robust_units(profile, game, prefixes, horizon, schedule, tag=""):
    base = _profile_for(profile, game)
    units = []
    for g, T in _prefix_members(prefixes, game):
        if len(g) != game.n:
            raise ValueError(f"prefix profile {g} does not match {game.n} players")
        specs = tuple(ComposeSpec(gi, fi, T) for gi, fi in zip(g, base))
        units.append(_Unit(Scenario(game, specs, horizon, schedule), tag + _prefix_context(g, T)))
    return units


def robust_le_test(profile, states: Iterable, prefixes, family: DeviationFamily,
                   tolerance=DEFAULT_TOLERANCE, *, horizon: int = DEFAULT_HORIZON,
                   budget: int = DEFAULT_BUDGET, jobs: int = 1) -> Verdict:
    """Equilibrium check after every prefix profile in ``prefixes``.

    ``prefixes`` is a list of (prefix profile, T) pairs or an object with a
    ``members(game)`` method such as ``ConstantPrefixes``.
    """
    units = []
    for st in states:
        units += _robust_units(profile, make_game(st), prefixes, horizon, IDENTITY)
    return _verdict("robust-learning-equilibrium", units, family, tolerance, budget, jobs)


def check_schedules(schedules: Sequence[FailureSchedule], games: Sequence, *,
                    probe_horizon: int | None = None) -> None:
    """Reject malformed schedules before anything is simulated."""
    for sc in schedules:
        sc.validate()
        for game in games:
            sc.check_players(game.n)
            probe = max(probe_horizon or 0, sc.recovery_round + 5)
            actions = [tuple(game.action_set(i)) for i in range(game.n)]
            verdict = validate_recovery(sc, default_monitor(game), probe, actions, trials=20)
            if not verdict:
                raise ValueError(f"schedule {sc} does not recover: signal differs at round {verdict.witness_round}")


def f_robust_test(profile, states: Iterable, schedules: Sequence[FailureSchedule], prefixes,
                  family: DeviationFamily, tolerance=DEFAULT_TOLERANCE, *,
                  horizon: int = DEFAULT_HORIZON, budget: int = DEFAULT_BUDGET,
                  jobs: int = 1) -> Verdict:
    """Robust equilibrium check over every (state, failure schedule) pair."""
    games = [make_game(st) for st in states]
    check_schedules(schedules, games)
    units = []
    for lifted in enumerate_lifted(games, schedules):
        tag = f"schedule={lifted.schedule} "
        units += _robust_units(profile, lifted.state, prefixes, horizon, lifted.schedule, tag)
    return _verdict("f-robust-learning-equilibrium", units, family, tolerance, budget, jobs)
