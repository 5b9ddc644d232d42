"""Failure patterns: monitors that misreport signals for a finite number of
rounds and then behave exactly like the true monitor.

A schedule is a finite list of per-(round, player) overrides together with
a recovery round ``T``. Every override must be at a round before ``T``; from
round ``T`` on the faulty monitor agrees with the base monitor. Initial
information is never corrupted.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Hashable, NamedTuple, Sequence

from .core import Monitor


class InvalidSchedule(ValueError):
    """An override sits at or after the declared recovery round."""


@dataclass(frozen=True)
class FixedSignal:
    """Replace the true signal by ``signal``."""

    signal: Hashable

    def apply(self, true_signal):
        return self.signal

    def __str__(self):
        return "signal=(" + ",".join(map(str, self.signal)) + ")"


@dataclass(frozen=True)
class SignalMap:
    """Replace the true signal ``s`` by ``fn(s)``."""

    fn: Callable
    label: str = "map"

    def apply(self, true_signal):
        return self.fn(true_signal)

    def __str__(self):
        return f"map={self.label}"


@dataclass(frozen=True)
class Override:
    round: int
    player: int  # 0-based
    rule: object = None

    def __post_init__(self):
        if self.round < 1:
            raise InvalidSchedule(f"override round must be >= 1, got {self.round}")
        if self.player < 0:
            raise InvalidSchedule(f"override player must be >= 0, got {self.player}")


@dataclass(frozen=True)
class FailureSchedule:
    overrides: tuple = ()
    recovery_round: int = 1

    def __post_init__(self):
        key = lambda o: (o.round, o.player)
        object.__setattr__(self, "overrides", tuple(sorted(self.overrides, key=key)))
        if self.recovery_round < 1:
            raise InvalidSchedule(f"recovery round must be >= 1, got {self.recovery_round}")
        seen = set()
        for o in self.overrides:
            if key(o) in seen:
                raise InvalidSchedule(f"two overrides for round {o.round}, player {o.player + 1}")
            seen.add(key(o))

    @property
    def is_identity(self) -> bool:
        return not self.overrides

    def validate(self) -> "FailureSchedule":
        for o in self.overrides:
            if o.round >= self.recovery_round:
                raise InvalidSchedule(
                    f"override at round {o.round} (player {o.player + 1}) "
                    f"is not before recovery round {self.recovery_round}")
        return self

    def check_players(self, n: int) -> None:
        for o in self.overrides:
            if o.player >= n:
                raise InvalidSchedule(f"override names player {o.player + 1} but the game has {n}")

    def __str__(self):
        if self.is_identity:
            return "identity"
        parts = [f"fail(round={o.round}, player={o.player + 1}, {o.rule})" for o in self.overrides]
        return "; ".join(parts) + f"; recover={self.recovery_round}"


IDENTITY = FailureSchedule()


def fixed_corruption(rounds: Sequence[int], players: Sequence[int], signal, recovery_round: int) -> FailureSchedule:
    """Every listed player sees ``signal`` at every listed round."""
    rule = FixedSignal(tuple(signal) if not isinstance(signal, tuple) else signal)
    return FailureSchedule(
        tuple(Override(r, p, rule) for r in rounds for p in players), recovery_round
    ).validate()


class FaultyMonitor(Monitor):
    """The base monitor with the schedule's overrides applied."""

    def __init__(self, base: Monitor, schedule: FailureSchedule):
        self.base = base
        self.schedule = schedule
        self.recovery_round = max(base.recovery_round, schedule.recovery_round)
        self._by_round: dict = {}
        for o in schedule.overrides:
            self._by_round.setdefault(o.round, []).append(o)

    def initial(self, game):
        return self.base.initial(game)

    def signals(self, history, t):
        sig = self.base.signals(history, t)
        todo = self._by_round.get(t)
        if not todo:
            return sig
        sig = list(sig)
        for o in todo:
            sig[o.player] = o.rule.apply(sig[o.player])
        return tuple(sig)


def apply_failures(base: Monitor, schedule: FailureSchedule, *, check: bool = True) -> Monitor:
    """Monitor that follows ``schedule`` before its recovery round and ``base`` after."""
    if check:
        schedule.validate()
    if schedule.is_identity:
        return base
    return FaultyMonitor(base, schedule)


class RecoveryVerdict(NamedTuple):
    passed: bool
    recovery_round: int
    witness_round: int | None = None
    witness_player: int | None = None

    def __bool__(self):
        return self.passed


def validate_recovery(schedule: FailureSchedule, base: Monitor, probe_horizon: int,
                      actions: Sequence[Sequence], *, trials: int = 200,
                      seed: int = 0) -> RecoveryVerdict:
    """Probe random action histories for a signal difference at rounds >= T.

    ``actions`` holds one action set per player. The schedule is applied
    without the structural check, so malformed schedules are caught here by
    their behaviour.
    """
    T = schedule.recovery_round
    if probe_horizon < T:
        raise ValueError(f"probe horizon {probe_horizon} is before recovery round {T}")
    faulty = apply_failures(base, schedule, check=False)
    rng = random.Random(seed)
    pools = [list(a) for a in actions]
    for _ in range(trials):
        history = []
        for t in range(1, probe_horizon + 1):
            history.append(tuple(rng.choice(p) for p in pools))
            if t < T:
                continue
            got, want = faulty.signals(history, t), base.signals(history, t)
            if got != want:
                player = next(i for i, (a, b) in enumerate(zip(got, want)) if a != b)
                return RecoveryVerdict(False, T, t, player)
    return RecoveryVerdict(True, T)


@dataclass(frozen=True)
class LiftedState:
    state: object
    schedule: FailureSchedule


def enumerate_lifted(states: Sequence, schedules: Sequence[FailureSchedule]) -> list:
    """All (state, schedule) pairs; the identity schedule is always included."""
    schedules = list(schedules)
    if not any(s.is_identity for s in schedules):
        schedules.insert(0, IDENTITY)
    return [LiftedState(st, sc) for st in states for sc in schedules]
