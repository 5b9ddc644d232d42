"""Concrete strategies: the MaxBid learning rule with its window functions,
the alternation machine for the matrix games, and simple deviators.

Every strategy has a hashable *spec* (a frozen dataclass) that prints in
the scenario-config syntax and builds fresh strategy instances.
"""
from __future__ import annotations

from bisect import bisect_left
from collections import deque
from dataclasses import dataclass
from math import inf
from typing import Hashable, Sequence

from .core import Composed, Strategy

# ---------------------------------------------------------------------------
# window functions


@dataclass(frozen=True)
class Window:
    """How many past rounds MaxBid consults at round ``t``.

    ``kind`` is one of ``constant`` (``min(k, t - 1)``), ``full`` (``t - 1``),
    ``half`` (``ceil(t / 2)``) or ``table`` (explicit values for t = 2, 3, ...,
    the last value repeated afterwards).
    """

    kind: str
    k: int = 1
    table: tuple = ()

    def __post_init__(self):
        if self.kind not in ("constant", "full", "half", "table"):
            raise ValueError(f"unknown window kind {self.kind!r}")
        if self.kind == "constant" and self.k < 1:
            raise ValueError(f"constant window needs k >= 1, got {self.k}")
        if self.kind == "table":
            table = tuple(int(x) for x in self.table)
            object.__setattr__(self, "table", table)
            if not table:
                raise ValueError("table window needs at least one value")
            prev = 1
            for t, phi in enumerate(table, start=2):
                if not 1 <= phi <= t - 1:
                    raise ValueError(f"table window: phi({t}) = {phi} outside [1, {t - 1}]")
                if phi < prev:
                    raise ValueError(f"table window decreases at t = {t}")
                prev = phi

    @classmethod
    def constant(cls, k: int) -> "Window":
        return cls("constant", k=k)

    @classmethod
    def full(cls) -> "Window":
        return cls("full")

    @classmethod
    def half(cls) -> "Window":
        return cls("half")

    @classmethod
    def from_table(cls, values: Sequence[int]) -> "Window":
        return cls("table", table=tuple(values))

    def __call__(self, t: int) -> int:
        if t < 2:
            raise ValueError(f"window defined for t >= 2, got {t}")
        if self.kind == "full":
            return t - 1
        if self.kind == "half":
            return (t + 1) // 2
        if self.kind == "constant":
            return min(self.k, t - 1)
        i = t - 2
        return self.table[i] if i < len(self.table) else self.table[-1]

    def left(self, t: int) -> int:
        """First round of the window used at round ``t``."""
        return t - self(t)

    @property
    def diverges(self) -> bool:
        return self.kind in ("full", "half")

    @property
    def complement_diverges(self) -> bool:
        if self.kind == "full":
            return False
        if self.kind == "table":
            return self.left_monotone_from(2)
        return True

    @property
    def bounded(self) -> bool:
        return not self.diverges

    def _table_end(self) -> int:
        return len(self.table) + 1  # last round with an explicit value

    def left_monotone_from(self, t: int) -> bool:
        if self.kind != "table":
            return True
        end = self._table_end()
        return all(self.left(r) <= self.left(r + 1) for r in range(max(t, 2), end + 1))

    def first_round_left_exceeds(self, j: int, start: int):
        """Smallest round ``r >= start`` whose window starts after round ``j``."""
        if self.left(start) > j:
            return start
        if self.kind == "full":
            return inf
        if self.kind == "half":
            return max(start, 2 * j + 2)
        if self.kind == "constant":
            return max(start, j + self.k + 1)
        r = start
        while r <= self._table_end():
            if self.left(r) > j:
                return r
            r += 1
        return max(r, j + self.table[-1] + 1)

    def __str__(self) -> str:
        if self.kind == "constant":
            return f"const({self.k})"
        if self.kind == "table":
            return "table(" + ",".join(map(str, self.table)) + ")"
        return self.kind


# ---------------------------------------------------------------------------
# MaxBid


@dataclass(frozen=True)
class MaxBidConfig:
    window: Window
    floor: int = 2

    def __post_init__(self):
        if self.floor not in (1, 2):
            raise ValueError(f"decrement floor must be 1 or 2, got {self.floor}")


def observed_max(own_bids: Sequence[int], signals: Sequence[tuple]) -> int | None:
    """Highest winning bid in the window among rounds the player did not win alone.

    Returns None when the player was the unique highest bidder in every
    window round. ``signals`` holds (winning bid, winner count) pairs aligned
    with ``own_bids``.
    """
    if len(own_bids) != len(signals) or not own_bids:
        raise ValueError("window slices must be non-empty and aligned")
    qualifying = [M for x, (M, count) in zip(own_bids, signals) if x < M or count > 1]
    return max(qualifying) if qualifying else None


def maxbid_next(valuation: int, config: MaxBidConfig, t: int, previous: int,
                observed: int | None) -> int:
    """MaxBid's bid at round ``t >= 2``.

    Outbid the best rival by one, capped at ``valuation - 1``. A player who
    won alone throughout the window probes one step down, but not below the
    configured floor.
    """
    if t < 2:
        raise ValueError("round 1 always bids 1")
    if valuation == 1:
        return 1
    if observed is None:
        return min(max(previous - 1, config.floor), valuation - 1)
    return min(observed + 1, valuation - 1)


_OBS_LOG = 130


class MaxBid(Strategy):
    """MaxBid over a window function.

    Qualifying rounds are kept on a stack of strictly decreasing winning
    bids, so the maximum over any suffix of the history is one bisection
    away and the stack never holds more than ``m`` entries.
    """

    def __init__(self, config: MaxBidConfig, valuation: int | None = None, spec=None):
        self.config = config
        self.window = config.window
        self.valuation = valuation
        self.spec = spec

    def start(self, initial_signal):
        self.v = int(self.valuation if self.valuation is not None else initial_signal)
        if self.v < 1:
            raise ValueError(f"valuation must be >= 1, got {self.v}")
        self.t = 1
        self.idx: list = []
        self.val: list = []
        self.prev = 1
        self.pending = 1
        self.obs: deque = deque(maxlen=_OBS_LOG)
        return 1

    def _push(self, r, own, signal):
        M, count = signal
        if own < M or count > 1:
            idx, val = self.idx, self.val
            while val and val[-1] <= M:
                val.pop()
                idx.pop()
            idx.append(r)
            val.append(M)

    def step(self, signal, own_action):
        self._push(self.t, own_action, signal)
        self.prev = own_action
        self.t += 1
        return self._decide()

    def _observe(self, t):
        pos = bisect_left(self.idx, self.window.left(t))
        return self.val[pos] if pos < len(self.val) else None

    def _decide(self):
        t = self.t
        if self.v == 1:
            self.pending = 1
            return 1
        observed = self._observe(t)
        self.obs.append(observed)
        self.pending = maxbid_next(self.v, self.config, t, self.prev, observed)
        return self.pending

    def summary(self):
        if self.v == 1:
            return ("v1",)
        w = self.window
        if w.diverges or (w.kind == "table" and self.t <= w._table_end()):
            return None
        t = self.t
        pos = bisect_left(self.idx, w.left(t + 1))
        live = tuple((t - i, m) for i, m in zip(self.idx[pos:], self.val[pos:]))
        return (live, self.pending, self.prev, min(t, w(max(t, 2)) + 2))

    def lock_horizon(self, period):
        q = period
        t = self.t  # pending round; rounds 1..t-1 consumed
        r0 = t + 1
        w = self.window
        if w(r0) < q or not w.left_monotone_from(r0) or len(self.obs) < q + 1:
            return None
        e = t - 2 * q  # first round of the verified periodic stretch
        idx, val = self.idx, self.val
        cyc = bisect_left(idx, t - q)
        pos = bisect_left(idx, w.left(r0))
        if pos < cyc:
            j = idx[pos]
            if j >= e:
                return None
            target = val[pos]
            until = w.first_round_left_exceeds(j, r0)
        else:
            target = val[cyc] if cyc < len(val) else None
            until = inf
        obs = self.obs
        for o in list(obs)[-(q + 1):]:
            if o != target:
                return None
        return until

    def fast_forward(self, items, k, action):
        q = len(items)
        start = self.t
        last_obs = self.obs[-1] if self.obs else None
        for r in range(start + max(0, k - q), start + k):
            sig, own = items[(r - start) % q]
            self._push(r, own, sig)
        self.prev = items[(k - 1) % q][1]
        for _ in range(min(k - 1, _OBS_LOG)):
            self.obs.append(last_obs)
        self.t = start + k
        return self._decide()


def maxbid_strategy(valuation: int | None, config: MaxBidConfig) -> MaxBid:
    """MaxBid for a player; with ``valuation=None`` it reads the initial signal."""
    return MaxBid(config, valuation)


# ---------------------------------------------------------------------------
# signal-blind deviators


class Periodic(Strategy):
    """Plays ``prefix`` and then repeats ``cycle`` forever, ignoring signals."""

    def __init__(self, prefix: Sequence[Hashable], cycle: Sequence[Hashable], spec=None):
        if not cycle:
            raise ValueError("cycle must be non-empty")
        self.prefix = tuple(prefix)
        self.cycle = tuple(cycle)
        self.spec = spec

    def _action(self):
        p = self.pos
        if p < len(self.prefix):
            return self.prefix[p]
        return self.cycle[(p - len(self.prefix)) % len(self.cycle)]

    def start(self, initial_signal):
        self.pos = 0
        return self._action()

    def step(self, signal, own_action):
        self.pos += 1
        return self._action()

    def summary(self):
        p = self.pos - len(self.prefix)
        return ("p", self.pos) if p < 0 else ("c", p % len(self.cycle))

    def fast_forward(self, items, k, action):
        self.pos += k
        return self._action()


class Constant(Periodic):
    def __init__(self, action: Hashable, spec=None):
        super().__init__((), (action,), spec)

    def summary(self):
        return ()


def constant_strategy(action: Hashable) -> Strategy:
    return Constant(action, ConstantSpec(action))


def periodic_strategy(prefix: Sequence[Hashable], cycle: Sequence[Hashable]) -> Strategy:
    return Periodic(prefix, cycle, PeriodicSpec(tuple(prefix), tuple(cycle)))


# ---------------------------------------------------------------------------
# alternation machine for the matrix games


class Ex21Machine(Strategy):
    """Plays ``a`` first, then follows one of the alternating payoff patterns.

    On the pattern 1, 5, 1, 5, ... it answers a trailing 1 with ``b`` and a
    trailing 5 with ``a``; on 5, 1, 5, 1, ... the other way round. Any other
    payoff history sends it to ``n`` forever.
    """

    START = "start"
    P15_LAST1 = "p15-last1"
    P15_LAST5 = "p15-last5"
    P51_LAST1 = "p51-last1"
    P51_LAST5 = "p51-last5"
    BROKEN = "broken"

    _EMIT = {START: "a", P15_LAST1: "b", P15_LAST5: "a", P51_LAST1: "a", P51_LAST5: "b", BROKEN: "n"}
    _NEXT = {
        (START, 1): P15_LAST1,
        (START, 5): P51_LAST5,
        (P15_LAST1, 5): P15_LAST5,
        (P15_LAST5, 1): P15_LAST1,
        (P51_LAST5, 1): P51_LAST1,
        (P51_LAST1, 5): P51_LAST5,
    }

    def __init__(self, spec=None):
        self.spec = spec

    def start(self, initial_signal):
        self.state = self.START
        return "a"

    def step(self, signal, own_action):
        (payoff,) = signal
        self.state = self._NEXT.get((self.state, payoff), self.BROKEN)
        return self._EMIT[self.state]

    def summary(self):
        return self.state


def ex21_strategy() -> Strategy:
    return Ex21Machine(Ex21Spec())


# ---------------------------------------------------------------------------
# specs


def _fmt_action(a) -> str:
    return str(a)


@dataclass(frozen=True)
class MaxBidSpec:
    window: Window
    floor: int = 2

    def build(self) -> Strategy:
        return MaxBid(MaxBidConfig(self.window, self.floor), spec=self)

    def canonical(self):
        return self

    def actions(self):
        return ()

    oblivious = False

    def __str__(self):
        return f"maxbid(window={self.window}, floor={self.floor})"


@dataclass(frozen=True)
class ConstantSpec:
    action: Hashable

    def build(self) -> Strategy:
        return Constant(self.action, spec=self)

    def canonical(self):
        return PeriodicSpec((), (self.action,))

    def actions(self):
        return (self.action,)

    oblivious = True  # ignores signals and initial information

    def __str__(self):
        return f"constant({_fmt_action(self.action)})"


@dataclass(frozen=True)
class PeriodicSpec:
    prefix: tuple
    cycle: tuple

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(self.prefix))
        object.__setattr__(self, "cycle", tuple(self.cycle))
        if not self.cycle:
            raise ValueError("periodic cycle must be non-empty")

    def build(self) -> Strategy:
        return Periodic(self.prefix, self.cycle, spec=self)

    def canonical(self) -> "PeriodicSpec":
        """Shortest (prefix, cycle) producing the same action sequence."""
        cycle = self.cycle
        q = len(cycle)
        p = next(d for d in range(1, q + 1) if q % d == 0 and cycle == cycle[d:] + cycle[:d])
        cycle = cycle[:p]
        prefix = list(self.prefix)
        while prefix and prefix[-1] == cycle[-1]:
            prefix.pop()
            cycle = cycle[-1:] + cycle[:-1]
        return PeriodicSpec(tuple(prefix), cycle)

    def actions(self):
        return self.prefix + self.cycle

    oblivious = True

    def __str__(self):
        return "periodic(" + ",".join(map(_fmt_action, self.prefix)) + ";" + ",".join(map(_fmt_action, self.cycle)) + ")"


@dataclass(frozen=True)
class Ex21Spec:
    def build(self) -> Strategy:
        return Ex21Machine(spec=self)

    def canonical(self):
        return self

    def actions(self):
        return ()

    oblivious = False

    def __str__(self):
        return "ex21"


@dataclass(frozen=True)
class ComposeSpec:
    g: object
    f: object
    T: int

    def build(self) -> Strategy:
        s = Composed(self.g.build(), self.f.build(), self.T)
        s.spec = self
        return s

    def canonical(self):
        if self.T == 0:
            return self.f.canonical()
        return ComposeSpec(self.g.canonical(), self.f.canonical(), self.T)

    def actions(self):
        return self.g.actions() + self.f.actions()

    @property
    def oblivious(self):
        return self.g.oblivious and self.f.oblivious

    def __str__(self):
        return f"compose({self.g}, {self.f}, {self.T})"
