"""One-shot stage games: the discrete first-price auction and the two 3x3
matrix games used to illustrate (robust) learning equilibrium.

Players are 0-based indices in the Python API. Payoffs are exact
``Fraction`` values; tie-splitting never touches floating point.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Hashable, Iterable, NamedTuple, Sequence

BidProfile = tuple  # tuple[int, ...]
PayoffVector = tuple  # tuple[Fraction, ...]


class InvalidInput(ValueError):
    """Raised for malformed states, profiles or action labels."""


@dataclass(frozen=True)
class ValuationState:
    """Vector of private valuations, each in ``1..m``."""

    values: tuple
    m: int

    def __post_init__(self):
        values = tuple(int(v) for v in self.values)
        object.__setattr__(self, "values", values)
        if len(values) < 2:
            raise InvalidInput(f"need at least 2 players, got {len(values)}")
        if self.m < 1:
            raise InvalidInput(f"m must be >= 1, got {self.m}")
        bad = [v for v in values if not 1 <= v <= self.m]
        if bad:
            raise InvalidInput(f"valuations {bad} outside [1, {self.m}]")

    @property
    def n(self) -> int:
        return len(self.values)

    def second_highest(self) -> int:
        return sorted(self.values, reverse=True)[1]

    def __str__(self) -> str:
        return ",".join(map(str, self.values))


def check_profile(profile: Sequence[int], n: int, m: int) -> BidProfile:
    profile = tuple(profile)
    if len(profile) != n:
        raise InvalidInput(f"profile {profile} has length {len(profile)}, expected {n}")
    for b in profile:
        if isinstance(b, bool) or not isinstance(b, int) or not 1 <= b <= m:
            raise InvalidInput(f"bid {b!r} outside [1, {m}]")
    return profile


class WinningBid(NamedTuple):
    max_bid: int
    winner_count: int
    winners: frozenset


def winning_bid(profile: Sequence[int], m: int | None = None) -> WinningBid:
    """Highest bid, number of highest bidders and their (0-based) ids."""
    profile = tuple(profile)
    if not profile:
        raise InvalidInput("empty bid profile")
    check_profile(profile, len(profile), m if m is not None else max(max(profile), 1))
    top = max(profile)
    winners = frozenset(i for i, b in enumerate(profile) if b == top)
    return WinningBid(top, len(winners), winners)


def stage_payoffs(state: ValuationState, profile: Sequence[int]) -> PayoffVector:
    """First-price payoffs with fair tie-breaking taken in expectation.

    A highest bidder gets ``(v_i - M) / |N|``; everyone else gets 0. The
    value can be negative when a winner bids above her valuation.
    """
    profile = check_profile(profile, state.n, state.m)
    top = max(profile)
    count = profile.count(top)
    return tuple(
        Fraction(v - top, count) if b == top else Fraction(0)
        for v, b in zip(state.values, profile)
    )


def one_stage_equilibrium(state: ValuationState) -> BidProfile:
    """The pure equilibrium profile of the one-shot auction.

    Valuation-1 players bid 1, everyone else bids ``v_i - 1`` except a
    unique highest-valuation player, who bids the second-highest valuation.
    """
    values = state.values
    top = max(values)
    unique_top = values.count(top) == 1
    second = state.second_highest()
    bids = []
    for v in values:
        if v == 1:
            bids.append(1)
        elif v == top and unique_top:
            bids.append(second)
        else:
            bids.append(v - 1)
    return tuple(bids)


class NashCheck(NamedTuple):
    passed: bool
    player: int | None = None
    deviation: Hashable | None = None
    gain: Fraction | None = None

    def __bool__(self) -> bool:
        return self.passed


def verify_one_stage_nash(
    payoff_fn: Callable[[tuple], Sequence[Fraction]],
    profile: Sequence[Hashable],
    actions: Iterable[Hashable] | Sequence[Iterable[Hashable]],
) -> NashCheck:
    """Brute-force check that no unilateral deviation strictly pays.

    ``actions`` is either one action set shared by every player or one set
    per player. On failure the witness is the deviation with the largest
    gain; ties go to the smallest action, then the smallest player id.
    """
    profile = tuple(profile)
    n = len(profile)
    action_sets = _per_player(actions, n)
    base = payoff_fn(profile)
    best = None  # (gain, action, player)
    for i in range(n):
        for a in sorted(action_sets[i]):
            if a == profile[i]:
                continue
            dev = profile[:i] + (a,) + profile[i + 1:]
            gain = payoff_fn(dev)[i] - base[i]
            if gain > 0 and (best is None or gain > best[0]):
                best = (gain, a, i)
    if best is None:
        return NashCheck(True)
    gain, a, i = best
    return NashCheck(False, i, a, gain)


def _per_player(actions, n):
    actions = list(actions)
    if actions and all(isinstance(a, (list, tuple, range, set, frozenset)) for a in actions):
        if len(actions) != n:
            raise InvalidInput(f"expected {n} action sets, got {len(actions)}")
        return [list(a) for a in actions]
    return [actions] * n


def auction_states(n: int, m: int, min_second: int = 1):
    """All valuation states in ``{1..m}^n`` whose second-highest value is at least ``min_second``."""
    for values in itertools.product(range(1, m + 1), repeat=n):
        if sorted(values, reverse=True)[1] >= min_second:
            yield ValuationState(values, m)


# -- matrix games ---------------------------------------------------------

MATRIX_ACTIONS = ("a", "b", "n")


@dataclass(frozen=True)
class MatrixGameSpec:
    label: str
    table: tuple  # ((row_action, col_action), (u_row, u_col)) pairs

    def payoffs(self, actions: Sequence[str]) -> tuple:
        return matrix_stage_payoffs(self, actions)


def _table(rows):
    cells = {}
    for r, row in zip(MATRIX_ACTIONS, rows):
        for c, pair in zip(MATRIX_ACTIONS, row):
            cells[(r, c)] = (Fraction(pair[0]), Fraction(pair[1]))
    return tuple(sorted(cells.items()))


EX21_GAMES = {
    "A": MatrixGameSpec("A", _table([
        [(1, 1), (6, 0), (0, 0)],
        [(0, 6), (5, 5), (1, 0)],
        [(0, 0), (0, 0), (0, 0)],
    ])),
    "B": MatrixGameSpec("B", _table([
        [(5, 5), (0, 6), (0, 0)],
        [(6, 0), (1, 1), (0, 0)],
        [(0, 0), (0, 0), (0, 0)],
    ])),
}


def matrix_stage_payoffs(spec: MatrixGameSpec, actions: Sequence[str]) -> tuple:
    actions = tuple(actions)
    if len(actions) != 2 or any(a not in MATRIX_ACTIONS for a in actions):
        raise InvalidInput(f"actions {actions!r} not a pair from {MATRIX_ACTIONS}")
    return dict(spec.table)[actions]
