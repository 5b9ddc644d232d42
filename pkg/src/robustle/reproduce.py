"""Pinned reproductions of the worked examples and the equilibrium sweeps.

Each check returns a ``Report`` whose ``lines`` name the first mismatch when
something diverges from the stored expectation.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction

from .config import loads
from .core import AuctionSignal, Absorbed, LongRun, Periodic
from .failures import IDENTITY, fixed_corruption
from .stage import (
    ValuationState,
    auction_states,
    one_stage_equilibrium,
    stage_payoffs,
    verify_one_stage_nash,
)
from .strategies import ComposeSpec, ConstantSpec, MaxBidSpec, Window
from .verify import (
    STANDARD_FAMILY,
    ConstantPrefixes,
    ConvergedAt,
    DeviationFamily,
    Scenario,
    convergence_round,
    deviation_gain,
    f_robust_test,
    le_test,
    robust_le_test,
)

CONFIGS = {
    "3.5": """\
game = auction
m = 7
state = 7,5
strategy = maxbid(window=full, floor=2)
horizon = 10
""",
    "3.6": """\
game = auction
m = 7
state = 7,5
strategy.1 = maxbid(window=const(1), floor=2)
strategy.2 = periodic(;1,1,3)
horizon = 30
""",
    "3.7": """\
game = auction
m = 7
state = 7,3
strategy.1 = compose(constant(2), maxbid(window=full, floor=2), 1)
strategy.2 = compose(constant(5), maxbid(window=full, floor=2), 1)
horizon = 10
""",
    "2.1": """\
game = matrix
state = A; B
strategy = ex21
horizon = 20
""",
}

# sweep bounds shared with the acceptance suite
SURROGATE_STATES = [s for m in range(2, 6) for s in auction_states(2, m, 2)]
PREFIX_LENGTHS = (1, 2, 5)
# the corrupted report "two players tied at 2" is a legal signal for every m >= 2
CORRUPT = AuctionSignal(2, 2)
SCHEDULES = (
    IDENTITY,
    fixed_corruption([1], [0], CORRUPT, 2),
    fixed_corruption([1, 2, 3], [0, 1], CORRUPT, 4),
)
HALF = MaxBidSpec(Window.half(), 2)
FULL = MaxBidSpec(Window.full(), 2)


@dataclass
class Report:
    id: str
    passed: bool = True
    lines: list = field(default_factory=list)
    seconds: float = 0.0
    detail: object = None

    def check(self, ok: bool, message: str) -> bool:
        self.lines.append(("ok   " if ok else "FAIL ") + message)
        if not ok:
            self.passed = False
        return ok


def _first_divergence(got, want):
    for t, (g, w) in enumerate(zip(got, want), 1):
        if g != w:
            return f"round {t}: expected {w}, got {g}"
    if len(got) < len(want):
        return f"round {len(got) + 1}: expected {want[len(got)]}, trace ended"
    return None


def _rows(report, got, want, label):
    diff = _first_divergence(list(got), list(want))
    report.check(diff is None, f"{label}" + ("" if diff is None else f" ({diff})"))


def _lr(report, got: LongRun, want: Fraction, label):
    report.check(got.exact and got.value == want,
                 f"{label}: long-run {got.value} ({'exact' if got.exact else 'inexact'}), expected {want} exact")


def ex35(r: Report):
    sc = loads(CONFIGS["3.5"]).scenarios()[0]
    tr = sc.run()
    _rows(r, tr.profiles[:6], [(1, 1), (2, 2), (3, 3), (4, 4), (5, 4), (5, 4)], "bid rows 1-6")
    c = tr.classification
    r.check(isinstance(c, Absorbed) and c.profile == (5, 4), f"classification {c}")
    conv = convergence_round(tr)
    r.check(conv == ConvergedAt(5), f"convergence {conv}, expected round 5")
    lr = sc.longrun()
    _lr(r, lr[0], Fraction(2), "player 1")
    _lr(r, lr[1], Fraction(0), "player 2")


def ex36(r: Report):
    sc = loads(CONFIGS["3.6"]).scenarios()[0]
    tr = sc.run()
    _rows(r, tr.actions(0)[:11], [1, 2, 2, 4, 3, 2, 4, 3, 2, 4, 3], "player 1 bids 1-11")
    r.check(isinstance(tr.classification, Periodic), f"classification {tr.classification}")
    _lr(r, sc.longrun()[1], Fraction(2, 3), "player 2 (periodic 1,1,3)")
    # the self-play baseline is recorded, not asserted
    self_play = Scenario(sc.game, (sc.specs[0], sc.specs[0]), sc.horizon)
    r.lines.append(f"note self-play baseline of player 2: {self_play.longrun()[1].value}")


def ex37(r: Report):
    sc = loads(CONFIGS["3.7"]).scenarios()[0]
    tr = sc.run()
    _rows(r, tr.profiles[:4], [(2, 5), (6, 2), (6, 2), (6, 2)], "bid rows 1-4")
    _lr(r, sc.longrun()[0], Fraction(1), "player 1")
    g = deviation_gain(sc, 0, ConstantSpec(5))
    r.check(g.exact and g.deviated == 2 and g.gain == 1,
            f"deviation to constant(5): {g.deviated} (gain {g.gain}), expected 2 (gain 1)")
    v = robust_le_test(FULL, [sc.game.state], [((ConstantSpec(2), ConstantSpec(5)), 1)],
                       DeviationFamily.witnesses(), 0)
    r.check(not v.passed and any(w.gain == 1 and w.exact for w in v.failures),
            "full-history pair is not robust (gain 1 witnessed)")


def ex21(r: Report):
    cfg = loads(CONFIGS["2.1"])
    for sc in cfg.scenarios():
        lr = sc.longrun()
        for i in range(2):
            _lr(r, lr[i], Fraction(3), f"state {sc.game.label} player {i + 1}")
    le = le_test(cfg.strategies[0], ["A", "B"], DeviationFamily.witnesses() | DeviationFamily.constant_all(), 0)
    r.check(le.passed, "ex21 pair passes the equilibrium check in both states")
    prefixed = tuple(ComposeSpec(ConstantSpec("n"), s, 1) for s in cfg.profile_for(2))
    sc = Scenario("A", prefixed, 20)
    tr = sc.run()
    tail = [p for pay in tr.payoffs[1:] for p in pay]
    r.check(all(p == 0 for p in tail), "after the (n,n) prefix every payoff is 0")
    g = deviation_gain(sc, 0, ConstantSpec("b"))
    r.check(g.exact and g.baseline == 0 and g.deviated == 1,
            f"'b forever' in state A earns {g.deviated} against baseline {g.baseline}, expected 1 vs 0")


def eq2_sweep(r: Report):
    count = 0
    for n in (2, 3):
        for m in range(1, 7):
            for st in auction_states(n, m, 2):
                eq = one_stage_equilibrium(st)
                res = verify_one_stage_nash(lambda x: stage_payoffs(st, x), eq, range(1, m + 1))
                count += 1
                if not res.passed:
                    r.check(False, f"state {st}: deviation of player {res.player + 1} to {res.deviation} gains {res.gain}")
                    return
    r.check(True, f"{count} states pass the one-shot Nash check")
    st = ValuationState((7, 1), 7)
    res = verify_one_stage_nash(lambda x: stage_payoffs(st, x), one_stage_equilibrium(st), range(1, 8))
    r.check(not res.passed and res.player == 0 and res.deviation == 2 and res.gain == 2,
            f"state 7,1 fails with player 1 bidding 2, gain 2 (got {res})")


def thm31(r: Report):
    count = 0
    for n in (2, 3):
        for m in range(1, 7):
            for st in auction_states(n, m, 2):
                sc = Scenario(st, (FULL,) * n, 10 * m + 10)
                tr = sc.run(early_stop=True)
                conv = convergence_round(tr)
                count += 1
                if not (isinstance(conv, ConvergedAt) and conv.round <= 3 * m):
                    r.check(False, f"state {st}: {conv} with classification {tr.classification}")
                    return
    r.check(True, f"{count} states converge to the one-shot equilibrium within 3m rounds")


def thm32(r: Report, jobs: int = 1):
    v = le_test(HALF, SURROGATE_STATES, STANDARD_FAMILY, Fraction(1, 100), jobs=jobs)
    r.detail = v
    worst = max(v.witnesses, key=lambda w: w.gain)
    r.check(v.passed, f"half-window pair over {len(SURROGATE_STATES)} states, "
                      f"{v.evaluated} deviations; largest gain {worst.gain} ({worst.deviation})")


def thm33(r: Report, jobs: int = 1):
    v = robust_le_test(HALF, SURROGATE_STATES, ConstantPrefixes(PREFIX_LENGTHS), STANDARD_FAMILY,
                       Fraction(1, 100), jobs=jobs)
    r.detail = v
    worst = max(v.witnesses, key=lambda w: w.gain)
    r.check(v.passed, f"half-window pair after every constant prefix, T in {list(PREFIX_LENGTHS)}; "
                      f"{v.evaluated} deviations; largest gain {worst.gain}")
    st = ValuationState((7, 3), 7)
    c = robust_le_test(FULL, [st], [((ConstantSpec(2), ConstantSpec(5)), 1)], STANDARD_FAMILY,
                       Fraction(1, 100))
    gain = max(w.gain for w in c.witnesses if w.player == 0)
    r.check(not c.passed and gain >= 1, f"full-window pair fails at 7,3 after the (2,5) prefix (gain {gain})")


def thm39(r: Report, jobs: int = 1):
    v = f_robust_test(HALF, SURROGATE_STATES, SCHEDULES, ConstantPrefixes(PREFIX_LENGTHS), STANDARD_FAMILY,
                      Fraction(1, 100), jobs=jobs)
    r.detail = v
    worst = max(v.witnesses, key=lambda w: w.gain)
    r.check(v.passed, f"half-window pair under {len(SCHEDULES)} failure schedules; "
                      f"{v.evaluated} deviations; largest gain {worst.gain}")


CHECKS = {
    "2.1": ex21,
    "3.5": ex35,
    "3.6": ex36,
    "3.7": ex37,
    "eq2-sweep": eq2_sweep,
    "thm-3.1": thm31,
    "thm-3.2": thm32,
    "thm-3.3": thm33,
    "thm-3.9": thm39,
}
_PARALLEL = {"thm-3.2", "thm-3.3", "thm-3.9"}


def reproduce(example_id: str, *, jobs: int = 1) -> Report:
    if example_id not in CHECKS:
        raise KeyError(f"unknown example {example_id!r}; choose from {', '.join(CHECKS)}")
    r = Report(example_id)
    start = time.perf_counter()
    if example_id in _PARALLEL:
        CHECKS[example_id](r, jobs=jobs)
    else:
        CHECKS[example_id](r)
    r.seconds = time.perf_counter() - start
    return r
