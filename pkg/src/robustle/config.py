"""Scenario configuration: a flat ``key = value`` text format.

Example::

    # two full-history bidders at 7,5
    game = auction
    m = 7
    state = 7,5
    strategy = maxbid(window=full, floor=2)
    horizon = 10

Keys
    game        auction | matrix                                  (required)
    m           maximum valuation and bid                         (auction, explicit states)
    state       ``7,5`` or ``A``; several separated by ``;``; or
                ``all(n=2, m=2..5, min_second=2)`` for a sweep     (required)
    strategy    one strategy for every player
    strategy.I  strategy of player I (1-based); overrides ``strategy``
    horizon     rounds to simulate                                 (default 10000)
    floor       MaxBid decrement floor for maxbids that omit it    (default 2)
    schedule    ``identity`` or ``fail(round=R, player=P, signal=(M,K)), ..., recover=T``;
                may be repeated; ``run`` uses at most one
    check       le | robust | f-robust                             (verify only)
    family      ``witnesses | constant | periodic(P,Q)``           (default all three, P=1, Q=3)
    prefix      ``constant`` (every constant profile) or an explicit profile
                ``constant(2), constant(5)``; may be repeated
    prefix_T    prefix lengths, e.g. ``1, 2, 5``                   (default 1)
    tolerance   ``P/Q``                                            (default 1/100)
    budget      largest deviation family accepted                  (default 100000)
    out         output directory

Strategies: ``maxbid(window=W, floor=F)`` with W one of ``full``, ``half``,
``const(K)``, ``table(V,V,...)``; ``constant(B)``; ``periodic(P,...;C,...)``;
``ex21``; ``compose(G, F, T)``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, replace
from fractions import Fraction

from .core import AuctionSignal
from .failures import IDENTITY, FailureSchedule, FixedSignal, InvalidSchedule, Override
from .stage import EX21_GAMES, InvalidInput, ValuationState, auction_states
from .strategies import ComposeSpec, ConstantSpec, Ex21Spec, MaxBidSpec, PeriodicSpec, Window
from .verify import (
    DEFAULT_BUDGET,
    DEFAULT_HORIZON,
    DEFAULT_TOLERANCE,
    STANDARD_FAMILY,
    ConstantPrefixes,
    DeviationFamily,
    Scenario,
)


class ConfigError(ValueError):
    def __init__(self, message: str, line: int = 0, col: int = 0, source: str = "config"):
        self.message, self.line, self.col, self.source = message, line, col, source
        super().__init__(f"{source}:{line}:{col}: {message}")


# -- value grammar ------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<num>\d+)|(?P<name>[A-Za-z_][A-Za-z0-9_\-]*)|(?P<op>\.\.|<=|[(),;=/|]))")


class _Parser:
    """Tokenizer and recursive-descent helpers over one config value."""

    def __init__(self, text: str, line: int, col0: int):
        self.text, self.line, self.col0 = text, line, col0
        self.toks = []
        self.i = 0
        pos = 0
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            m = _TOKEN.match(text, pos)
            if not m:
                self.fail(f"unexpected character {text[pos:].lstrip()[0]!r}", len(text) - len(text[pos:].lstrip()))
            kind = m.lastgroup
            self.toks.append((kind, m.group(kind), m.start(kind)))
            pos = m.end()

    def fail(self, message, pos=None):
        if pos is None:
            pos = self.toks[self.i][2] if self.i < len(self.toks) else len(self.text)
        raise ConfigError(message, self.line, self.col0 + pos)

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None, len(self.text))

    def take(self, kind=None, value=None):
        tok = self.peek()
        if tok[0] is None:
            self.fail("unexpected end of value")
        if (kind and tok[0] != kind) or (value and tok[1] != value):
            self.fail(f"expected {value or kind}, got {tok[1]!r}")
        self.i += 1
        return tok[1]

    def accept(self, value):
        if self.peek()[1] == value:
            self.i += 1
            return True
        return False

    def int(self):
        return int(self.take("num"))

    def end(self):
        if self.i < len(self.toks):
            self.fail(f"unexpected {self.toks[self.i][1]!r}")

    def ints(self, stop=(")",)):
        out = []
        if self.peek()[1] in stop:
            return out
        out.append(self.action())
        while self.accept(","):
            out.append(self.action())
        return out

    def action(self):
        kind, value, _ = self.peek()
        if kind == "num":
            return self.int()
        if kind == "name" and len(value) == 1:
            self.i += 1
            return value
        self.fail(f"expected an action, got {value!r}")

    # strategies

    def strategy(self, floor):
        name = self.take("name")
        if name == "ex21":
            return Ex21Spec()
        if name == "maxbid":
            window, fl = Window.full(), None
            if self.accept("("):
                while not self.accept(")"):
                    key = self.take("name")
                    self.take("op", "=")
                    if key == "window":
                        window = self.window()
                    elif key == "floor":
                        pos = self.peek()[2]
                        fl = self.int()
                        if fl not in (1, 2):
                            self.fail(f"floor must be 1 or 2, got {fl}", pos)
                    else:
                        self.fail(f"unknown maxbid option {key!r}")
                    if not self.accept(","):
                        self.take("op", ")")
                        break
            return MaxBidSpec(window, floor if fl is None else fl)
        if name == "constant":
            self.take("op", "(")
            a = self.action()
            self.take("op", ")")
            return ConstantSpec(a)
        if name == "periodic":
            self.take("op", "(")
            prefix = self.ints(stop=(";",))
            self.take("op", ";")
            pos = self.peek()[2]
            cycle = self.ints()
            if not cycle:
                self.fail("periodic cycle must be non-empty", pos)
            self.take("op", ")")
            return PeriodicSpec(tuple(prefix), tuple(cycle))
        if name == "compose":
            self.take("op", "(")
            g = self.strategy(floor)
            self.take("op", ",")
            f = self.strategy(floor)
            self.take("op", ",")
            T = self.int()
            self.take("op", ")")
            return ComposeSpec(g, f, T)
        self.i -= 1
        self.fail(f"unknown strategy {name!r}")

    def window(self):
        pos = self.peek()[2]
        name = self.take("name")
        try:
            if name == "full":
                return Window.full()
            if name == "half":
                return Window.half()
            if name == "const":
                self.take("op", "(")
                k = self.int()
                self.take("op", ")")
                return Window.constant(k)
            if name == "table":
                self.take("op", "(")
                vals = self.ints()
                self.take("op", ")")
                return Window.from_table(vals)
        except ValueError as e:
            if isinstance(e, ConfigError):
                raise
            self.fail(str(e), pos)
        self.fail(f"unknown window {name!r}", pos)


def parse_strategy(text: str, floor: int = 2, *, line: int = 0, col: int = 0):
    p = _Parser(text, line, col)
    spec = p.strategy(floor)
    p.end()
    return spec


def _parse_schedule(p: _Parser, n_hint, m_hint):
    if p.accept("identity"):
        p.end()
        return IDENTITY
    overrides, recover = [], None
    while True:
        pos = p.peek()[2]
        name = p.take("name")
        if name == "recover":
            p.take("op", "=")
            recover = p.int()
        elif name == "fail":
            p.take("op", "(")
            args = {}
            while True:
                key = p.take("name")
                p.take("op", "=")
                if key == "signal":
                    p.take("op", "(")
                    M = p.int()
                    p.take("op", ",")
                    K = p.int()
                    p.take("op", ")")
                    args[key] = AuctionSignal(M, K)
                elif key in ("round", "player"):
                    args[key] = p.int()
                else:
                    p.fail(f"unknown fail option {key!r}")
                if not p.accept(","):
                    break
            p.take("op", ")")
            missing = {"round", "player", "signal"} - set(args)
            if missing:
                p.fail(f"fail() missing {', '.join(sorted(missing))}", pos)
            if args["player"] < 1:
                p.fail("players are numbered from 1", pos)
            overrides.append(Override(args["round"], args["player"] - 1, FixedSignal(args["signal"])))
        else:
            p.fail(f"expected fail(...) or recover=T, got {name!r}", pos)
        if not p.accept(","):
            break
    p.end()
    if recover is None:
        p.fail("schedule needs recover=T")
    try:
        return FailureSchedule(tuple(overrides), recover).validate()
    except InvalidSchedule as e:
        raise ConfigError(str(e), p.line, p.col0)


def _parse_states(p: _Parser, game, m):
    if game == "matrix":
        out = [p.take("name")]
        while p.accept(";"):
            out.append(p.take("name"))
        p.end()
        for label in out:
            if label not in EX21_GAMES:
                p.fail(f"unknown matrix state {label!r}", 0)
        return tuple(out)
    if p.peek()[1] == "all":
        p.take("name")
        p.take("op", "(")
        args = {}
        while True:
            key = p.take("name")
            p.take("op", "=")
            lo = p.int()
            hi = p.int() if p.accept("..") else lo
            args[key] = (lo, hi)
            if not p.accept(","):
                break
        p.take("op", ")")
        p.end()
        unknown = set(args) - {"n", "m", "min_second"}
        if unknown or not {"n", "m"} <= set(args):
            p.fail("all() takes n=, m= and optional min_second=", 0)
        return ("all", args["n"], args["m"], args.get("min_second", (1, 1))[0])
    if m is None:
        p.fail("explicit auction states need the m key", 0)
    out = []
    while True:
        pos = p.peek()[2]
        vals = [p.int()]
        while p.accept(","):
            vals.append(p.int())
        try:
            out.append(ValuationState(tuple(vals), m))
        except InvalidInput as e:
            p.fail(str(e), pos)
        if not p.accept(";"):
            break
    p.end()
    return tuple(out)


def _parse_family(p: _Parser):
    fam = None
    while True:
        name = p.take("name")
        if name == "witnesses":
            part = DeviationFamily.witnesses()
        elif name == "constant":
            part = DeviationFamily.constant_all()
        elif name == "periodic":
            p.take("op", "(")
            a = p.int()
            p.take("op", ",")
            b = p.int()
            p.take("op", ")")
            part = DeviationFamily.periodic_exhaustive(a, b)
        else:
            p.i -= 1
            p.fail(f"unknown deviation family {name!r}")
        fam = part if fam is None else fam | part
        if not p.accept("|"):
            break
    p.end()
    return fam


# -- the config -----------------------------------------------------------------

_KEYS = {"game", "m", "state", "strategy", "horizon", "floor", "schedule", "check", "family",
         "prefix", "prefix_T", "tolerance", "budget", "out"}
_REPEATABLE = {"schedule", "prefix"}


@dataclass(frozen=True)
class ScenarioConfig:
    game: str
    states: tuple
    strategies: tuple  # one per player; a single entry means "everyone"
    m: int | None = None
    horizon: int = DEFAULT_HORIZON
    floor: int = 2
    schedules: tuple = ()
    check: str | None = None
    family: DeviationFamily = STANDARD_FAMILY
    prefixes: tuple = ()  # "constant" or explicit profiles
    prefix_T: tuple = (1,)
    tolerance: Fraction = DEFAULT_TOLERANCE
    budget: int = DEFAULT_BUDGET
    out: str | None = None

    # derived views

    def state_list(self) -> list:
        if self.game == "matrix":
            return list(self.states)
        if self.states and self.states[0] == "all":
            _, (nlo, nhi), (mlo, mhi), second = self.states
            return [s for n in range(nlo, nhi + 1) for m in range(mlo, mhi + 1)
                    for s in auction_states(n, m, second)]
        return list(self.states)

    def profile_for(self, n: int) -> tuple:
        if len(self.strategies) == 1:
            return self.strategies * n
        if len(self.strategies) != n:
            raise ConfigError(f"{len(self.strategies)} strategies configured for {n} players")
        return self.strategies

    def schedule(self) -> FailureSchedule:
        if len(self.schedules) > 1:
            raise ConfigError("a single run takes at most one schedule")
        return self.schedules[0] if self.schedules else IDENTITY

    def scenarios(self) -> list:
        out = []
        for st in self.state_list():
            n = 2 if self.game == "matrix" else st.n
            out.append(Scenario(st, self.profile_for(n), self.horizon, self.schedule()))
        return out

    def prefix_family(self):
        if "constant" in self.prefixes:
            return ConstantPrefixes(self.prefix_T)
        return [(g, T) for T in self.prefix_T for g in self.prefixes]

    def with_overrides(self, **kw) -> "ScenarioConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        if "floor" in kw:
            kw["strategies"] = tuple(_refloor(s, kw["floor"]) for s in self.strategies)
        return replace(self, **kw)

    # text form

    def dumps(self) -> str:
        lines = [f"game = {self.game}"]
        if self.m is not None:
            lines.append(f"m = {self.m}")
        lines.append(f"state = {_fmt_states(self.states)}")
        if len(self.strategies) == 1:
            lines.append(f"strategy = {self.strategies[0]}")
        else:
            lines += [f"strategy.{i} = {s}" for i, s in enumerate(self.strategies, 1)]
        lines.append(f"horizon = {self.horizon}")
        lines.append(f"floor = {self.floor}")
        lines += [f"schedule = {_fmt_schedule(s)}" for s in self.schedules]
        if self.check:
            lines.append(f"check = {self.check}")
        lines.append(f"family = {_fmt_family(self.family)}")
        for pre in self.prefixes:
            lines.append("prefix = " + (pre if pre == "constant" else ", ".join(map(str, pre))))
        lines.append("prefix_T = " + ", ".join(map(str, self.prefix_T)))
        lines.append(f"tolerance = {self.tolerance.numerator}/{self.tolerance.denominator}")
        lines.append(f"budget = {self.budget}")
        if self.out:
            lines.append(f"out = {self.out}")
        return "\n".join(lines) + "\n"


def _refloor(spec, floor):
    if isinstance(spec, MaxBidSpec):
        return MaxBidSpec(spec.window, floor)
    if isinstance(spec, ComposeSpec):
        return ComposeSpec(_refloor(spec.g, floor), _refloor(spec.f, floor), spec.T)
    return spec


def _fmt_states(states) -> str:
    if states and states[0] == "all":
        _, (nlo, nhi), (mlo, mhi), second = states
        rng = lambda lo, hi: str(lo) if lo == hi else f"{lo}..{hi}"
        return f"all(n={rng(nlo, nhi)}, m={rng(mlo, mhi)}, min_second={second})"
    return "; ".join(str(s) for s in states)


def _fmt_schedule(s: FailureSchedule) -> str:
    if s.is_identity:
        return "identity"
    parts = [f"fail(round={o.round}, player={o.player + 1}, signal=({o.rule.signal[0]},{o.rule.signal[1]}))"
             for o in s.overrides]
    return ", ".join(parts + [f"recover={s.recovery_round}"])


def _fmt_family(f: DeviationFamily) -> str:
    out = []
    for part in f.parts:
        out.append(f"periodic({part[1]},{part[2]})" if part[0] == "periodic" else part[0])
    return " | ".join(out)


_LINE = re.compile(r"^(\s*)([A-Za-z_][A-Za-z0-9_.]*)(\s*)=(.*)$")


def loads(text: str, source: str = "config") -> ScenarioConfig:
    """Parse a config document; errors carry line and column."""
    raw: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0]
        if not body.strip():
            continue
        m = _LINE.match(body)
        if not m:
            col = len(body) - len(body.lstrip()) + 1
            raise ConfigError("expected 'key = value'", lineno, col, source)
        key = m.group(2)
        kcol = len(m.group(1)) + 1
        vcol = m.start(4) + 1
        base = key.split(".", 1)[0]
        if base not in _KEYS or ("." in key and base != "strategy"):
            raise ConfigError(f"unknown key {key!r}", lineno, kcol, source)
        if key in raw and base not in _REPEATABLE:
            raise ConfigError(f"duplicate key {key!r}", lineno, kcol, source)
        value = m.group(4)
        if not value.strip():
            raise ConfigError(f"empty value for {key!r}", lineno, vcol, source)
        raw.setdefault(key, []).append((value, lineno, vcol))
    try:
        return _build(raw, source)
    except ConfigError as e:
        if e.source != source:
            raise ConfigError(e.message, e.line, e.col, source) from None
        raise


def _scalar(raw, key, conv, default=None):
    if key not in raw:
        return default
    value, line, col = raw[key][0]
    p = _Parser(value, line, col)
    out = conv(p)
    p.end()
    return out


def _int_at_least(lo):
    def conv(p):
        pos = p.peek()[2]
        v = p.int()
        if v < lo:
            p.fail(f"value must be >= {lo}", pos)
        return v
    return conv


def _build(raw, source) -> ScenarioConfig:
    def need(key):
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}", 0, 0, source)

    need("game")
    game = _scalar(raw, "game", lambda p: p.take("name"))
    if game not in ("auction", "matrix"):
        v, line, col = raw["game"][0]
        col += len(v) - len(v.lstrip())
        raise ConfigError(f"game must be auction or matrix, got {game!r}", line, col, source)
    m = _scalar(raw, "m", _int_at_least(1))
    if game == "matrix" and m is not None:
        raise ConfigError("m applies to auctions only", raw["m"][0][1], 1, source)
    floor = _scalar(raw, "floor", _int_at_least(1), 2)
    if floor not in (1, 2):
        raise ConfigError(f"floor must be 1 or 2, got {floor}", raw["floor"][0][1], raw["floor"][0][2], source)
    need("state")
    states = _scalar(raw, "state", lambda p: _parse_states(p, game, m))

    strat = {}
    for key, entries in raw.items():
        if key.split(".", 1)[0] != "strategy":
            continue
        value, line, col = entries[0]
        spec = parse_strategy(value, floor, line=line, col=col)
        if key == "strategy":
            strat[0] = spec
        else:
            idx = key.split(".", 1)[1]
            if not idx.isdigit() or int(idx) < 1:
                raise ConfigError(f"bad player index in {key!r}", line, 1, source)
            strat[int(idx)] = spec
    if not strat:
        raise ConfigError("missing required key 'strategy'", 0, 0, source)
    numbered = sorted(k for k in strat if k)
    if numbered:
        if numbered != list(range(1, len(numbered) + 1)) and 0 not in strat:
            raise ConfigError(f"strategies given for players {numbered}; number them 1..n", 0, 0, source)
        n = max(numbered)
        strategies = tuple(strat.get(i, strat.get(0)) for i in range(1, n + 1))
    else:
        strategies = (strat[0],)

    schedules = tuple(_parse_schedule(_Parser(v, l, c), None, m) for v, l, c in raw.get("schedule", []))
    check = _scalar(raw, "check", _check_name)
    family = _scalar(raw, "family", _parse_family, STANDARD_FAMILY)
    prefixes = []
    for v, l, c in raw.get("prefix", []):
        p = _Parser(v, l, c)
        if p.peek()[1] == "constant" and len(p.toks) == 1:
            prefixes.append("constant")
            continue
        prof = [p.strategy(floor)]
        while p.accept(","):
            prof.append(p.strategy(floor))
        p.end()
        prefixes.append(tuple(prof))
    prefix_T = _scalar(raw, "prefix_T", _int_list, (1,))
    tolerance = _scalar(raw, "tolerance", _fraction, DEFAULT_TOLERANCE)
    return ScenarioConfig(
        game=game, states=states, strategies=strategies, m=m,
        horizon=_scalar(raw, "horizon", _int_at_least(1), DEFAULT_HORIZON),
        floor=floor, schedules=schedules, check=check, family=family,
        prefixes=tuple(prefixes), prefix_T=prefix_T, tolerance=tolerance,
        budget=_scalar(raw, "budget", _int_at_least(1), DEFAULT_BUDGET),
        out=raw["out"][0][0].strip() if "out" in raw else None,
    )


def _check_name(p):
    pos = p.peek()[2]
    name = p.take("name")
    if name not in ("le", "robust", "f-robust"):
        p.fail(f"check must be le, robust or f-robust, got {name!r}", pos)
    return name


def _int_list(p):
    vals = [p.int()]
    while p.accept(","):
        vals.append(p.int())
    return tuple(vals)


def _fraction(p):
    pos = p.peek()[2]
    num = p.int()
    den = p.int() if p.accept("/") else 1
    if den == 0:
        p.fail("zero denominator", pos)
    return Fraction(num, den)


def load(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read(), source=str(path))
