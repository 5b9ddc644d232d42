from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from robustle.config import ConfigError, ScenarioConfig, load, loads, parse_strategy
from robustle.failures import IDENTITY, fixed_corruption
from robustle.stage import ValuationState
from robustle.strategies import ComposeSpec, ConstantSpec, Ex21Spec, MaxBidSpec, PeriodicSpec, Window
from robustle.verify import STANDARD_FAMILY, ConstantPrefixes, DeviationFamily

EX35 = """\
# two full-history bidders
game = auction
m = 7
state = 7,5
strategy = maxbid(window=full, floor=2)
horizon = 10
"""


def test_example_config():
    cfg = loads(EX35)
    assert cfg.state_list() == [ValuationState((7, 5), 7)]
    assert cfg.profile_for(2) == (MaxBidSpec(Window.full(), 2),) * 2
    sc = cfg.scenarios()[0]
    assert sc.horizon == 10 and sc.schedule is IDENTITY


def test_defaults():
    cfg = loads("game = matrix\nstate = A; B\nstrategy = ex21\n")
    assert cfg.horizon == 10_000 and cfg.floor == 2 and cfg.tolerance == Fraction(1, 100)
    assert cfg.family == STANDARD_FAMILY and cfg.budget == 100_000
    assert cfg.state_list() == ["A", "B"] and cfg.strategies == (Ex21Spec(),)


@pytest.mark.parametrize("text, spec", [
    ("maxbid(window=const(1), floor=1)", MaxBidSpec(Window.constant(1), 1)),
    ("maxbid(window=half)", MaxBidSpec(Window.half(), 2)),
    ("maxbid(window=table(1,2,2))", MaxBidSpec(Window.from_table([1, 2, 2]), 2)),
    ("constant(5)", ConstantSpec(5)),
    ("constant(b)", ConstantSpec("b")),
    ("periodic(;1,1,3)", PeriodicSpec((), (1, 1, 3))),
    ("periodic(2;4)", PeriodicSpec((2,), (4,))),
    ("compose(constant(2), maxbid(window=full), 1)", ComposeSpec(ConstantSpec(2), MaxBidSpec(Window.full(), 2), 1)),
])
def test_parse_strategy(text, spec):
    assert parse_strategy(text) == spec
    assert parse_strategy(str(spec)) == spec


def test_sweep_states_and_overrides():
    cfg = loads("game = auction\nstate = all(n=2, m=2..3, min_second=2)\nstrategy = maxbid(window=half)\n")
    assert len(cfg.state_list()) == 1 + 4
    low = cfg.with_overrides(floor=1, horizon=5, tolerance=None)
    assert low.strategies == (MaxBidSpec(Window.half(), 1),) and low.horizon == 5


def test_verify_keys():
    cfg = loads("""\
game = auction
m = 7
state = 7,3
strategy = maxbid(window=full)
check = f-robust
schedule = identity
schedule = fail(round=1, player=1, signal=(2,2)), recover=2
prefix = constant(2), constant(5)
prefix = constant
prefix_T = 1, 2
family = witnesses | periodic(1,2)
tolerance = 1/50
budget = 500
""")
    assert cfg.schedules == (IDENTITY, fixed_corruption([1], [0], (2, 2), 2))
    assert cfg.family == DeviationFamily.witnesses() | DeviationFamily.periodic_exhaustive(1, 2)
    assert cfg.prefix_family() == ConstantPrefixes((1, 2))
    assert cfg.tolerance == Fraction(1, 50) and cfg.budget == 500
    with pytest.raises(ConfigError):
        cfg.schedule()


@pytest.mark.parametrize("text, line, col", [
    ("game = auction\nm = 7\nstate = 7,5\nstrategy = maxbid(window=ful)\n", 4, 26),
    ("game = auction\nm = 7\nstate = 7,5\nbogus = 1\n", 4, 1),
    ("game = auction\nm = 7\nstate = 7,5\nstrategy = constant(2)\nhorizon = 0\n", 5, 11),
    ("game = auction\nm = 7\n  state 7,5\n", 3, 3),
    ("game = poker\n", 1, 8),
    ("game = auction\nm = 7\nstate = 7,5\nstrategy = constant(2)\nhorizon = 5\nhorizon = 6\n", 6, 1),
    ("game = auction\nm = 7\nstate = 7,5\nstrategy = constant(2)\nschedule = fail(round=2, player=1, signal=(2,2)), recover=2\n", 5, None),
])
def test_errors_carry_position(text, line, col):
    with pytest.raises(ConfigError) as err:
        loads(text, source="x.cfg")
    assert err.value.line == line
    if col is not None:
        assert err.value.col == col
    assert str(err.value).startswith(f"x.cfg:{line}:")


def test_missing_keys():
    with pytest.raises(ConfigError, match="missing required key 'state'"):
        loads("game = auction\n")
    with pytest.raises(ConfigError, match="strategy"):
        loads("game = auction\nm = 7\nstate = 7,5\n")


def test_load_file(tmp_path):
    p = tmp_path / "a.cfg"
    p.write_text(EX35)
    assert load(p) == loads(EX35)


def test_shipped_configs_parse():
    import pathlib
    root = pathlib.Path(__file__).resolve().parent.parent / "configs"
    files = sorted(root.glob("*.cfg"))
    assert files
    for f in files:
        cfg = load(f)
        assert loads(cfg.dumps()) == cfg


# -- round trip

windows = st.one_of(st.just(Window.full()), st.just(Window.half()),
                    st.integers(1, 5).map(Window.constant),
                    st.sampled_from([Window.from_table([1, 2]), Window.from_table([1, 1, 3])]))


def specs(m):
    act = st.integers(1, m)
    leaf = st.one_of(
        st.builds(MaxBidSpec, windows, st.sampled_from([1, 2])),
        st.builds(ConstantSpec, act),
        st.builds(PeriodicSpec, st.lists(act, max_size=2).map(tuple), st.lists(act, min_size=1, max_size=3).map(tuple)),
    )
    return st.one_of(leaf, st.builds(ComposeSpec, leaf, leaf, st.integers(0, 4)))


@st.composite
def configs(draw):
    m = draw(st.integers(2, 8))
    n = draw(st.integers(2, 3))
    states = tuple(draw(st.lists(st.tuples(*[st.integers(1, m)] * n).map(lambda v: ValuationState(v, m)),
                                 min_size=1, max_size=3, unique=True)))
    k = draw(st.sampled_from([1, n]))
    strategies = tuple(draw(specs(m)) for _ in range(k))
    sched = draw(st.lists(st.sampled_from([IDENTITY, fixed_corruption([1], [0], (2, 2), 2),
                                           fixed_corruption([1, 2, 3], [0, 1], (2, 2), 4)]), max_size=2))
    fam = draw(st.sampled_from([STANDARD_FAMILY, DeviationFamily.witnesses(),
                                DeviationFamily.constant_all() | DeviationFamily.periodic_exhaustive(0, 2)]))
    prefixes = tuple(draw(st.lists(st.one_of(st.just("constant"),
                                             st.tuples(*[st.integers(1, m).map(ConstantSpec)] * n)), max_size=2)))
    return ScenarioConfig(
        game="auction", states=states, strategies=strategies, m=m,
        horizon=draw(st.integers(1, 20_000)), floor=draw(st.sampled_from([1, 2])),
        schedules=tuple(sched), check=draw(st.sampled_from([None, "le", "robust", "f-robust"])),
        family=fam, prefixes=prefixes, prefix_T=tuple(draw(st.lists(st.integers(1, 9), min_size=1, max_size=3))),
        tolerance=Fraction(draw(st.integers(0, 9)), draw(st.integers(1, 200))),
        budget=draw(st.integers(1, 10**6)), out=draw(st.sampled_from([None, "out/run1"])),
    )


@given(configs())
def test_round_trip(cfg):
    again = loads(cfg.dumps())
    assert again == cfg
    if len(cfg.schedules) <= 1:
        assert again.scenarios() == cfg.scenarios()
