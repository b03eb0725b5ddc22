import pytest
from hypothesis import given, settings, strategies as st

from smectic.config import KEYS, ConfigError, RunConfig, parse_config
from smectic.model import Params


def test_empty_document_gives_defaults():
    cfg = parse_config("")
    assert cfg == RunConfig()
    p = cfg.params
    assert (p.scheme, p.nx, p.dt, p.epsilon, p.t_end) == ("od2", 32, 1e-5, 0.05, 0.086)
    assert (p.mu1, p.mu4, p.mu5, p.lam, p.gamma) == (1.0, 1.0, 1.0, 1.0, 1.0)


def test_full_document():
    text = """
    # comment line
    scheme = mp        # trailing comment
    nx = 16
    dt = 2e-5
    t_end = 1e-3
    lambda = 0.5
    bounds = 0, 2, 0, 1
    out_dir = results/run1
    snapshots = no
    initial_phi = zero
    out_every = 0
    """
    cfg = parse_config(text)
    assert cfg.params == Params(scheme="mp", nx=16, dt=2e-5, t_end=1e-3, lam=0.5,
                                bounds=(0.0, 2.0, 0.0, 1.0), out_every=0)
    assert (cfg.out_dir, cfg.snapshots, cfg.initial_phi) == ("results/run1", False, "zero")


def _errors(text, **kw):
    with pytest.raises(ConfigError) as exc:
        parse_config(text, **kw)
    return exc.value.errors


def test_negative_epsilon_names_key():
    errs = _errors("epsilon = -1")
    assert len(errs) == 1 and "epsilon" in errs[0]


def test_solvability_violation_reported():
    errs = _errors("dt = 0.01\nscheme = od2")
    assert len(errs) == 1
    assert "'dt'" in errs[0] and "0.005" in errs[0]


def test_solvability_override():
    cfg = parse_config("dt = 0.01\noverride_solvability = true")
    assert cfg.override_solvability and cfg.params.dt == 0.01


def test_mp_has_no_step_constraint():
    assert parse_config("dt = 0.01\nscheme = mp").params.dt == 0.01


def test_lambda_error_uses_config_key():
    errs = _errors("lambda = 0")
    assert errs[0].startswith("key 'lambda'")


@pytest.mark.parametrize("text, key", [
    ("foo = 1", "foo"), ("nx = 2.5", "nx"), ("nx = ten", "nx"), ("dt = nan", "dt"),
    ("scheme = rk4", "scheme"), ("bounds = 0 1 2", "bounds"), ("snapshots = maybe", "snapshots"),
    ("initial_phi = wave", "initial_phi"), ("gamma =", "gamma"), ("mu4 = 0", "mu4"),
    ("bounds = 1, 0, 0, 1", "bounds"), ("out_every = -1", "out_every"),
])
def test_rejections_name_key(text, key):
    errs = _errors(text)
    assert any(f"'{key}'" in e for e in errs)


def test_syntax_errors_name_line():
    errs = _errors("nx = 4\njust words\n= 3")
    assert errs[0].startswith("line 2")
    assert errs[1].startswith("line 3")


def test_repeated_key():
    errs = _errors("nx = 4\nnx = 8")
    assert "line 2" in errs[0] and "'nx'" in errs[0]


def test_all_errors_collected():
    assert len(_errors("foo = 1\nbar = 2\nnx = x")) == 3


def test_overrides_win():
    cfg = parse_config("nx = 8\nscheme = mp", {"nx": "4", "out_dir": "o"})
    assert cfg.params.nx == 4 and cfg.params.scheme == "mp" and cfg.out_dir == "o"


def test_override_errors_name_source():
    errs = _errors("", overrides={"dt": "fast"})
    assert errs[0].startswith("command line") and "'dt'" in errs[0]


@settings(max_examples=50, deadline=None)
@given(st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=200))
def test_parser_never_crashes(text):
    try:
        parse_config(text)
    except ConfigError as exc:
        assert exc.errors and all(isinstance(e, str) and e for e in exc.errors)


@settings(max_examples=50, deadline=None)
@given(st.sampled_from(sorted(k for k, v in KEYS.items() if v[2] is float or v[2].__name__ == "_float")),
       st.floats(1e-9, 1e3))
def test_float_values_round_trip(key, value):
    text = f"{key} = {value!r}\noverride_solvability = true"
    try:
        cfg = parse_config(text)
    except ConfigError as exc:
        # Only invariant checks may reject a finite positive float.
        assert all(f"'{key}'" in e or "key '" in e for e in exc.errors)
        return
    target, attr, _ = KEYS[key]
    assert getattr(cfg.params, attr) == value
