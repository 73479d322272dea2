import logging

import pytest

from config import (
    DEFAULTS,
    THREADS_ENV,
    format_config,
    format_number,
    from_dict,
    load_config,
    parse_config_text,
    save_config,
    sweep_threads,
)
from core_types import ConfigError

EXAMPLE_41 = """\
# k = 1 family, integrated
a=-0.45
b=1
c1=-0.2
c2=-0.15
c3=1.01
q=0.8
k=1
m=0.6
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(EXAMPLE_41)
    return path


def test_load_fills_defaults(config_file):
    cfg = load_config(config_file)
    assert cfg.params.c3 == 1.01
    assert (cfg.equilibrium.k, cfg.equilibrium.m) == (1.0, 0.6)
    assert (cfg.integrator.h, cfg.integrator.N, cfg.integrator.epsilon) == (DEFAULTS["h"], 100, 0.01)
    assert cfg.controlled is True
    assert cfg.out is None


def test_missing_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.cfg")


def test_missing_required_key():
    with pytest.raises(ConfigError, match="c3"):
        from_dict(parse_config_text("a=-1\nb=1\nc1=-1\nc2=-1\nq=0.5\n"))


@pytest.mark.parametrize(
    "line",
    ["a=abc", "N=1.5", "controlled=maybe", "perturbation=1,2,3", "b=inf", "just text"],
)
def test_malformed_values(line):
    with pytest.raises(ConfigError):
        parse_config_text(line)


def test_unknown_key_warns(caplog):
    with caplog.at_level(logging.WARNING, logger="config"):
        values = parse_config_text("colour=blue\na=-1\n")
    assert values == {"a": -1.0}
    assert "colour" in caplog.text


def test_format_is_canonical(config_file):
    cfg = load_config(config_file).with_overrides(perturbation=(0.1, 0, 0, 0, -0.1), out="run.csv")
    text = format_config(cfg)
    assert text.splitlines() == [
        "a=-0.45", "b=1", "c1=-0.2", "c2=-0.15", "c3=1.01", "q=0.8", "k=1", "m=0.6",
        "h=0.01", "N=100", "epsilon=0.01", "controlled=true", "out=run.csv", "perturbation=0.1,0,0,0,-0.1",
    ]


def test_save_and_reload(config_file, tmp_path):
    cfg = load_config(config_file).with_overrides(N=250, controlled=False)
    target = tmp_path / "copy.cfg"
    save_config(cfg, target)
    assert load_config(target) == cfg


def test_overrides_ignore_none(config_file):
    cfg = load_config(config_file)
    assert cfg.with_overrides(a=None, q=None) == cfg
    assert cfg.with_overrides(q=0.5).params.q == 0.5


@pytest.mark.parametrize("value, text", [(0.61, "0.61"), (5.0, "5"), (100, "100"), (-1e-7, "-0.0000001")])
def test_format_number(value, text):
    assert format_number(value) == text


def test_sweep_threads_from_env(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "3")
    assert sweep_threads() == 3


def test_sweep_threads_invalid_falls_back(monkeypatch, mocker, caplog):
    monkeypatch.setenv(THREADS_ENV, "zero")
    mocker.patch("config.os.cpu_count", return_value=6)
    assert sweep_threads() == 6
    assert THREADS_ENV in caplog.text
