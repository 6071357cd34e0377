import pytest

from app.config import Caps, get_settings, parse_caps
from app.errors import CapExceededError, InvalidArgumentError


def test_default_caps():
    assert parse_caps(None) == Caps()
    assert parse_caps("  ") == Caps()


def test_caps_override():
    caps = parse_caps("oracle_trees=6, global_dp=12,")
    assert caps.oracle_trees == 6
    assert caps.global_dp == 12
    assert caps.true_cards == Caps().true_cards


@pytest.mark.parametrize("text", ["oracle_trees", "nonsense=3", "global_dp=many"])
def test_bad_caps(text):
    with pytest.raises(InvalidArgumentError):
        parse_caps(text)


def test_require():
    caps = Caps(global_dp=5)
    caps.require("global_dp", 5, "global DP")
    with pytest.raises(CapExceededError) as info:
        caps.require("global_dp", 6, "global DP")
    assert "global_dp=5" in info.value.detail
    assert info.value.exit_code == 3


def test_settings_from_environment(monkeypatch):
    monkeypatch.setenv("METADECOMP_CAPS", "rebranch=4")
    monkeypatch.setenv("METADECOMP_LOG_LEVEL", "debug")
    monkeypatch.setenv("METADECOMP_SIGMA", "2.5")
    monkeypatch.setenv("METADECOMP_DATABASE_URL", "sqlite:///bench.db")
    settings = get_settings()
    assert settings.caps.rebranch == 4
    assert settings.log_level == "DEBUG"
    assert settings.sigma == 2.5
    assert settings.database_url == "sqlite:///bench.db"


def test_settings_defaults(monkeypatch):
    for name in ("METADECOMP_CAPS", "METADECOMP_LOG_LEVEL", "METADECOMP_SIGMA", "METADECOMP_DATABASE_URL"):
        monkeypatch.delenv(name, raising=False)
    settings = get_settings()
    assert settings.caps == Caps()
    assert settings.log_level == "WARNING"
    assert settings.sigma == 10.0


def test_bad_sigma(monkeypatch):
    monkeypatch.setenv("METADECOMP_SIGMA", "loud")
    with pytest.raises(InvalidArgumentError):
        get_settings()
