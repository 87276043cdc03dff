import pytest

from ftcl.config import FtclConfig, check_positive, check_truthy, parse_int_list


def test_defaults(monkeypatch):
    for name in ("FTCL_DIGITS", "FTCL_PRECISION", "FTCL_CONFIG", "FTCL_WORKERS", "FTCL_CURVES"):
        monkeypatch.delenv(name, raising=False)
    settings = FtclConfig()
    assert settings.digits == 40
    assert settings.precision == 20
    assert settings.workers == 4
    assert settings.curve_table.name == "curves.txt"


def test_environment_overrides_defaults(monkeypatch):
    monkeypatch.setenv("FTCL_PRECISION", "12")
    monkeypatch.setenv("FTCL_LOG_LEVEL", "debug")
    settings = FtclConfig()
    assert settings.precision == 12
    assert settings.log_level == "DEBUG"


def test_explicit_overrides_win(monkeypatch):
    monkeypatch.setenv("FTCL_PRECISION", "12")
    assert FtclConfig(precision=30).precision == 30
    assert FtclConfig(precision=None).precision == 12


def test_toml_file_is_read(monkeypatch, tmp_path):
    for name in ("FTCL_DIGITS", "FTCL_PRECISION"):
        monkeypatch.delenv(name, raising=False)
    path = tmp_path / "ftcl.toml"
    path.write_text("[ftcl]\ndigits = 55\nprecision = 25\n")
    monkeypatch.setenv("FTCL_CONFIG", str(path))
    settings = FtclConfig()
    assert settings.digits == 55
    assert settings.precision == 25


def test_missing_toml_file_is_an_error(monkeypatch, tmp_path):
    monkeypatch.setenv("FTCL_CONFIG", str(tmp_path / "absent.toml"))
    with pytest.raises(ValueError, match="missing file"):
        FtclConfig()


def test_invalid_values_are_rejected(monkeypatch):
    monkeypatch.delenv("FTCL_CONFIG", raising=False)
    with pytest.raises(ValueError, match="FTCL_DIGITS must be of type int"):
        FtclConfig(digits="many")
    with pytest.raises(ValueError, match="positive"):
        FtclConfig(precision=0)
    with pytest.raises(ValueError, match="FTCL_PRECISION_CAP"):
        FtclConfig(precision=50, precision_cap=40)


def test_with_overrides_keeps_earlier_overrides(monkeypatch):
    monkeypatch.delenv("FTCL_CONFIG", raising=False)
    base = FtclConfig(digits=30)
    derived = base.with_overrides(precision=15, digits=None)
    assert derived.digits == 30
    assert derived.precision == 15


def test_fingerprint_tracks_computational_settings(tmp_path, monkeypatch):
    monkeypatch.delenv("FTCL_CONFIG", raising=False)
    a = FtclConfig(precision=20, cache_dir=tmp_path / "a")
    b = FtclConfig(precision=20, cache_dir=tmp_path / "b")
    c = FtclConfig(precision=21)
    assert a.fingerprint() == b.fingerprint()
    assert a.fingerprint() != c.fingerprint()


def test_helpers():
    assert parse_int_list("2, 5 7,10") == [2, 5, 7, 10]
    with pytest.raises(ValueError):
        parse_int_list("2,x")
    assert check_truthy("a", "empty") == "a"
    with pytest.raises(ValueError, match="empty"):
        check_truthy("", "empty")
    with pytest.raises(ValueError):
        check_positive(-1, "negative")
