import pytest

from ftcl.cache import Cache
from ftcl.config import FtclConfig
from ftcl.ellcurve import curve_from_label


@pytest.fixture
def curve_11a1():
    return curve_from_label("11a1")


@pytest.fixture
def curve_37a1():
    return curve_from_label("37a1")


@pytest.fixture
def settings(tmp_path):
    return FtclConfig(cache_dir=tmp_path / "cache")


@pytest.fixture
def cache(settings):
    return Cache(settings.cache_dir)
