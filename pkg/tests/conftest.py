import numpy as np
import pytest

from helpers import load_fixture


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def fix_a():
    return load_fixture('fix_a')


@pytest.fixture
def fix_b():
    return load_fixture('fix_b')


@pytest.fixture
def fix_c():
    return load_fixture('fix_c')


@pytest.fixture
def fix_d():
    return load_fixture('fix_d')


@pytest.fixture
def fix_e():
    return load_fixture('fix_e')


@pytest.fixture
def fix_f():
    return load_fixture('fix_f')
