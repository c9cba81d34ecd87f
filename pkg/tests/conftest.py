import os
import random
import sys

import pytest
from hypothesis import HealthCheck, settings

from rns_shield.container import write_volume
from rns_shield.rns import demo_moduli
from rns_shield.scheme import make_config

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=1000, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def demo_set():
    return demo_moduli()


@pytest.fixture(scope="session")
def cfg():
    return make_config(8, 2)


@pytest.fixture(scope="session")
def plain_cfg():
    return make_config(8, 2, mask_mode="plain")


@pytest.fixture
def rng():
    return random.Random(1234)


@pytest.fixture(scope="session")
def small_volume(cfg):
    data = random.Random(99).randbytes(16 * 512 - 37)
    return data, write_volume(data, cfg)


def random_grid(rng, config):
    w = config.sub_block_width
    return [[rng.getrandbits(w) for _ in range(config.n)] for _ in range(config.n)]


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
