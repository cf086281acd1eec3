import numpy as np
import pytest

from quadsim.control import default_gains, mixing_pair
from quadsim.params import resolve_model
from quadsim import _kernels as K


@pytest.fixture(scope="session")
def cf2x():
    return resolve_model("cf2x")


@pytest.fixture(scope="session")
def cf2p():
    return resolve_model("cf2p")


@pytest.fixture(scope="session")
def gains(cf2x):
    return default_gains(cf2x)


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels(cf2x):
    # compile (or load the disk cache of) every jitted kernel once so that
    # individual tests never pay compilation time inside timed sections
    mix, mix_inv = mixing_pair(cf2x)
    K.warmup(cf2x.packed, cf2x.motor_xy, np.asarray(mix), np.asarray(mix_inv))
