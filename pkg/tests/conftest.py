import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from graphseed import build_shift, decompose
from graphseed.errors import ReconstructionError
from graphseed.filters import design_lowpass_kernel
from graphseed.graphs import gen_er

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def er_instance(seed, n=10, K=4, p=0.3, need_kernel=True):
    """First ER draw from ``seed`` that is diagonalizable with a kernel filter."""
    rng = np.random.default_rng(seed)
    for _ in range(500):
        shift = build_shift(gen_er(n, p, rng))
        try:
            basis = decompose(shift)
            filt = design_lowpass_kernel(basis, K) if need_kernel else None
        except ReconstructionError:
            continue
        return shift, basis, filt, rng
    raise RuntimeError("no valid ER draw")


@pytest.fixture
def er10():
    return er_instance(7)
