import math

import numpy as np
import pytest
from scipy.special import gammaln

from asympto.flat import FlatFunction, SectorSpec, moments
from asympto.sequences import FormalSeries, WeightSequence


def make_euler(order: int = 40) -> FormalSeries:
    """a_p = (-1)^p p!, stored in log form so large orders stay exact."""
    p = np.arange(order + 1, dtype=float)
    return FormalSeries.from_log(gammaln(p + 1.0), np.pi * (p % 2.0),
                                 label="euler")


def make_small_series(order: int = 500) -> FormalSeries:
    """a_p = p! 2^(-p^2): smaller than every geometric multiple of p!."""
    p = np.arange(order + 1, dtype=float)
    return FormalSeries.from_log(gammaln(p + 1.0) - p * p * math.log(2.0),
                                 np.zeros(order + 1), label="small")


@pytest.fixture(scope="session")
def euler_series():
    return make_euler(40)


@pytest.fixture(scope="session")
def small_series():
    return make_small_series(500)


@pytest.fixture(scope="session")
def exp_kernel_half_sector():
    """GevreyExp(1) on the opening-1/2 sector: the reference kernel."""
    return FlatFunction.gevrey_exp(1.0, sector=SectorSpec(direction=0.0,
                                                          opening=0.5))


@pytest.fixture(scope="session")
def exp_kernel_moments(exp_kernel_half_sector):
    return moments(exp_kernel_half_sector, 44)


@pytest.fixture(scope="session")
def factorials():
    return WeightSequence.gevrey(1.0)
