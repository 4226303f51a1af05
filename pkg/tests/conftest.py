import numpy as np
import pytest

from repdim import geometry, maps, transfer


@pytest.fixture(scope="session")
def std_domains():
    """Working pair for the deterministic quadratic runs: k = 0.8."""
    return geometry.example_domains(0.8)


@pytest.fixture(scope="session")
def std_constants(std_domains):
    U, K = std_domains
    return geometry.domain_constants(U, K)


@pytest.fixture(scope="session")
def z2_map(std_domains):
    U, _ = std_domains
    return maps.power_plus_c(0, 0.0, U)


@pytest.fixture(scope="session")
def z2_plus01(std_domains):
    U, _ = std_domains
    return maps.power_plus_c(0, 0.1, U)


@pytest.fixture(scope="session")
def grid128(std_domains):
    _, K = std_domains
    return transfer.Grid.from_annulus(K, 128, 128)


@pytest.fixture(scope="session")
def cantor_ifs():
    """Two branches of ratio 1/3: the middle-thirds system, dim log2/log3."""
    return maps.linear_ifs([(1.0 / 3.0, 0.0), (1.0 / 3.0, 2.0 / 3.0)])


@pytest.fixture(scope="session")
def quarter_ifs():
    """Three branches of ratio 1/4: dim log3/log4."""
    return maps.linear_ifs([(0.25, 0.0), (0.25, 0.375), (0.25, 0.75)])


@pytest.fixture(scope="session")
def ifs_grid():
    return transfer.Grid.interval(1)


def annulus_points(rng, domain, n):
    """Uniform sample in the chart of the open annulus, away from the boundary."""
    L = domain.log_radius
    u = rng.uniform(-0.95 * L, 0.95 * L, n)
    th = rng.uniform(0.0, 2.0 * np.pi, n)
    return np.exp(u + 1j * th)
