import pytest
from hypothesis import settings

from revlab.geometry import (
    BridgeSpec,
    FlatTorus,
    FourierTorus,
    RoundSphere,
    build_bridge_metric,
    build_profile_metric,
)
from revlab.spectrum import analytic_spectrum, assemble_spectral_table

settings.register_profile("default", max_examples=30, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def sphere():
    return build_profile_metric(RoundSphere())


@pytest.fixture(scope="session")
def flat():
    return build_profile_metric(FlatTorus())


@pytest.fixture(scope="session")
def bridge():
    return build_bridge_metric(BridgeSpec())


@pytest.fixture(scope="session")
def fourier():
    return build_profile_metric(FourierTorus(1.0, [0.04, -0.03], [0.3, 1.1]))


@pytest.fixture(scope="session")
def sphere_table(sphere):
    return assemble_spectral_table(sphere, 31.0, 2048, cluster_tol=1e-3)


@pytest.fixture(scope="session")
def flat_analytic():
    return analytic_spectrum(FlatTorus(), 40.0)


@pytest.fixture(scope="session")
def sphere_analytic():
    return analytic_spectrum(RoundSphere(), 40.0)



@pytest.fixture(scope="session")
def bridge_small(bridge):
    return assemble_spectral_table(bridge, 20.0, 1024)


def pytest_terminal_summary(terminalreporter):
    from .test_acceptance import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(LINES):
            terminalreporter.write_line(LINES[key])
