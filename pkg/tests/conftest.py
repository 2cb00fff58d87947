import numpy as np
import pytest

from hybrid_msem.mesh import MeshConfig, build_mesh
from hybrid_msem.polybasis import BasisSet1D

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(20181)


@pytest.fixture
def unit_mesh():
    def make(k=3, deformation="orthogonal", c=0.15, domain=(0.0, 1.0, 0.0, 1.0)):
        return build_mesh(MeshConfig(k, k, domain=domain, deformation=deformation, amplitude=c))

    return make


@pytest.fixture
def basis():
    return BasisSet1D.build


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
