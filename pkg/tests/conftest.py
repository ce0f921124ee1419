import pytest

from hodgekit import OperatorSet, SCHEMES, harmonic_basis, meshgen

ACCEPTANCE_LINES: list[str] = []

MESHES = sorted(meshgen.BUNDLED)


@pytest.fixture(scope="session")
def operators():
    """Cached OperatorSet per (mesh, scheme)."""
    cache = {}

    def get(mesh, scheme="combinatorial"):
        if (mesh, scheme) not in cache:
            cache[mesh, scheme] = OperatorSet.build(meshgen.bundled(mesh), scheme)
        return cache[mesh, scheme]

    return get


@pytest.fixture(scope="session")
def bases(operators):
    cache = {}

    def get(mesh, scheme="combinatorial"):
        if (mesh, scheme) not in cache:
            ops = operators(mesh, scheme)
            cache[mesh, scheme] = [harmonic_basis(ops, p) for p in range(ops.dim + 1)]
        return cache[mesh, scheme]

    return get


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
