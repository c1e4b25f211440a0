import pytest

from kgspec.graphfile import BUNDLED_VALID, load_bundled
from kgspec.measure import perron_frobenius


@pytest.fixture(scope="session")
def graphs():
    return {name: load_bundled(name) for name in BUNDLED_VALID}


@pytest.fixture(scope="session")
def pfs(graphs):
    return {name: perron_frobenius(g) for name, g in graphs.items()}


@pytest.fixture(scope="session")
def o2(graphs, pfs):
    return graphs["o2"], pfs["o2"]


@pytest.fixture(scope="session")
def flip23(graphs, pfs):
    return graphs["flip23"], pfs["flip23"]


@pytest.fixture(scope="session")
def twovertex(graphs, pfs):
    return graphs["twovertex"], pfs["twovertex"]


@pytest.fixture(scope="session")
def trivial11(graphs, pfs):
    return graphs["trivial11"], pfs["trivial11"]


@pytest.fixture(scope="session")
def skew2v(graphs, pfs):
    return graphs["skew2v"], pfs["skew2v"]
