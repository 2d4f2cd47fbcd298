import numpy as np
import pytest
from hypothesis import settings

from ruelle import corpus
from ruelle.torus_maps import IntMatrix2, TorusMap, TrigPolynomial

settings.register_profile("ruelle", max_examples=40, deadline=None)
settings.load_profile("ruelle")


@pytest.fixture(scope="session")
def bundled():
    return corpus()


@pytest.fixture(scope="session")
def cat():
    return TorusMap.cat()


@pytest.fixture(scope="session")
def one():
    return TrigPolynomial.constant(1.0)


def x1_map(eps):
    A = IntMatrix2.from_rows([[2, 1], [1, 1]])
    return TorusMap(A, (TrigPolynomial.sine((1, 0), eps), TrigPolynomial.zero()))


@pytest.fixture(scope="session")
def eps005():
    return x1_map(0.05)


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


@pytest.fixture(scope="session")
def operator(bundled):
    """Cached default-weight Galerkin operators: ``operator(name, K)``."""
    from ruelle.galerkin import assemble

    cache = {}

    def get(name, K):
        if (name, K) not in cache:
            fmap, g = bundled[name]
            cache[name, K] = assemble(fmap, g, K)
        return cache[name, K]
    return get


# -- one summary line per acceptance criterion ----------------------------------

_CRITERIA: list[tuple[str, str, str]] = []


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _CRITERIA.append((props["criterion"], "PASS" if report.passed else "FAIL", props.get("detail", "")))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label, verdict, detail in sorted(_CRITERIA, key=lambda c: int(c[0])):
        terminalreporter.write_line(f"criterion {label}: {verdict}  {detail}")
