import numpy as np
import pytest

from gplaplace.data import linear_benchmark_dataset
from gplaplace.kernels import parse_kernel
from gplaplace.laplace import criteria_suite
from gplaplace.model import GPModel, build_prior
from gplaplace.oracle import nested_sampling_evidence, quadrature_evidence


@pytest.fixture(scope="session")
def linear():
    return linear_benchmark_dataset()


@pytest.fixture(scope="session")
def se_model():
    expr = parse_kernel("SE")
    return GPModel(expr), build_prior(expr)


@pytest.fixture(scope="session")
def linear_suite(linear, se_model):
    model, prior = se_model
    return criteria_suite(model, prior, linear, seed=1)


@pytest.fixture(scope="session")
def linear_quadrature(linear, se_model):
    model, prior = se_model
    return quadrature_evidence(model, prior, linear, points_per_dim=401)


@pytest.fixture(scope="session")
def linear_nested(linear, se_model):
    model, prior = se_model
    return nested_sampling_evidence(model, prior, linear, live_points=500, dlogz_stop=0.01, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------------------
# acceptance report: one PASS/FAIL line per criterion

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion reported in the summary")


def pytest_runtest_logreport(report):
    label = dict(report.user_properties).get("_criterion")
    if label is None:
        return
    if report.when == "call" or report.outcome != "passed":
        facts = {k: v for k, v in report.user_properties if k != "_criterion"}
        ok = _CRITERIA.get(label, (True,))[0] and report.outcome == "passed"
        _CRITERIA[label] = (ok, facts)


@pytest.hookimpl(tryfirst=True)
def pytest_runtest_setup(item):
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        item.user_properties.append(("_criterion", marker.args[0]))


def _short(value):
    if isinstance(value, float):
        return f"{value:.4g}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_short(v) for v in value) + "]"
    return str(value)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_CRITERIA):
        ok, facts = _CRITERIA[label]
        detail = ", ".join(f"{k}={_short(v)}" for k, v in facts.items() if k != "cases")
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}  {detail}")
