import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

from phifamily import make_exponential, make_kappa_exponential, make_uniform_grid  # noqa: E402


@pytest.fixture(scope="session")
def exp_phi():
    return make_exponential()


@pytest.fixture(scope="session")
def kappa_half():
    return make_kappa_exponential(0.5)


@pytest.fixture(scope="session")
def unit_grid():
    return make_uniform_grid(64)


@pytest.fixture(scope="session")
def left_grid():
    return make_uniform_grid(256, singular_ends="left")


_CRITERIA: dict[int, tuple[str, list[bool]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, desc): acceptance criterion number and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        n, desc = mark.args
        _CRITERIA.setdefault(n, (desc, []))[1].append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        desc, results = _CRITERIA[n]
        status = "PASS" if results and all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {n}: {status}  {desc}")
