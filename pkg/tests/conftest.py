import pytest

from crowdwifi.distributions import SensitivityDistribution
from crowdwifi.model import MarketParams

ALL_DISTS = [
    SensitivityDistribution.uniform(),
    SensitivityDistribution.truncated_normal(0.5, 1.0),
    SensitivityDistribution.truncated_exponential(2.0),
    SensitivityDistribution.truncated_pareto(2.0, 1.0),
]


@pytest.fixture
def uniform():
    return SensitivityDistribution.uniform()


@pytest.fixture
def tnormal():
    return SensitivityDistribution.truncated_normal(0.5, 1.0)


@pytest.fixture
def market():
    return MarketParams()


_CRITERIA: dict[int, list[tuple[str, str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_runtest_logreport(report):
    number = dict(report.user_properties).get("criterion")
    if number is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        if hasattr(report, "wasxfail"):
            outcome = "xfail" if report.skipped else "xpass"
        else:
            outcome = report.outcome
        _CRITERIA.setdefault(number, []).append((report.nodeid.split("::")[-1], outcome))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        results = _CRITERIA[number]
        bad = [name + (" [known, xfail]" if outcome == "xfail" else f" [{outcome}]")
               for name, outcome in results if outcome != "passed"]
        verdict = "PASS" if not bad else "FAIL"
        line = f"criterion {number}: {verdict} ({len(results) - len(bad)}/{len(results)} checks)"
        if bad:
            line += " failing: " + ", ".join(bad)
        terminalreporter.write_line(line)
