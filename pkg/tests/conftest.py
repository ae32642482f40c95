import numpy as np
import pytest

from vqm3d.core import CameraParams


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def cam():
    return CameraParams(focal_length=100.0, baseline=0.05, side=1, alpha=120.0, z_near=0.3, z_far=10.0)


# one summary line per acceptance criterion, whatever the verbosity
_acceptance = []


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    props = dict(report.user_properties)
    if "criterion" in props:
        _acceptance.append((props["criterion"], report.outcome, props.get("detail", "")))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for crit, outcome, detail in sorted(_acceptance, key=lambda r: int(r[0])):
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {crit:>2}: {verdict}  {detail}")
