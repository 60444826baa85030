import contextlib
import logging

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_CRITERIA: dict[str, tuple[bool, str]] = {}


@contextlib.contextmanager
def _record(name: str):
    detail = {}
    try:
        yield detail
    except BaseException:
        _CRITERIA[name] = (False, _fmt(detail))
        raise
    _CRITERIA[name] = (True, _fmt(detail))


def _fmt(detail: dict) -> str:
    return ", ".join(f"{k}={v}" for k, v in detail.items())


@pytest.fixture
def criterion():
    """Context manager recording one acceptance criterion's PASS/FAIL line."""
    return _record


@pytest.fixture(autouse=True)
def _quiet_dimension_warnings(caplog):
    caplog.set_level(logging.ERROR, logger="discsphere.operators")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA, key=lambda n: int(n[2:])):
        ok, detail = _CRITERIA[name]
        terminalreporter.write_line(f"{name} {'PASS' if ok else 'FAIL'}  {detail}")
