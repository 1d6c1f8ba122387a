import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_CRITERIA = {}


@pytest.fixture
def criterion(request):
    """Record the measured quantities of an acceptance criterion."""
    marker = request.node.get_closest_marker("acceptance")
    number = marker.args[0] if marker else None
    entry = _CRITERIA.setdefault(number, {"name": request.node.name, "detail": [], "outcome": None})

    def note(text):
        entry["detail"].append(str(text))

    return note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or rep.when != "call" and not (rep.when == "setup" and rep.failed):
        return
    entry = _CRITERIA.setdefault(marker.args[0], {"name": item.name, "detail": [], "outcome": None})
    entry["outcome"] = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
    entry["seconds"] = getattr(rep, "duration", 0.0)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(c for c in _CRITERIA if c is not None):
        e = _CRITERIA[k]
        detail = "; ".join(e["detail"])
        tr.write_line(f"criterion {k:>2} {e['outcome'] or 'NOT RUN':<5} {e['name']} ({e.get('seconds', 0):.1f}s) {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
