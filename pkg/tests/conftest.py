import os

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_collection_modifyitems(config, items):
    if os.environ.get("BOUNDARY_VQE_LONG") == "1":
        return
    skip = pytest.mark.skip(reason="set BOUNDARY_VQE_LONG=1 to run")
    for item in items:
        if "optional" in item.keywords:
            item.add_marker(skip)


_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per acceptance criterion, then assert it."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, {})

    def record(label: str, ok: bool, detail: str):
        lines[label] = f"{label}: {'PASS' if ok else 'FAIL'}  {detail}"
        assert ok, lines[label]

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, {})
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(lines, key=lambda s: (len(s.split()[1]), s)):
        terminalreporter.write_line(lines[label])
