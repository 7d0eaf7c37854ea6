import os
from pathlib import Path

import pytest
from hypothesis import settings

from odralite import fixtures, store

DATA = Path(__file__).parent / "data"

settings.register_profile("default", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion")
    config._criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, text = marker.args
    criteria = item.config._criteria
    failed = report.failed or (report.when == "call" and report.skipped)
    if report.when == "call" or failed:
        prev = criteria.get(number, (text, True))
        criteria[number] = (text, prev[1] and not failed)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    criteria = getattr(config, "_criteria", {})
    if not criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(criteria):
        text, ok = criteria[number]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {text}")


@pytest.fixture
def seed():
    return fixtures.seed_store()


@pytest.fixture
def seed_links():
    return fixtures.seed_store(course_links=True)


@pytest.fixture
def equi():
    return fixtures.equijoin_store()


@pytest.fixture
def committed():
    def load(name):
        with open(DATA / name, encoding="utf-8", newline="") as fh:
            return store.load_snapshot(fh)

    return load
