from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).parent / "fixtures"

settings.register_profile(
    "vaxnet", deadline=None, suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
    derandomize=True,
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "vaxnet"))

# acceptance bookkeeping: {criterion: [(test id, outcome)]}
_ACCEPTANCE: dict[int, list[tuple[str, str]]] = {}
ACCEPTANCE_TITLES = {
    1: "modularity oracle equivalence",
    2: "AUC oracle equivalence",
    3: "gradient suite",
    4: "planted-community recovery",
    5: "classifier battery on planted BOW signal",
    6: "ordering-signal separation",
    7: "term-scatter quadrants",
    8: "pipeline determinism",
    9: "invariant suites (1,000 cases per property)",
}


def pytest_collection_modifyitems(session, config, items):
    # the acceptance file runs last so criterion 9 can read the property results
    items.sort(key=lambda it: it.nodeid.split("::")[0].endswith("test_acceptance.py"))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        _ACCEPTANCE.setdefault(marker.args[0], []).append((item.nodeid, rep.outcome))


def acceptance_results() -> dict[int, list[tuple[str, str]]]:
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_TITLES):
        runs = _ACCEPTANCE.get(n)
        if not runs:
            tr.write_line(f"criterion {n} [PRIMARY] NOT RUN  {ACCEPTANCE_TITLES[n]}")
            continue
        ok = all(o == "passed" for _, o in runs)
        tr.write_line(f"criterion {n} [PRIMARY] {'PASS' if ok else 'FAIL'}  {ACCEPTANCE_TITLES[n]} "
                      f"({sum(o == 'passed' for _, o in runs)}/{len(runs)} checks)")


@pytest.fixture(scope="session")
def fixture_path() -> Path:
    return FIXTURES / "fixture_small.jsonl"


@pytest.fixture(scope="session")
def fixture_dataset(fixture_path):
    from vaxnet.ingest import read_dataset
    return read_dataset(fixture_path, strict=True)


@pytest.fixture(scope="session")
def fixture_filtered(fixture_dataset):
    from vaxnet.ingest import KeywordFilter, filter_by_keywords, filter_retweet_only_users
    return filter_retweet_only_users(filter_by_keywords(fixture_dataset, KeywordFilter.default()))


@pytest.fixture(scope="session")
def fixture_tokens() -> dict[str, list[str]]:
    return json.loads((FIXTURES / "fixture_small.tokens.json").read_text("utf-8"))
