from pathlib import Path

import pytest

from pathkg.corpus import load_corpus, load_lexicon
from pathkg.kg import load_kg

DEMO = Path(__file__).resolve().parents[1] / "src" / "pathkg" / "data" / "demo"
GOLDEN = Path(__file__).resolve().parent / "golden"


@pytest.fixture(scope="session")
def demo_lex():
    return load_lexicon(DEMO / "lexicon.tsv")


@pytest.fixture(scope="session")
def demo_kg():
    return load_kg(DEMO / "kg.tsv")


@pytest.fixture(scope="session")
def demo_corpus(demo_lex):
    return load_corpus(DEMO / "corpus.jsonl", demo_lex)


_ACCEPTANCE: list[tuple[str, str, str]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
        _ACCEPTANCE.append((marker.args[0], "PASS" if rep.passed else "FAIL", detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"[{status}] {name}" + (f"  ({detail})" if detail else ""))
