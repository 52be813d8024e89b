from __future__ import annotations

import pytest

from warcorpus.corpusgen import CorpusSpec, generate_corpus

SMALL_SPEC = CorpusSpec(domains=3, urls_per_domain=4, captures_per_url=3,
                        body_min=200, body_max=4000, files=2, seed=7,
                        period=("20111201000000", "20120131235959"))


@pytest.fixture(scope="session")
def default_corpus(tmp_path_factory):
    """The 1000-record benchmark corpus: (directory, captures)."""
    out = tmp_path_factory.mktemp("default-corpus")
    captures = generate_corpus(CorpusSpec(), out)
    return out, captures


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("small-corpus")
    captures = generate_corpus(SMALL_SPEC, out)
    return out, captures


_acceptance: list[tuple[str, str]] = []
_notes: dict[str, list[str]] = {}


@pytest.fixture
def acceptance_note(request):
    """Attach a line (e.g. a measured ratio) to this criterion's summary."""
    name = request.node.name
    return lambda text: _notes.setdefault(name, []).append(text)


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    if "acceptance" not in report.keywords:
        return
    name = report.nodeid.split("::")[-1]
    _acceptance.append((name, "PASS" if report.passed else "FAIL"))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance:
        terminalreporter.write_line(f"{outcome}  {name}")
        for note in _notes.get(name, []):
            terminalreporter.write_line(f"      {note}")
