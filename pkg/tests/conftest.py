import contextlib
import time

import pytest

from gelfand2d.bifurcation import clear_cache

_RESULTS = {}


@pytest.fixture
def criterion():
    """Time one acceptance criterion from a cold cache and record its verdict."""

    @contextlib.contextmanager
    def run(number, title, limit):
        clear_cache()
        start = time.perf_counter()
        number = number if isinstance(number, tuple) else (number, 0)
        _RESULTS[number] = (title, False, None, limit)
        yield
        elapsed = time.perf_counter() - start
        ok = elapsed < limit
        _RESULTS[number] = (title, ok, elapsed, limit)
        assert ok, f"criterion {number} took {elapsed:.2f} s (limit {limit} s)"

    return run


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    groups = {}
    for (number, _), entry in sorted(_RESULTS.items()):
        groups.setdefault(number, []).append(entry)
    for number, entries in groups.items():
        title = entries[0][0].split(" [")[0]
        ok = all(e[1] for e in entries)
        times = [e[2] for e in entries if e[2] is not None]
        took = f"{max(times):.2f} s" if len(times) == len(entries) else "n/a"
        if len(entries) > 1:
            title += f", {len(entries)} cases, slowest"
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(
            f"{verdict} criterion {number:2d}: {title} ({took}, limit {entries[0][3]} s)")
