import sys

import numpy as np
import pytest

from spectral_det import realization as rz


def corpus():
    """name -> system; the fixed set every identity is checked on."""
    return {
        "scalar": rz.scalar_system(),
        "rational": rz.rational_realization([(-1.0, 2), (-2.0, 2)]),
        "two_soliton": rz.soliton_system([1.0, 2.0], [1.0, 0.5]),
        "howland": rz.DiagonalRealization(lambda u: np.exp(-u), lambda u: np.exp(-u)),
    }


CORPUS = corpus()


@pytest.fixture(params=sorted(CORPUS))
def corpus_system(request):
    return request.param, CORPUS[request.param]


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, then its parts."""
    results = getattr(sys.modules.get("test_acceptance"), "RESULTS", None)
    if not results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(results):
        parts = results[num]
        bad = [p[0] for p in parts if not p[1]]
        tail = f"; failing: {', '.join(bad)}" if bad else ""
        tr.write_line(f"{'FAIL' if bad else 'PASS'} criterion {num}: "
                      f"{len(parts) - len(bad)}/{len(parts)} parts{tail}")
        for part, ok, detail in parts:
            tr.write_line(f"    {'pass' if ok else 'fail'} {part}: {detail}")
