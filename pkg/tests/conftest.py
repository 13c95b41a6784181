import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    report = getattr(mod, "REPORT", None)
    if not report:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(report):
        ok, title, why, secs = report[k]
        line = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {title}  ({secs:.1f}s)"
        terminalreporter.write_line(line + (f"  [{why}]" if why else ""))
