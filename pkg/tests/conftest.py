from collections import OrderedDict

import pytest

_RESULTS: "OrderedDict[str, list]" = OrderedDict()


class Recorder:
    def __call__(self, criterion: str, ok: bool, detail: str = "") -> bool:
        _RESULTS.setdefault(criterion, []).append((bool(ok), detail))
        return ok


@pytest.fixture
def record():
    return Recorder()


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(_RESULTS):
        checks = _RESULTS[criterion]
        verdict = "PASS" if all(ok for ok, _ in checks) else "FAIL"
        details = "; ".join(f"{'ok' if ok else 'FAILED'}: {d}" for ok, d in checks)
        terminalreporter.write_line(f"{criterion} {verdict}  ({details})")
