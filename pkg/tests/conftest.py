import pytest

from geopro.alspg import AlspgConfig

# criterion number -> "PASS"/"FAIL" line, filled by the acceptance tests
VERDICTS: dict = {}


def record(number: int, ok: bool, detail: str) -> bool:
    line = f"CRITERION {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    VERDICTS[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(VERDICTS):
            terminalreporter.write_line(VERDICTS[k])


@pytest.fixture(autouse=True)
def _rho_cap_guard(monkeypatch):
    """Fail any test in which a penalty exceeds the configured cap."""
    import geopro.alspg as alspg

    original = alspg.update_penalties

    def guarded(state, v_now, v_prev, beta=5.0, rho_max=1e8, ratio=1.0):
        out = original(state, v_now, v_prev, beta, rho_max, ratio)
        assert (out.rhos <= rho_max).all(), "penalty exceeded its cap"
        return out

    monkeypatch.setattr(alspg, "update_penalties", guarded)
    yield


__all__ = ["record", "VERDICTS", "AlspgConfig"]
