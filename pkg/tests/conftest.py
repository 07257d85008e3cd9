import pytest

from profile_ewma.model import reference_model


@pytest.fixture(params=[0.1, 0.5, 0.9], ids=lambda r: f"rho={r}")
def ref_model(request):
    return reference_model(request.param)


@pytest.fixture
def model05():
    return reference_model(0.5)


ACCEPTANCE_LINES: list[str] = []


class CriterionRecorder:
    """Collects PASS/FAIL lines so every checked cell is reported, not just the first failure."""

    def __init__(self):
        self.failed = []

    def __call__(self, label: str, ok: bool, detail: str = "") -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  {label}  {detail}".rstrip()
        ACCEPTANCE_LINES.append(line)
        if not ok:
            self.failed.append(line)
        return ok

    def assert_all(self):
        assert not self.failed, "\n".join(self.failed)


@pytest.fixture
def criterion():
    return CriterionRecorder()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
