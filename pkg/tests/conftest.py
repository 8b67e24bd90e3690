import numpy as np
import pytest

from binsketch.corpus import FunctionRecord, ProgramRecord

_acceptance_lines = []


@pytest.fixture
def acceptance():
    """Record a one-line verdict per acceptance criterion, then assert it.

    The lines are replayed in the terminal summary so every run prints one
    pass/fail line per criterion whether or not the test failed.
    """

    def record(criterion: int, ok: bool, detail: str) -> None:
        status = "PASS" if ok else "FAIL"
        _acceptance_lines.append(f"criterion {criterion}: {status}  {detail}")
        assert ok, f"criterion {criterion}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_acceptance_lines):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_program(rng, program_id, n_functions=4, d=6, class_id=None, with_labels=False):
    functions = []
    for i in range(n_functions):
        functions.append(
            FunctionRecord(
                function_id=f"{program_id}.f{i}",
                embedding=rng.standard_normal(d),
                loc=int(rng.integers(0, 200)),
                nos=int(rng.integers(0, 20)),
                class_label=int(rng.integers(0, 50)) if with_labels else None,
            )
        )
    return ProgramRecord(program_id=program_id, functions=functions, class_id=class_id)


def make_corpus(rng, n_programs=3, **kwargs):
    return [make_program(rng, f"prog{i:03d}", **kwargs) for i in range(n_programs)]
