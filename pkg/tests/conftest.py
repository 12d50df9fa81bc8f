from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import pytest

from fracseg.analysis import PartitionResult, analyze_partition
from fracseg.fraclap import StiffnessForm, assemble_form
from fracseg.params import FracParams, Grid1D
from fracseg.segregation import ContinuationSchedule, PenaltySpec, beta_continuation, gaussian_bumps

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def verdict():
    """Record and print one pass/fail line per acceptance criterion."""

    def _verdict(tag: str, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] {tag}: {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return ok

    return _verdict


@dataclass
class MinimizerRun:
    s: float
    form: StiffnessForm
    records: list
    seconds: float
    _result: PartitionResult | None = None

    @property
    def final(self) -> np.ndarray:
        return self.records[-1].u.u

    @property
    def result(self) -> PartitionResult:
        if self._result is None:
            self._result = analyze_partition(self.records[-1].u, self.form)
        return self._result


class _Runs:
    """k = 2 runs on (-1, 1), n = 512, β = 4^0 … 4^9, computed on first use."""

    def __init__(self):
        self._cache: dict[float, MinimizerRun] = {}

    def __call__(self, s: float) -> MinimizerRun:
        if s not in self._cache:
            t0 = time.perf_counter()
            form = assemble_form(Grid1D(-1.0, 1.0, 512), FracParams(s))
            u0 = gaussian_bumps(form, 2)
            recs = beta_continuation(ContinuationSchedule.geometric(1.0, 4.0, 10), PenaltySpec(1.0), form, u0)
            self._cache[s] = MinimizerRun(s, form, recs, time.perf_counter() - t0)
        return self._cache[s]


@pytest.fixture(scope="session")
def minimizer_runs():
    return _Runs()
