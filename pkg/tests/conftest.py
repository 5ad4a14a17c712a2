from __future__ import annotations

import numpy as np
import pytest

from randhold.paths import BrownianPath

ACCEPTANCE_LINES: list[str] = []


def record(line):
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def coarsen(W, mesh, factor):
    """Restrict a Brownian path on ``mesh.refine(log2 factor)`` back to ``mesh``, keeping the fine detail."""
    d = W.dim
    m = W.substeps
    inc = W.increments.reshape(-1, factor, d)
    sub = W.sub_increments.reshape(len(mesh) - 1, factor * m, d)
    sub = sub.reshape(len(mesh) - 1, m, factor, d).sum(axis=2)
    return BrownianPath(mesh=mesh, increments=inc.sum(axis=1), sub_increments=sub)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
