import numpy as np
import pytest

from costal.pool import Oracle, Sample, SamplePool

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_pool(labels, num_classes=2, side=2):
    """Pool of constant tiny images whose ids are 0..n-1."""
    samples = [Sample(i, np.full((side, side, 1), (i % 7) / 7.0)) for i in range(len(labels))]
    pool = SamplePool.from_samples(samples, num_classes)
    return pool, Oracle(dict(enumerate(int(y) for y in labels)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
