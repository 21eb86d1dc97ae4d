import numpy as np
import pytest

from orlicz.space import SparseVector

# acceptance results collected by tests/test_acceptance.py, printed at session end
ACCEPTANCE_LINES = {}


def random_sparse(rng, max_support=32, exp_range=(-10, 10), max_index=1000):
    """Support <= max_support, magnitudes in [2^lo, 2^hi], random signs."""
    k = int(rng.integers(1, max_support + 1))
    idx = rng.choice(max_index, size=k, replace=False) + 1
    mags = 2.0 ** rng.uniform(*exp_range, size=k)
    signs = rng.choice([-1.0, 1.0], size=k)
    return SparseVector.from_arrays(idx, signs * mags)


def sparse_corpus(count, seed=20240611, **kw):
    rng = np.random.default_rng(seed)
    return [random_sparse(rng, **kw) for _ in range(count)]


@pytest.fixture(scope="session")
def corpus_small():
    return sparse_corpus(300, seed=11)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
