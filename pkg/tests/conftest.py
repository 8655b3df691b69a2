import numpy as np
import pytest

# filled by tests/test_acceptance.py; printed after the run
ACCEPTANCE = {}


def random_orthonormal(rng, n, k):
    q, _ = np.linalg.qr(rng.standard_normal((n, k)))
    return q


def random_partition(rng, n, k):
    """Labels 0..k-1 with every cluster nonempty."""
    labels = np.concatenate([np.arange(k), rng.integers(0, k, size=n - k)])
    return rng.permutation(labels)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line("criterion %2d: %s  %s" % (key, "PASS" if ok else "FAIL", detail))
