import numpy as np
import pytest

from facegesture.imgio import GrayImage


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_image(rng, h, w, lo=0.0, hi=1.0):
    return GrayImage(rng.uniform(lo, hi, size=(h, w)))


def nested_loop_correlation(test, template):
    """Textbook overlay-multiply-sum correlation; independent of the package."""
    t = np.asarray(test, dtype=float)
    f = np.asarray(template, dtype=float)
    oh, ow = t.shape[0] - f.shape[0] + 1, t.shape[1] - f.shape[1] + 1
    out = np.zeros((oh, ow))
    for r in range(oh):
        for c in range(ow):
            s = 0.0
            for i in range(f.shape[0]):
                for j in range(f.shape[1]):
                    s += t[r + i, c + j] * f[i, j]
            out[r, c] = s
    return out


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in RESULTS:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
