import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_hpd(rng, d, cond=None):
    """Random Hpd matrix; with ``cond`` the eigenvalues span that condition number."""
    G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    if cond is None:
        return G @ G.conj().T + 0.1 * np.eye(d)
    Q, _ = np.linalg.qr(G)
    lam = np.geomspace(1.0, cond, d)
    return (Q * lam) @ Q.conj().T


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# criterion number -> (passed, title, detail), filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  C{num:<2} {title}: {detail}")
