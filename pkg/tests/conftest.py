
import mpmath
import pytest
from hypothesis import settings

# timings are noisy next to long Monte Carlo runs on a shared core
settings.register_profile("relpimc", deadline=None)
settings.load_profile("relpimc")


def quad_bessel_k(nu: int, x: float) -> float:
    """K_nu(x) from the integral of exp(-x cosh t) cosh(nu t) over t >= 0 (tanh-sinh)."""
    with mpmath.workdps(40):
        xm = mpmath.mpf(x)
        # factor out exp(-x); the rest is negligible once x (cosh t - 1) > 150
        t_max = float(mpmath.acosh(1 + 150.0 / x))
        pts = [t_max * k / 16 for k in range(17)]
        val = mpmath.quad(lambda t: mpmath.exp(-xm * (mpmath.cosh(t) - 1)) * mpmath.cosh(nu * t), pts)
        return float(val * mpmath.exp(-xm))


@pytest.fixture(scope="session")
def bessel_oracle():
    cache = {}

    def get(nu, x):
        key = (nu, float(x))
        if key not in cache:
            cache[key] = quad_bessel_k(nu, x)
        return cache[key]
    return get


def rel_err(a, b):
    return abs(a - b) / abs(b)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
