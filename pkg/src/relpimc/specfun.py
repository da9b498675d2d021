"""Modified Bessel functions of the second kind, orders 0 and 1.

Small arguments (x <= 2) use the ascending series; larger arguments use
Steed's continued fraction for the exponentially scaled pair
``exp(x) K0(x)``, ``exp(x) K1(x)`` (Temme 1975, Numerical Recipes ``bessik``).
Both branches reach double precision, and the scaled form keeps
``log_bessel_k1`` and ``k0_over_k1`` finite far beyond the underflow point
of K1 itself.

The ``_nb`` kernels are numba-compiled and are what the sampler calls; the
public wrappers add argument checking.
"""
import math

from numba import njit

EULER_GAMMA = 0.57721566490153286061
_SPLIT = 2.0
_EPS = 1e-17
_MAXIT = 10000


@njit(cache=True)
def _series_k0_k1(x):
    # K0 = -(ln(x/2) + gamma) I0 + sum y^k/(k!)^2 H_k
    # K1 = 1/x + ln(x/2) I1 - (x/4) sum y^k/(k!(k+1)!) (psi(k+1) + psi(k+2))
    y = 0.25 * x * x
    lg = math.log(0.5 * x)
    t0 = 1.0          # y^k / (k!)^2
    t1 = 0.5 * x      # (x/2) y^k / (k!(k+1)!)
    harm = 0.0        # H_k
    i0 = 0.0
    i1 = 0.0
    s0 = 0.0
    s1 = 0.0
    for k in range(60):
        i0 += t0
        i1 += t1
        s0 += t0 * harm
        # psi(k+1) + psi(k+2) = -2 gamma + 2 H_k + 1/(k+1)
        s1 += t1 * (2.0 * harm + 1.0 / (k + 1.0))
        harm += 1.0 / (k + 1.0)
        t0 *= y / ((k + 1.0) * (k + 1.0))
        t1 *= y / ((k + 1.0) * (k + 2.0))
        if t0 < 1e-18 * i0:
            break
    k0 = -(lg + EULER_GAMMA) * i0 + s0
    k1 = 1.0 / x + (lg + EULER_GAMMA) * i1 - 0.5 * s1
    return k0, k1


@njit(cache=True)
def _scaled_cf_k0_k1(x):
    """exp(x) K0(x), exp(x) K1(x) and K0/K1 from Steed's CF2, for x >= 2."""
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d
    delh = d
    q1 = 0.0
    q2 = 1.0
    a1 = 0.25
    q = a1
    c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, _MAXIT):
        a -= 2.0 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1 = q2
        q2 = qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) < _EPS:
            break
    h = a1 * h
    k0s = math.sqrt(math.pi / (2.0 * x)) / s
    ratio_1_0 = (x + 0.5 - h) / x
    return k0s, k0s * ratio_1_0, 1.0 / ratio_1_0


@njit(cache=True)
def k0_nb(x):
    if x <= _SPLIT:
        return _series_k0_k1(x)[0]
    return _scaled_cf_k0_k1(x)[0] * math.exp(-x)


@njit(cache=True)
def k1_nb(x):
    if x <= _SPLIT:
        return _series_k0_k1(x)[1]
    return _scaled_cf_k0_k1(x)[1] * math.exp(-x)


@njit(cache=True)
def log_k1_nb(x):
    if x <= _SPLIT:
        return math.log(_series_k0_k1(x)[1])
    return math.log(_scaled_cf_k0_k1(x)[1]) - x


@njit(cache=True)
def k0_over_k1_nb(x):
    if x <= _SPLIT:
        k0, k1 = _series_k0_k1(x)
        return k0 / k1
    return _scaled_cf_k0_k1(x)[2]


def _check(x):
    x = float(x)
    if not (math.isfinite(x) and x > 0.0):
        raise ValueError(f"Bessel K argument must be positive and finite, got {x!r}")
    return x


def bessel_k0(x: float) -> float:
    """K0(x) for x > 0."""
    return k0_nb(_check(x))


def bessel_k1(x: float) -> float:
    """K1(x) for x > 0."""
    return k1_nb(_check(x))


def log_bessel_k1(x: float) -> float:
    """ln K1(x), finite for arguments where K1 itself underflows (x >~ 700)."""
    return log_k1_nb(_check(x))


def k0_over_k1(x: float) -> float:
    """K0(x)/K1(x), in (0, 1) for every x > 0."""
    return k0_over_k1_nb(_check(x))

