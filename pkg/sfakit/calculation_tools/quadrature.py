"""
Quadrature rules for the oscillatory time integrals and the radial momentum
integrals used throughout sfakit
"""
# Third party imports
import numpy as np
from scipy.integrate import quad, quad_vec, simpson

# sfakit library imports
from sfakit.calculation_tools.errors import RefinementError

_SERIES_CUT = 1e-3


def _e1(x):
    """∫₀¹ exp(ixs) ds"""
    x = np.asarray(x, dtype=complex)
    small = np.abs(x) < _SERIES_CUT
    xs = np.where(small, 1.0, x)
    exact = (np.exp(1j * xs) - 1) / (1j * xs)
    series = 1 + 1j * x / 2 - x**2 / 6 - 1j * x**3 / 24
    return np.where(small, series, exact)


def _e2(x):
    """∫₀¹ s exp(ixs) ds"""
    x = np.asarray(x, dtype=complex)
    small = np.abs(x) < _SERIES_CUT
    xs = np.where(small, 1.0, x)
    exact = np.exp(1j * xs) / (1j * xs) + (np.exp(1j * xs) - 1) / xs**2
    series = 0.5 + 1j * x / 3 - x**2 / 8 - 1j * x**3 / 30
    return np.where(small, series, exact)


def check_phase_per_step(phase, max_phase_per_step, axis=-1):
    """Raises a RefinementError when the phase advances too much per step

    :param numpy.ndarray phase: Real phase samples along the integration axis
    :param float max_phase_per_step: Largest allowed increment (rad)

    :return: The largest increment found
    :rtype: float

    """
    if phase.shape[axis] < 2:
        return 0.0
    step = float(np.max(np.abs(np.diff(np.real(phase), axis=axis))))
    if step > max_phase_per_step:
        raise RefinementError('Time grid too coarse for the oscillatory integrand',
                              phase_per_step=step, limit=float(max_phase_per_step))
    return step


def filon_linear(times, amplitude, phase, axis=-1):
    """Integrates amplitude·exp(i·phase) over the grid, treating both the phase
    and the amplitude as linear on each interval

    :param numpy.ndarray times: The (increasing) time grid
    :param numpy.ndarray amplitude: Complex amplitude samples, time along ``axis``
    :param numpy.ndarray phase: Phase samples with the same shape

    :return: The integral (time axis removed)
    :rtype: numpy.ndarray

    """
    amplitude = np.moveaxis(np.asarray(amplitude, dtype=complex), axis, -1)
    phase = np.moveaxis(np.asarray(phase), axis, -1)
    h = np.diff(times)
    dphi = np.diff(phase, axis=-1)
    da = np.diff(amplitude, axis=-1)
    left = amplitude[..., :-1] * np.exp(1j * phase[..., :-1])
    slope = da * np.exp(1j * phase[..., :-1])
    pieces = h * (left * _e1(dphi) + slope * _e2(dphi))
    return pieces.sum(axis=-1)


def simpson_oscillatory(times, amplitude, phase, axis=-1):
    """Dense Simpson rule for amplitude·exp(i·phase)"""
    integrand = np.asarray(amplitude) * np.exp(1j * np.asarray(phase))
    return simpson(integrand, x=times, axis=axis)


def oscillatory_integral(times, amplitude, phase, mode='simpson', max_phase_per_step=None, axis=-1):
    """Dispatches to the requested oscillatory quadrature

    :param numpy.ndarray times: Time grid
    :param numpy.ndarray amplitude: Slowly varying amplitude samples
    :param numpy.ndarray phase: Phase samples (exp(i·phase) is applied)
    :param str mode: 'simpson' or 'filon'
    :param float max_phase_per_step: If given, the grid is checked first

    :return: The integral
    :rtype: numpy.ndarray

    """
    if max_phase_per_step is not None:
        check_phase_per_step(phase, max_phase_per_step, axis=axis)
    if mode == 'simpson':
        return simpson_oscillatory(times, amplitude, phase, axis=axis)
    if mode == 'filon':
        return filon_linear(times, amplitude, phase, axis=axis)
    raise ValueError(f'Unknown quadrature mode: {mode}')


def complex_quad(func, a, b, points=None, epsrel=1e-10, epsabs=1e-13, limit=400):
    """Adaptive quadrature of a complex scalar function on [a, b]

    :param callable func: f(x) -> complex
    :param float a: Lower limit
    :param float b: Upper limit
    :param list points: Break points inside the interval

    :return: The integral
    :rtype: complex

    """
    kwargs = dict(epsrel=epsrel, epsabs=epsabs, limit=limit)
    if points is not None and np.isfinite(b):
        kwargs['points'] = [x for x in points if a < x < b]
    re = quad(lambda x: np.real(func(x)), a, b, **kwargs)[0]
    im = quad(lambda x: np.imag(func(x)), a, b, **kwargs)[0]
    return re + 1j * im


def complex_quad_vec(func, a, b, points=None, epsrel=1e-10, epsabs=1e-13):
    """Adaptive quadrature of a complex array-valued function on [a, b]

    :param callable func: f(x) -> complex numpy array
    :param float a: Lower limit
    :param float b: Upper limit
    :param list points: Break points inside the interval

    :return: The integral
    :rtype: numpy.ndarray

    """
    def stacked(x):
        value = np.asarray(func(x), dtype=complex)
        return np.stack([value.real, value.imag])

    kwargs = dict(epsrel=epsrel, epsabs=epsabs, limit=2000)
    if points is not None:
        kwargs['points'] = [x for x in points if a < x < b]
    result = quad_vec(stacked, a, b, **kwargs)[0]
    return result[0] + 1j * result[1]


def pole_integral(func, q, order=1, p_max=30.0, epsrel=1e-10, epsabs=1e-14):
    """∫₀^∞ f(p)/(p² − q²)^order dp for a smooth (possibly vector-valued) f

    The pole at p = q (Re q > 0, small Im q) is removed analytically: the
    Taylor polynomial of g(p) = f(p)/(p + q)^order about Re q is integrated in
    closed form and only the regular remainder goes to the adaptive rule.

    :param callable func: f(p) for real p
    :param complex q: Pole position, the root with non-negative real part is used
    :param int order: 1 (simple pole) or 2 (double pole)
    :param float p_max: Split point between the pole region and the tail

    :return: The integral
    :rtype: complex or numpy.ndarray

    """
    q = complex(np.sqrt(complex(q) ** 2))
    if q.real < 0:
        q = -q

    def plain(p):
        return np.asarray(func(p), dtype=complex) / (p**2 - q**2) ** order

    tail = complex_quad_vec(plain, p_max, np.inf, epsrel=epsrel, epsabs=epsabs)
    r = q.real
    if r <= 0 or r >= p_max or abs(q.imag) > r:
        body = complex_quad_vec(plain, 0.0, p_max, points=[r] if 0 < r < p_max else None,
                                epsrel=epsrel, epsabs=epsabs)
        return body + tail

    def g(p):
        return np.asarray(func(p), dtype=complex) / (p + q) ** order

    log_term = np.log(p_max - q) - np.log(-q)
    g_r = g(r)
    if order == 1:
        def remainder(p):
            return (g(p) - g_r) / (p - q)
        body = g_r * log_term
    elif order == 2:
        h = 1e-4 * max(1.0, r)
        dg_r = (g(r + h) - g(r - h)) / (2 * h)
        inv_term = -1 / (p_max - q) - 1 / q

        def remainder(p):
            return (g(p) - g_r - dg_r * (p - r)) / (p - q) ** 2
        body = g_r * inv_term + dg_r * (log_term + (q - r) * inv_term)
    else:
        raise ValueError('Only simple and double poles are supported')

    body = body + complex_quad_vec(remainder, 0.0, p_max, points=[r], epsrel=epsrel, epsabs=epsabs)
    return body + tail
