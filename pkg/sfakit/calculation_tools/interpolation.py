"""
This module contains functions for evaluating sampled complex tracks such as the
ground-state amplitude a(t) at arbitrary (also complex) times.
"""
# Third party imports
import numpy as np


def interpolate_complex(times, values, t):
    """Linear interpolation of a complex track at Re(t)

    Values beyond the ends of the grid are held constant.

    :param numpy.ndarray times: Increasing sample times
    :param numpy.ndarray values: Complex samples
    :param t: Evaluation time(s), complex times are taken at their real part

    :return: The interpolated values
    :rtype: numpy.ndarray

    """
    t_re = np.real(np.asarray(t))
    values = np.asarray(values, dtype=complex)
    re = np.interp(t_re, times, values.real)
    im = np.interp(t_re, times, values.imag)
    return re + 1j * im


def interpolate_real(times, values, t):
    """Linear interpolation of a real track at Re(t)"""
    return np.interp(np.real(np.asarray(t)), times, np.asarray(values, dtype=float))
