"""
Ground-state amplitude a(t)

Four strategies supply the amplitude used by every SFA amplitude and dipole:

- unit: a ≡ 1
- adk_envelope / adk_instantaneous: quasi-static ADK rates at F = E0·f(t) or F = |E(t)|
- sfa_markov / sfa_full: the self-consistent SFA kernel, with or without the
  a(t′) → a(t) replacement
- table: an externally computed track read from CSV (t_au, re_a, im_a)
"""
# Standard library imports
import logging

# Third party imports
import attr
import numpy as np
import pandas as pd
from scipy.integrate import cumulative_trapezoid
from scipy.special import factorial, gamma as gamma_function

# sfakit library imports
from sfakit.calculation_tools.errors import DomainError, OutputError
from sfakit.calculation_tools.helper import dot, tensor_grid_nodes
from sfakit.calculation_tools.interpolation import interpolate_complex
from sfakit.calculation_tools.parallel import serial_pool
from sfakit.general_settings.variable_names import VariableNames
from sfakit.main_modules.sfa_single import action

logger = logging.getLogger('DepletionLogger')
_var = VariableNames()

STRATEGIES = ('unit', 'adk_envelope', 'adk_instantaneous', 'sfa_markov', 'sfa_full', 'table')
CONVENTIONS = ('amplitude', 'population')
GRID_POINTS = {1: 2001, 3: 41}


@attr.s(frozen=True)
class AdkParams:
    """Parameters of the quasi-static tunneling rate

    :param float ip: Ionization potential (a.u.)
    :param float z: Charge of the residual core
    :param int l: Orbital angular momentum
    :param int m: Magnetic quantum number

    """
    ip = attr.ib(converter=float)
    z = attr.ib(default=1.0, converter=float)
    l = attr.ib(default=0, converter=int)  # noqa: E741
    m = attr.ib(default=0, converter=int)

    def __attrs_post_init__(self):
        if self.ip <= 0:
            raise DomainError('The ionization potential must be positive')
        if self.z <= 0:
            raise DomainError('The core charge must be positive')
        if self.l < abs(self.m):
            raise DomainError(f'Need l >= |m|, got l = {self.l}, m = {self.m}')

    @property
    def n_star(self):
        """Effective principal quantum number Z/√(2Iₚ)"""
        return self.z / np.sqrt(2 * self.ip)

    @property
    def l_star(self):
        return self.n_star - 1

    @property
    def c2(self):
        """|C_{n*l*}|² = 2^{2n*}/(n*Γ(n*+l*+1)Γ(n*−l*))"""
        n, l = self.n_star, self.l_star
        return 2 ** (2 * n) / (n * gamma_function(n + l + 1) * gamma_function(n - l))

    @property
    def f_lm(self):
        l, m = self.l, abs(self.m)
        return (2 * l + 1) * factorial(l + m) / (2**m * factorial(m) * factorial(l - m))

    @property
    def f0(self):
        """Atomic field scale (2Iₚ)^{3/2}"""
        return (2 * self.ip) ** 1.5


def adk_rate(params, field):
    """Cycle-averaged ADK rate for a linearly polarized field of amplitude F

    W = |C|² √(6/π) f_lm Iₚ (2F₀/F)^{2n*−|m|−3/2} exp(−2F₀/3F), F₀ = (2Iₚ)^{3/2}

    :param AdkParams params: Rate parameters
    :param field: Field amplitude(s) F ≥ 0 (a.u.)

    :return: The rate (a.u.), 0 where F = 0
    :rtype: numpy.ndarray

    """
    field = np.abs(np.asarray(field, dtype=float))
    rate = np.zeros(field.shape)
    on = field > 0
    f = field[on]
    exponent = 2 * params.n_star - abs(params.m) - 1.5
    rate[on] = (params.c2 * np.sqrt(6 / np.pi) * params.f_lm * params.ip
                * (2 * params.f0 / f) ** exponent * np.exp(-2 * params.f0 / (3 * f)))
    return rate if rate.ndim else float(rate)


def static_adk_rate(params, field):
    """Static (not cycle-averaged) ADK rate at the instantaneous field strength

    Removes the cycle-averaging factor √(3F/(πF₀)) from :func:`adk_rate`.

    """
    field = np.abs(np.asarray(field, dtype=float))
    safe = np.where(field > 0, field, 1.0)
    averaging = np.sqrt(3 * safe / (np.pi * params.f0))
    rate = np.where(field > 0, adk_rate(params, field) / averaging, 0.0)
    return rate if rate.ndim else float(rate)


def _validate_times(instance, attribute, value):
    if value.ndim != 1 or len(value) < 2 or np.any(np.diff(value) <= 0):
        raise DomainError('Amplitude times must be a strictly increasing grid')


@attr.s(eq=False)
class AmplitudeTrack:
    """Sampled ground-state amplitude, callable as a(t)

    :param numpy.ndarray times: Increasing time grid (a.u.)
    :param numpy.ndarray values: Complex amplitudes on the grid
    :param str strategy: The strategy that produced it

    """
    times = attr.ib(converter=lambda v: np.asarray(v, dtype=float), validator=_validate_times)
    values = attr.ib(converter=lambda v: np.asarray(v, dtype=complex))
    strategy = attr.ib(default='unit')

    def __attrs_post_init__(self):
        if self.values.shape != self.times.shape:
            raise DomainError('One amplitude per time point is required')
        if not np.all(np.isfinite(self.values)):
            raise DomainError('Amplitudes must be finite')

    def __call__(self, t):
        return interpolate_complex(self.times, self.values, t)

    @property
    def population(self):
        """|a(t)|² on the grid"""
        return np.abs(self.values) ** 2

    @property
    def final_population(self):
        return float(self.population[-1])

    def is_monotone(self, tol=1e-12):
        """True when |a| never increases along the grid"""
        return bool(np.all(np.diff(np.abs(self.values)) <= tol))

    def to_frame(self):
        """pandas.DataFrame with columns t_au, re_a, im_a"""
        return pd.DataFrame({_var.time: self.times, _var.re_a: self.values.real,
                             _var.im_a: self.values.imag})


def unit_amplitude(times):
    """a ≡ 1 on the grid"""
    return AmplitudeTrack(times, np.ones(len(times)), strategy='unit')


def adk_amplitude(pulse, params, times, sub_mode='envelope', convention='amplitude', cycle_average=True):
    """Ground-state amplitude from the time-dependent ADK rate

    :param LaserPulse pulse: The pulse
    :param AdkParams params: Rate parameters
    :param numpy.ndarray times: Time grid starting at 0
    :param str sub_mode: 'envelope' (F = E0·f(t)) or 'instantaneous' (F = |E(t)|)
    :param str convention: 'amplitude' (|a|² = exp(−∫W)) or 'population' (|a| = exp(−∫W))
    :param bool cycle_average: Use the cycle-averaged rate in the envelope sub-mode

    :return: The amplitude track (real and positive)
    :rtype: AmplitudeTrack

    """
    if convention not in CONVENTIONS:
        raise DomainError(f'Unknown convention {convention!r}; expected one of {CONVENTIONS}')
    times = np.asarray(times, dtype=float)
    if sub_mode == 'envelope':
        field = pulse.e0 * pulse.envelope_value(times)
        rate = adk_rate(params, field) if cycle_average else static_adk_rate(params, field)
    elif sub_mode == 'instantaneous':
        field = np.linalg.norm(pulse.electric_field(times), axis=-1)
        rate = static_adk_rate(params, field)
    else:
        raise DomainError(f'Unknown ADK sub-mode {sub_mode!r}')

    integrated = cumulative_trapezoid(rate, times, initial=0.0)
    factor = 0.5 if convention == 'amplitude' else 1.0
    values = np.exp(-factor * integrated)
    logger.info(f'ADK ({sub_mode}): final population {values[-1] ** 2:.6g}')
    return AmplitudeTrack(times, values, strategy=f'adk_{sub_mode}')


def stationary_momentum(pulse, t, tp):
    """(∫_{t′}^{t} D)/(t − t′), continued by D(t) at t′ = t"""
    tau = t - tp
    close = np.abs(tau) < 1e-12
    safe = np.where(close, 1.0, tau)
    ps = (pulse.drift_integral(t) - pulse.drift_integral(tp)) / safe[..., None]
    return np.where(close[..., None], pulse.drift(t), ps)


def _first_dipole(target, k, conjugate):
    if conjugate:
        return np.conj(target.dipole(np.conj(k)))
    return target.dipole(k)


def sfa_depletion_kernel(target, pulse, t, tp, mode='saddle', epsilon=1e-2, conjugate_first_dipole=False,
                         grid_points=None, grid_p_max=8.0):
    """γ(t, t′) = ∫dᵈp [E(t)·d(p−D(t))][E(t′)·d(p−D(t′))] exp(−iS(p,t,t′))

    The momentum integral runs over the target's dimension d. In 'saddle' mode
    the prefactors are taken at the stationary momentum and the Gaussian gives
    (π/(ε + iτ/2))^{d/2}; in 'grid' mode the integrand is damped by
    exp(−ε|p − p_s|²) and summed on a tensor grid.

    :param target: Target exposing ``ip``, ``dimension``, ``dipole`` (and ``unit`` in 1D)
    :param LaserPulse pulse: The pulse
    :param float t: Later time
    :param tp: Earlier time(s) t′ ≤ t
    :param str mode: 'saddle' or 'grid'
    :param float epsilon: Regularization ε > 0
    :param bool conjugate_first_dipole: Use d*(p−D(t)) in the first factor
    :param int grid_points: Points per axis in 'grid' mode (default 2001 in 1D, 41 in 3D)

    :return: Kernel values, shape of ``tp``
    :rtype: numpy.ndarray

    """
    if epsilon <= 0:
        raise DomainError('The kernel regularization must be positive')
    tp = np.asarray(tp, dtype=float)
    if np.any(tp > t + 1e-12) or np.any(tp < -1e-12):
        raise DomainError('The kernel needs 0 <= t\' <= t')
    dim = target.dimension
    ps = stationary_momentum(pulse, np.asarray(t, dtype=float), tp)
    field_t = pulse.electric_field(t)
    field_tp = pulse.electric_field(tp)
    drift_t = pulse.drift(t)
    drift_tp = pulse.drift(tp)

    if mode == 'saddle':
        first = dot(field_t, _first_dipole(target, ps - drift_t, conjugate_first_dipole))
        second = dot(field_tp, target.dipole(ps - drift_tp))
        spread = (np.pi / (epsilon + 0.5j * (t - tp))) ** (dim / 2)
        return first * second * np.exp(-1j * action(pulse, target.ip, ps, t, tp)) * spread

    if mode != 'grid':
        raise DomainError(f'Unknown kernel mode {mode!r}')

    grid_points = grid_points or GRID_POINTS[dim]
    tensor_grid_nodes(grid_points, dim, what='The depletion kernel grid')
    axis = np.linspace(-grid_p_max, grid_p_max, grid_points)
    h = axis[1] - axis[0]
    if dim == 1:
        offsets = axis[:, None] * target.unit
        weight = h
    else:
        mesh = np.meshgrid(axis, axis, axis, indexing='ij')
        offsets = np.stack([m.ravel() for m in mesh], axis=-1)
        weight = h**3
    damping = np.exp(-epsilon * dot(offsets, offsets))

    values = np.empty(tp.shape, dtype=complex)
    for index, tpi in np.ndenumerate(tp):
        p = ps[index] + offsets
        first = dot(field_t, _first_dipole(target, p - drift_t, conjugate_first_dipole))
        second = dot(field_tp[index], target.dipole(p - drift_tp[index]))
        phase = action(pulse, target.ip, p, t, tpi)
        values[index] = weight * np.sum(first * second * damping * np.exp(-1j * phase))
    return values


def kernel_matrix(target, pulse, times, pool=None, **kernel_options):
    """Lower-triangular matrix γ(t_n, t_j), j ≤ n, on a time grid"""
    times = np.asarray(times, dtype=float)
    pool = pool or serial_pool()

    def row(n):
        return sfa_depletion_kernel(target, pulse, times[n], times[:n + 1], **kernel_options)

    rows = pool.map(row, range(len(times)))
    matrix = np.zeros((len(times), len(times)), dtype=complex)
    for n, values in enumerate(rows):
        matrix[n, :n + 1] = values
    return matrix


def _trapezoid_weights(times, n):
    """Trapezoid weights of times[:n + 1]"""
    if n == 0:
        return np.zeros(1)
    h = np.diff(times[:n + 1])
    w = np.zeros(n + 1)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


def solve_volterra(times, kernel, a0=1.0):
    """Solves da/dt = −∫₀ᵗ K(t, t′) a(t′) dt′ with a(0) = a0

    Trapezoid rule for both the memory integral and the time step, with the
    diagonal term treated implicitly, which makes the scheme second order.

    :param numpy.ndarray times: Increasing grid
    :param numpy.ndarray kernel: K(t_n, t_j), shape (n, n), used for j ≤ n

    :return: a on the grid
    :rtype: numpy.ndarray

    """
    times = np.asarray(times, dtype=float)
    kernel = np.asarray(kernel, dtype=complex)
    n_t = len(times)
    if kernel.shape != (n_t, n_t):
        raise DomainError('The kernel must be a square matrix on the time grid')
    a = np.zeros(n_t, dtype=complex)
    a_dot = np.zeros(n_t, dtype=complex)
    a[0] = a0
    for n in range(1, n_t):
        volterra_step(times, kernel[n, :n + 1], a, a_dot, n)
    return a


def volterra_step(times, row, a, a_dot, n):
    """Advances a and da/dt from times[n - 1] to times[n] in place

    :param numpy.ndarray row: K(t_n, t_j) for j = 0..n

    """
    h = times[n] - times[n - 1]
    w = _trapezoid_weights(times, n)
    memory = np.sum(w[:-1] * row[:n] * a[:n])
    diagonal = w[-1] * row[n]
    a[n] = (a[n - 1] + h / 2 * a_dot[n - 1] - h / 2 * memory) / (1 + h / 2 * diagonal)
    a_dot[n] = -(memory + diagonal * a[n])
    return a[n]


def markov_amplitude(times, kernel, a0=1.0):
    """a(t) = exp(−W(t))a(0), W(t) = ∫₀ᵗ ds ∫₀ˢ K(s, t′) dt′"""
    times = np.asarray(times, dtype=float)
    rate = np.array([memory_rate(times, kernel[n, :n + 1], n) for n in range(len(times))])
    return a0 * np.exp(-cumulative_trapezoid(rate, times, initial=0.0))


def memory_rate(times, row, n):
    """∫₀^{t_n} K(t_n, t′) dt′ by the trapezoid rule"""
    return np.sum(_trapezoid_weights(times, n) * row[:n + 1])


def sfa_depletion(target, pulse, times, mode='markov', pool=None, **kernel_options):
    """Self-consistent SFA depletion of the ground state

    As printed, γ carries no conjugate and the amplitude obeys da/dt = +∫γa;
    the conjugated kernel (``conjugate_first_dipole=True``) is a decay kernel,
    da/dt = −∫γa.

    :param target: The target
    :param LaserPulse pulse: The pulse
    :param numpy.ndarray times: Time grid starting at 0
    :param str mode: 'markov' or 'full'

    :return: The amplitude track
    :rtype: AmplitudeTrack

    """
    times = np.asarray(times, dtype=float)
    gamma = kernel_matrix(target, pulse, times, pool=pool, **kernel_options)
    decay = gamma if kernel_options.get('conjugate_first_dipole', False) else -gamma
    if mode == 'markov':
        values = markov_amplitude(times, decay)
    elif mode == 'full':
        values = solve_volterra(times, decay)
    else:
        raise DomainError(f'Unknown SFA depletion mode {mode!r}')
    track = AmplitudeTrack(times, values, strategy=f'sfa_{mode}')
    if not track.is_monotone(tol=1e-9):
        logger.warning('SFA depletion is not monotone on this grid')
    logger.info(f'SFA depletion ({mode}): final population {track.final_population:.6g}')
    return track


def load_amplitude_table(path):
    """Reads an amplitude track from CSV with columns t_au, re_a, im_a

    Lines starting with '#' are ignored.

    :param str path: The file

    :return: The track
    :rtype: AmplitudeTrack

    """
    try:
        frame = pd.read_csv(path, comment='#')
    except (OSError, pd.errors.ParserError) as e:
        raise OutputError(f'Could not read amplitude table {path}: {e}') from e
    missing = {_var.time, _var.re_a, _var.im_a} - set(frame.columns)
    if missing:
        raise DomainError(f'Amplitude table {path} lacks columns {sorted(missing)}')
    values = frame[_var.re_a].to_numpy() + 1j * frame[_var.im_a].to_numpy()
    track = AmplitudeTrack(frame[_var.time].to_numpy(), values, strategy='table')
    if np.any(np.abs(values) > 1 + 1e-9):
        raise DomainError('Tabulated amplitudes must satisfy |a| <= 1')
    if abs(values[0] - 1) > 1e-6:
        raise DomainError('Tabulated amplitudes must start at a(0) = 1')
    return track


def ground_state_amplitude(strategy, pulse, target, times, options=None, pool=None):
    """Builds a(t) for the configured strategy

    :param str strategy: One of unit, adk_envelope, adk_instantaneous, sfa_markov, sfa_full, table:<path>
    :param LaserPulse pulse: The pulse
    :param target: The target
    :param numpy.ndarray times: Time grid
    :param dict options: The depletion settings section

    :return: The track
    :rtype: AmplitudeTrack

    """
    options = options or {}
    if strategy.startswith('table:'):
        return load_amplitude_table(strategy.split(':', 1)[1])
    if strategy == 'table':
        return load_amplitude_table(options['table_path'])
    if strategy == 'unit':
        return unit_amplitude(times)
    if strategy in ('adk_envelope', 'adk_instantaneous'):
        params = AdkParams(target.ip, z=options.get('adk_charge', 1.0), l=options.get('adk_l', 0),
                           m=options.get('adk_m', 0))
        return adk_amplitude(pulse, params, times, sub_mode=strategy.split('_', 1)[1],
                             convention=options.get('convention', 'amplitude'),
                             cycle_average=options.get('cycle_average', True))
    if strategy in ('sfa_markov', 'sfa_full'):
        grid_key = 'grid_points' if target.dimension == 1 else 'grid_points_3d'
        kernel_options = dict(mode=options.get('kernel_mode', 'saddle'),
                              epsilon=options.get('kernel_epsilon_au', 1e-2),
                              conjugate_first_dipole=options.get('conjugate_first_dipole', False),
                              grid_points=options.get(grid_key),
                              grid_p_max=options.get('grid_p_max_au', 8.0))
        return sfa_depletion(target, pulse, times, mode=strategy.split('_', 1)[1], pool=pool, **kernel_options)
    raise DomainError(f'Unknown depletion strategy {strategy!r}; expected one of {STRATEGIES}')
