"""
Two-band semiconductor Bloch equations and the harmonic currents of a solid

In the moving frame k(t) = K − D(t) the equations integrated per zone node K are

    dπ/dt = −i[ε_g(k) + σ e E·ξ_g(k) − i/T2] π − i e E·d_cv(k) w
    dw/dt = 4 Im[(e E·d_cv(k))* π]

with w = n_c − n_v and σ the sign flag of the Berry term. Populations are
derived from w, so n_v + n_c = 1 holds by construction. The harmonic sources
are the intraband current e Σ_m ∫ v_m(k) n_m and the interband current
e d/dt ∫ d_cv*(k) π + c.c.
"""
# Standard library imports
import logging

# Third party imports
import attr
import numpy as np
import pandas as pd

# sfakit library imports
from sfakit.calculation_tools.errors import DomainError, GridMismatchError, RefinementError, StepCriterionError
from sfakit.calculation_tools.helper import is_uniform
from sfakit.calculation_tools.parallel import serial_pool
from sfakit.general_settings.variable_names import VariableNames
from sfakit.main_modules.sfa_single import DipoleSeries, harmonic_spectrum
from sfakit.model_components.targets import CHARGE

logger = logging.getLogger('SBELogger')
_var = VariableNames()

DERIVATIVES = ('spectral', 'central')
STEPS_PER_PERIOD = 20
GROUND_DIFFERENCE = -1.0
MAX_PHASE_PER_STEP = np.pi / 2


@attr.s(eq=False)
class SBEState:
    """Populations and coherence of every zone node at one time

    :param numpy.ndarray n_v: Valence populations
    :param numpy.ndarray n_c: Conduction populations
    :param numpy.ndarray pi: Interband coherences

    """
    n_v = attr.ib(converter=np.asarray)
    n_c = attr.ib(converter=np.asarray)
    pi = attr.ib(converter=np.asarray)

    @classmethod
    def from_difference(cls, w, pi):
        """Builds the state from w = n_c − n_v"""
        w = np.asarray(w, dtype=float)
        return cls(n_v=(1 - w) / 2, n_c=(1 + w) / 2, pi=np.asarray(pi, dtype=complex))

    @property
    def w(self):
        return self.n_c - self.n_v

    @property
    def bloch_length(self):
        """w² + 4|π|², unity for a pure state"""
        return self.w**2 + 4 * np.abs(self.pi) ** 2


@attr.s(eq=False)
class SBETrajectory:
    """Solution of the Bloch equations on a zone grid

    :param numpy.ndarray times: Uniform time grid, shape (N,)
    :param numpy.ndarray k_points: Zone nodes K, shape (M, dimension)
    :param numpy.ndarray weights: Zone quadrature weights, shape (M,)
    :param numpy.ndarray drift: In-plane drift D(t), shape (N, dimension)
    :param numpy.ndarray w: Population differences, shape (N, M)
    :param numpy.ndarray pi: Coherences, shape (N, M)

    """
    times = attr.ib(converter=np.asarray)
    k_points = attr.ib(converter=np.asarray)
    weights = attr.ib(converter=np.asarray)
    drift = attr.ib(converter=np.asarray)
    w = attr.ib(converter=np.asarray)
    pi = attr.ib(converter=np.asarray)

    def __attrs_post_init__(self):
        n, m = len(self.times), len(self.k_points)
        if self.w.shape != (n, m) or self.pi.shape != (n, m):
            raise GridMismatchError(f'Trajectory arrays must have shape ({n}, {m})')
        if self.drift.shape != (n, self.k_points.shape[-1]):
            raise GridMismatchError('The drift does not match the time grid')

    @property
    def n_c(self):
        return (1 + self.w) / 2

    @property
    def n_v(self):
        return (1 - self.w) / 2

    def state(self, index):
        return SBEState.from_difference(self.w[index], self.pi[index])

    @property
    def bloch_length(self):
        return self.w**2 + 4 * np.abs(self.pi) ** 2

    @property
    def bloch_drift(self):
        """max over K and t of |B(t) − B(0)|"""
        return float(np.max(np.abs(self.bloch_length - self.bloch_length[0])))

    @property
    def excitation(self):
        """Zone-averaged n_c at every time"""
        return self.n_c @ self.weights / np.sum(self.weights)

    def kinetic_momenta(self, model):
        """k = K − D(t) wrapped into the zone, shape (N, M, dimension)"""
        return model.wrap(self.k_points[None, :, :] - self.drift[:, None, :])


def plane_components(pulse, vectors, dimension):
    """Components of 3-vectors along the first ``dimension`` polarization axes"""
    axes = np.array(pulse.axes[:dimension])
    return np.asarray(vectors) @ axes.T


def _pad(values):
    """(N, dimension) in-plane vectors as (N, 2) columns (x = major axis)"""
    out = np.zeros((len(values), 2), dtype=values.dtype)
    out[:, :values.shape[1]] = values
    return out


def step_limit(model, pulse):
    """Largest time step resolving both ω₀ and max ε_g with STEPS_PER_PERIOD steps"""
    fastest = min(pulse.period, 2 * np.pi / model.max_gap())
    return fastest / STEPS_PER_PERIOD


def sbe_time_grid(pulse, dt):
    """Uniform grid of step dt over [0, t_F]"""
    if dt <= 0:
        raise DomainError('The time step must be positive')
    n = int(np.floor(pulse.duration / dt + 1e-9))
    return dt * np.arange(n + 1)


def _zone(model, k_grid):
    if np.isscalar(k_grid):
        return model.brillouin_zone(int(k_grid))
    points, weights = k_grid
    points = np.asarray(points, dtype=float).reshape(len(weights), model.dimension)
    return points, np.asarray(weights, dtype=float)


def _coefficients(model, k, field, berry_sign):
    """e E·d_cv and the complex detuning ε_g + σ e E·ξ_g − i/T2 at one time"""
    coupling = CHARGE * (model.dipole(k) @ field)
    detuning = model.gap(k) + berry_sign * CHARGE * (model.berry_gap(k) @ field) - 1j * model.dephasing_rate
    return coupling, detuning


def _derivatives(coefficients, w, pi):
    coupling, detuning = coefficients
    return 4 * np.imag(np.conj(coupling) * pi), -1j * detuning * pi - 1j * coupling * w


def _integrate_block(model, k_points, field, drift, dt, berry_sign):
    """Classical RK4 for a block of zone nodes; field and drift are given on the half-step grid"""
    n_steps = (len(field) - 1) // 2
    m = len(k_points)
    w = np.full(m, GROUND_DIFFERENCE)
    pi = np.zeros(m, dtype=complex)
    w_out = np.empty((n_steps + 1, m))
    pi_out = np.empty((n_steps + 1, m), dtype=complex)
    w_out[0], pi_out[0] = w, pi

    def coefficients(j):
        return _coefficients(model, model.wrap(k_points - drift[j]), field[j], berry_sign)

    start = coefficients(0)
    for n in range(n_steps):
        middle = coefficients(2 * n + 1)
        end = coefficients(2 * n + 2)
        k1w, k1p = _derivatives(start, w, pi)
        k2w, k2p = _derivatives(middle, w + dt / 2 * k1w, pi + dt / 2 * k1p)
        k3w, k3p = _derivatives(middle, w + dt / 2 * k2w, pi + dt / 2 * k2p)
        k4w, k4p = _derivatives(end, w + dt * k3w, pi + dt * k3p)
        w = w + dt / 6 * (k1w + 2 * k2w + 2 * k3w + k4w)
        pi = pi + dt / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
        w_out[n + 1], pi_out[n + 1] = w, pi
        start = end
    return w_out, pi_out


def integrate_sbe(model, pulse, k_grid, dt, berry_sign=1.0, pool=None, chunk=64):
    """Integrates the two-band Bloch equations from n_c = 0, π = 0

    :param BandModel model: The crystal
    :param LaserPulse pulse: The pulse
    :param k_grid: Points per zone direction, or a (k_points, weights) pair
    :param float dt: RK4 time step
    :param float berry_sign: Sign σ of the E·ξ_g term
    :param WorkerPool pool: Parallel map over blocks of zone nodes
    :param int chunk: Zone nodes per block

    :return: The trajectory on the grid ``sbe_time_grid(pulse, dt)``
    :rtype: SBETrajectory

    """
    limit = step_limit(model, pulse)
    if dt > limit * (1 + 1e-9):
        raise StepCriterionError(f'dt = {dt:.6g} does not give {STEPS_PER_PERIOD} steps per fastest period',
                                 suggested_dt=limit)
    points, weights = _zone(model, k_grid)
    times = sbe_time_grid(pulse, dt)
    half_times = np.linspace(0.0, times[-1], 2 * len(times) - 1)
    field = plane_components(pulse, pulse.electric_field(half_times), model.dimension)
    drift = plane_components(pulse, pulse.drift(half_times), model.dimension)
    pool = pool or serial_pool()

    def block(indices):
        return _integrate_block(model, points[indices], field, drift, dt, berry_sign)

    blocks = [np.arange(i, min(i + chunk, len(points))) for i in range(0, len(points), chunk)]
    results = pool.map(block, blocks)
    w = np.concatenate([r[0] for r in results], axis=1)
    pi = np.concatenate([r[1] for r in results], axis=1)
    trajectory = SBETrajectory(times=times, k_points=points, weights=weights, drift=drift[::2], w=w, pi=pi)
    logger.info(f'Integrated {len(points)} zone nodes over {len(times)} steps; '
                f'peak excitation {np.max(trajectory.excitation):.3e}')
    return trajectory


def _current_at(values, times, t):
    if t is None:
        return values
    index = int(np.argmin(np.abs(times - t)))
    if not np.isclose(times[index], t, rtol=0.0, atol=1e-9 * max(1.0, abs(t))):
        raise DomainError(f't = {t} is not a node of the trajectory time grid')
    return values[index]


def intraband_current(model, trajectory, t=None):
    """J_ra(t) = e Σ_m ∫_BZ v_m(K − D(t)) n_m(K, t) dK with v_m = ∇ε_m

    :param BandModel model: The crystal
    :param SBETrajectory trajectory: The Bloch solution
    :param float t: A node of the time grid; None returns the whole series

    :return: Current with (x, y) = (major, minor) axis columns, shape (N, 2) or (2,)
    :rtype: numpy.ndarray

    """
    k = trajectory.kinetic_momenta(model)
    flux = (model.conduction_velocity(k) * trajectory.n_c[..., None]
            + model.valence_velocity(k) * trajectory.n_v[..., None])
    values = CHARGE * np.einsum('nmd,m->nd', flux, trajectory.weights)
    return _current_at(_pad(values), trajectory.times, t)


def time_derivative(times, values, method='spectral'):
    """d/dt of a uniformly sampled real series along axis 0

    'spectral' multiplies by iΩ after an FFT; 'central' uses second-order
    centred differences.
    """
    if method not in DERIVATIVES:
        raise DomainError(f'Unknown derivative {method!r}; expected one of {DERIVATIVES}')
    if not is_uniform(times):
        raise DomainError('Time derivatives need a uniform grid')
    dt = times[1] - times[0]
    if method == 'central':
        return np.gradient(values, dt, axis=0, edge_order=2)
    n = len(times)
    spectrum = np.fft.rfft(values, axis=0)
    omega = 2 * np.pi * np.fft.rfftfreq(n, dt)
    spectrum = spectrum * (1j * omega).reshape((-1,) + (1,) * (values.ndim - 1))
    if n % 2 == 0:
        spectrum[-1] = 0.0
    return np.fft.irfft(spectrum, n=n, axis=0)


def interband_polarization(model, trajectory):
    """P(t) = ∫_BZ d_cv*(K − D(t)) π(K, t) dK, shape (N, dimension)"""
    dipole = model.dipole(trajectory.kinetic_momenta(model))
    return np.einsum('nmd,nm,m->nd', np.conj(dipole), trajectory.pi, trajectory.weights)


def interband_current(model, trajectory, derivative='spectral'):
    """J_er(t) = e d/dt ∫_BZ d_cv*(K − D(t)) π(K, t) dK + c.c.

    :param BandModel model: The crystal
    :param SBETrajectory trajectory: The Bloch solution
    :param str derivative: 'spectral' or 'central'

    :return: Real current, shape (N, 2)
    :rtype: numpy.ndarray

    """
    polarization = 2 * np.real(interband_polarization(model, trajectory))
    return _pad(CHARGE * time_derivative(trajectory.times, polarization, derivative))


def sfa_interband_current(model, pulse, k_grid, dt, derivative='spectral', berry_sign=1.0, pool=None, chunk=64):
    """Interband current of the electron-hole SFA

    J_er^(i)(t) = e d/dt ∫dt′ ∫_BZ dK |d^(i)(K − D(t))| |d^(j)(K − D(t′))| E^(j)(t′)
                  × exp(−iS(K, t, t′) − (t − t′)/T2 + i(φ^(j)(t′) − φ^(i)(t))) × (−i e w₀) + c.c.

    with S the integral of ε_g + σ e E·ξ_g along K − D and w₀ = −1. The
    magnitude/phase products are carried as the complex d^(i)* d^(j). The t′
    integral is accumulated by a trapezoid recursion, so the cost is linear in
    both the number of times and of zone nodes.

    :param BandModel model: The crystal
    :param LaserPulse pulse: The pulse
    :param k_grid: Points per zone direction, or a (k_points, weights) pair
    :param float dt: Time step
    :param str derivative: 'spectral' or 'central'
    :param float berry_sign: Sign σ of the E·ξ_g term

    :return: (times, current of shape (N, 2))
    :rtype: tuple

    """
    points, weights = _zone(model, k_grid)
    times = sbe_time_grid(pulse, dt)
    field = plane_components(pulse, pulse.electric_field(times), model.dimension)
    drift = plane_components(pulse, pulse.drift(times), model.dimension)
    rate = model.dephasing_rate
    pool = pool or serial_pool()

    def block(indices):
        k = model.wrap(points[indices][None, :, :] - drift[:, None, :])
        dipole = model.dipole(k)
        source = np.einsum('nmd,nd->nm', dipole, field)
        frequency = model.gap(k) + berry_sign * CHARGE * np.einsum('nmd,nd->nm', model.berry_gap(k), field)
        phase_step = dt / 2 * (frequency[1:] + frequency[:-1])
        worst = float(np.max(np.abs(phase_step))) if len(phase_step) else 0.0
        if worst > MAX_PHASE_PER_STEP:
            raise RefinementError('The SFA action changes too fast for the time step', phase_per_step=worst,
                                  suggested_dt=dt * MAX_PHASE_PER_STEP / worst)
        decay = np.exp(-1j * phase_step - rate * dt)
        inner = np.zeros(source.shape, dtype=complex)
        for n in range(len(times) - 1):
            inner[n + 1] = decay[n] * (inner[n] + dt / 2 * source[n]) + dt / 2 * source[n + 1]
        pi = -1j * CHARGE * GROUND_DIFFERENCE * inner
        return np.einsum('nmd,nm,m->nd', np.conj(dipole), pi, weights[indices])

    blocks = [np.arange(i, min(i + chunk, len(points))) for i in range(0, len(points), chunk)]
    polarization = np.sum(pool.map(block, blocks), axis=0)
    current = CHARGE * time_derivative(times, 2 * np.real(polarization), derivative)
    return times, _pad(current)


@attr.s(eq=False)
class SolidSpectrum:
    """Intraband, interband and coherent total harmonic spectra

    :param numpy.ndarray order: Harmonic orders
    :param numpy.ndarray intra: |FFT(window·J_ra)|² summed over components
    :param numpy.ndarray inter: |FFT(window·J_er)|² summed over components
    :param numpy.ndarray total: |FFT(window·(J_ra + J_er))|²
    :param numpy.ndarray components: Complex spectrum of the total current, shape (n, 2)

    """
    order = attr.ib()
    intra = attr.ib()
    inter = attr.ib()
    total = attr.ib()
    components = attr.ib()

    def to_frame(self):
        return pd.DataFrame({_var.harmonic_order: self.order, _var.intra: self.intra,
                             _var.inter: self.inter, _var.total: self.total})

    def polarization_ratio(self, orders=None):
        """Minor-axis over major-axis spectral power, optionally within an order range"""
        power = np.abs(self.components) ** 2
        keep = np.ones(len(self.order), dtype=bool) if orders is None else \
            (self.order >= orders[0]) & (self.order <= orders[1])
        return float(np.sum(power[keep, 1]) / np.sum(power[keep, 0]))


def solid_harmonic_spectrum(times, intra, inter, omega0, window='hann'):
    """Harmonic spectra of the two currents and of their coherent sum

    :param numpy.ndarray times: Common uniform time grid
    :param numpy.ndarray intra: J_ra, shape (N, 2)
    :param numpy.ndarray inter: J_er, shape (N, 2)
    :param float omega0: Carrier frequency
    :param str window: 'hann' or 'none'

    :return: The spectra
    :rtype: SolidSpectrum

    """
    intra = np.asarray(intra, dtype=float)
    inter = np.asarray(inter, dtype=float)
    if intra.shape != inter.shape or len(intra) != len(times):
        raise GridMismatchError(f'Current grids differ: {intra.shape}, {inter.shape} on {len(times)} times')
    parts = [harmonic_spectrum(DipoleSeries(times=times, values=values), omega0, window=window)
             for values in (intra, inter, intra + inter)]
    return SolidSpectrum(order=parts[0].order, intra=parts[0].intensity, inter=parts[1].intensity,
                         total=parts[2].intensity, components=parts[2].components)


def currents_frame(times, intra, inter):
    """Table with the columns t_au, Jra_x, Jra_y, Jer_x, Jer_y"""
    columns = [_var.time] + _var.currents
    return pd.DataFrame(np.column_stack([times, intra, inter]), columns=columns)
