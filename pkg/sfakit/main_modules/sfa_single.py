"""
Single-active-electron strong-field approximation

Direct and rescattered ATI amplitudes, the time-dependent HHG dipole and the
harmonic spectrum. Time integrals are done by oscillation-aware quadrature on
uniform grids; the intermediate momentum integrals by stationary phase about
the return momentum.

Conventions: atomic units, e = −1, drift momentum D(t) = −A(t). An amplitude
track ``a`` is any callable a(t) (``None`` means a ≡ 1).
"""
# Standard library imports
import logging

# Third party imports
import attr
import numpy as np
from scipy.integrate import simpson
from scipy.signal.windows import hann

# sfakit library imports
from sfakit.calculation_tools.errors import DomainError, GridMismatchError
from sfakit.calculation_tools.helper import dot, is_uniform, tensor_grid_nodes
from sfakit.calculation_tools.parallel import serial_pool
from sfakit.calculation_tools.quadrature import oscillatory_integral

logger = logging.getLogger('SFALogger')

AMPLITUDE_KINDS = ('direct_b0', 'rescattered_b1', 'total')
INTERMEDIATE_POINTS = {1: 401, 3: 21}


def _unit(t):
    return np.ones(np.shape(t), dtype=complex)


def _track(a):
    return _unit if a is None else a


def _dipole(target, k, t):
    """Dipole at kinetic momenta k; targets with moving nuclei expose ``dipole_at(k, t)``"""
    at = getattr(target, 'dipole_at', None)
    return target.dipole(k) if at is None else at(k, t)


def _rescatter_g(target, k1, k2, t):
    at = getattr(target, 'rescatter_g_at', None)
    return target.rescatter_g(k1, k2) if at is None else at(k1, k2, t)


def target_action(target, pulse, p, t, tp):
    """:func:`action` with the target's binding energy, time dependent when it has ``ip_phase``"""
    return action(pulse, target.ip, p, t, tp, ip_phase=getattr(target, 'ip_phase', None))


def action(pulse, ip, p, t, tp, ip_phase=None):
    """S(p, t, t′) = ∫_{t′}^{t} [(p − D(τ))²/2 + Iₚ] dτ in closed form

    Accepts complex times. ``ip_phase`` replaces Iₚ·t by an arbitrary
    antiderivative of a time-dependent binding energy.

    :param LaserPulse pulse: The pulse
    :param float ip: Ionization potential (a.u.)
    :param numpy.ndarray p: Canonical momenta, shape (..., 3)
    :param t: Final time(s)
    :param tp: Initial time(s)
    :param callable ip_phase: Optional Φ(t) with dΦ/dt = Ĩₚ(t)

    :return: The action
    :rtype: numpy.ndarray

    """
    p = np.asarray(p)
    t = np.asarray(t)
    tp = np.asarray(tp)
    delta = t - tp
    shift = pulse.drift_integral(t) - pulse.drift_integral(tp)
    square = pulse.drift_square_integral(t) - pulse.drift_square_integral(tp)
    kinetic = 0.5 * (dot(p, p) * delta - 2 * dot(p, shift) + square)
    if ip_phase is None:
        return kinetic + ip * delta
    return kinetic + ip_phase(t) - ip_phase(tp)


def return_momentum(pulse, t, tp):
    """Stationary momentum (∫_{t′}^{t} D dτ)/(t − t′) of the quadratic action"""
    t = np.asarray(t)
    tp = np.asarray(tp)
    return (pulse.drift_integral(t) - pulse.drift_integral(tp)) / (t - tp)[..., None]


def spreading_factor(tau, delta, dimension):
    """(2π/(iτ + δ))^{dimension/2} of the Gaussian momentum integral"""
    return (2 * np.pi / (1j * np.asarray(tau) + delta)) ** (dimension / 2)


def default_time_grid(pulse, ip, p_max=0.0, points_per_period=40, t_end=None):
    """Uniform grid resolving the fastest phase rate (p_max + |D|)²/2 + Iₚ

    :param LaserPulse pulse: The pulse
    :param float ip: Ionization potential
    :param float p_max: Largest final momentum of interest
    :param int points_per_period: Points per shortest phase period

    :return: The grid
    :rtype: numpy.ndarray

    """
    t_end = pulse.duration if t_end is None else t_end
    samples = np.linspace(0.0, t_end, 2001)
    d_max = np.max(np.linalg.norm(pulse.drift(samples), axis=-1))
    rate = (p_max + d_max) ** 2 / 2 + ip + pulse.omega
    n = int(np.ceil(t_end * rate * points_per_period / (2 * np.pi))) + 1
    return np.linspace(0.0, t_end, max(n, 3))


@attr.s(eq=False)
class AmplitudeGrid:
    """Momentum-resolved complex amplitudes

    :param numpy.ndarray momenta: Grid of 3-vectors, shape (..., 3)
    :param numpy.ndarray values: Complex values, shape (...)
    :param str kind: direct_b0, rescattered_b1 or total

    """
    momenta = attr.ib(converter=np.asarray)
    values = attr.ib(converter=np.asarray)
    kind = attr.ib(default='direct_b0')

    @kind.validator
    def _check_kind(self, attribute, value):
        if value not in AMPLITUDE_KINDS:
            raise DomainError(f'Unknown amplitude kind {value!r}')

    def __attrs_post_init__(self):
        if self.momenta.shape[:-1] != self.values.shape:
            raise GridMismatchError('Amplitude values do not match the momentum grid')
        if not np.all(np.isfinite(self.values)):
            raise DomainError('Amplitude values must be finite')


@attr.s(eq=False)
class DipoleSeries:
    """⟨r(t)⟩ sampled on a time grid

    :param numpy.ndarray times: Sample times
    :param numpy.ndarray values: Real dipole vectors, shape (n, 3)

    """
    times = attr.ib(converter=np.asarray)
    values = attr.ib(converter=np.asarray)


@attr.s(eq=False)
class HarmonicSpectrum:
    """Harmonic intensity and phase on the order axis Ω/ω₀

    :param numpy.ndarray order: Harmonic orders
    :param numpy.ndarray intensity: Spectral intensity summed over components
    :param numpy.ndarray phase: Phase of the dominant component
    :param numpy.ndarray components: Complex spectra, shape (n, 3)
    :param float nyquist_order: Highest resolvable order

    """
    order = attr.ib()
    intensity = attr.ib()
    phase = attr.ib()
    components = attr.ib()
    nyquist_order = attr.ib()


def polar_momentum_grid(pulse, p_max, n_p, n_theta=1, p_min=None):
    """Kinetic momenta on a (|p|, θ) grid in the polarization plane

    θ is measured from the major polarization axis. With ``n_theta = 1`` only
    emission along the axis is sampled.

    :return: (p_values, theta_values, momenta of shape (n_p, n_theta, 3))
    :rtype: tuple

    """
    p_min = p_max / n_p if p_min is None else p_min
    p_values = np.linspace(p_min, p_max, n_p)
    theta = np.array([0.0]) if n_theta == 1 else np.linspace(0.0, np.pi, n_theta)
    e1, e2 = pulse.axes
    direction = np.cos(theta)[:, None] * e1 + np.sin(theta)[:, None] * e2
    momenta = p_values[:, None, None] * direction[None, :, :]
    return p_values, theta, momenta


def _prepare(pulse, times, t_end):
    if times is None:
        raise DomainError('A time grid is required')
    times = np.asarray(times, dtype=float)
    if t_end is not None:
        if pulse.enveloped and t_end > pulse.duration * (1 + 1e-12):
            raise DomainError('t_end lies beyond the pulse')
        times = times[times <= t_end + 1e-12]
    return times


def direct_amplitude(target, pulse, a, p, t_end=None, times=None, mode='simpson',
                     max_phase_per_step=0.5, pool=None, chunk=64):
    """b₀(p) = i∫₀^{t_end} E(t′)·d(p − D(t′)) a(t′) exp(−iS(p, t_end, t′)) dt′

    :param target: Target exposing ``ip`` and ``dipole``
    :param LaserPulse pulse: The pulse
    :param callable a: Ground-state amplitude track, or None
    :param numpy.ndarray p: Canonical momenta, shape (..., 3)
    :param float t_end: Upper limit (defaults to the last grid point)
    :param numpy.ndarray times: Uniform time grid starting at 0
    :param str mode: 'simpson' or 'filon'
    :param float max_phase_per_step: Refinement threshold (rad)
    :param WorkerPool pool: Optional worker pool

    :return: Complex amplitudes, shape (...)
    :rtype: numpy.ndarray

    """
    times = _prepare(pulse, times, t_end)
    t_end = times[-1]
    p = np.asarray(p, dtype=float)
    shape = p.shape[:-1]
    flat = p.reshape(-1, 3)
    field = pulse.electric_field(times)
    drift = pulse.drift(times)
    amp = _track(a)(times)
    pool = pool or serial_pool()

    def block(momenta):
        kinetic = momenta[:, None, :] - drift[None, :, :]
        prefactor = dot(field[None, :, :], _dipole(target, kinetic, times)) * amp
        phase = -target_action(target, pulse, momenta[:, None, :], t_end, times[None, :])
        return 1j * oscillatory_integral(times, prefactor, phase, mode=mode,
                                         max_phase_per_step=max_phase_per_step)

    chunks = [flat[i:i + chunk] for i in range(0, len(flat), chunk)]
    values = np.concatenate(pool.map(block, chunks)) if chunks else np.zeros(0, complex)
    return values.reshape(shape)


def rescattering_amplitude(target, pulse, a, p, t_end=None, times=None, intermediate_mode='spa_over_p',
                           mode='simpson', delta=0.05, max_phase_per_step=0.5, pool=None,
                           intermediate_grid=None):
    """b₁(p) = (i)²∫dt′∫dt″∫dᵈp′ exp(−iS(p,t,t′)) E(t′)·g(p−D(t′), p′−D(t′))
    exp(−iS(p′,t′,t″)) E(t″)·d(p′−D(t″)) a(t″)

    In 'spa_over_p' mode the p′ integral is replaced by its value at the
    return momentum times (2π/(i(t′−t″)+δ))^{d/2}. In 'grid' mode p′ runs over
    ``intermediate_grid`` = (points (M, 3), weights (M,)) with the matching
    damping exp(−δ|p′ − p′_s|²/2).

    :param target: Target exposing ``ip``, ``dimension``, ``dipole`` and ``rescatter_g``
    :param LaserPulse pulse: The pulse
    :param callable a: Ground-state amplitude track, or None
    :param numpy.ndarray p: Canonical momenta, shape (..., 3)
    :param str intermediate_mode: 'spa_over_p' or 'grid'
    :param float delta: Spreading regularization δ (a.u.)

    :return: Complex amplitudes, shape (...)
    :rtype: numpy.ndarray

    """
    if intermediate_mode not in ('spa_over_p', 'grid'):
        raise DomainError(f'Unknown intermediate mode {intermediate_mode!r}')
    times = _prepare(pulse, times, t_end)
    t_end = times[-1]
    p = np.asarray(p, dtype=float)
    shape = p.shape[:-1]
    flat = p.reshape(-1, 3)
    pool = pool or serial_pool()
    field = pulse.electric_field(times)
    drift = pulse.drift(times)
    amp = _track(a)(times)
    kin_final = flat[:, None, :] - drift[None, :, :]
    if intermediate_mode == 'grid' and intermediate_grid is None:
        intermediate_grid = intermediate_momentum_grid(target, pulse)

    def column(n):
        """Σ over t″ < t_n (and p′) of the inner integrand contracted with E(t_n)·g"""
        if intermediate_mode == 'spa_over_p':
            k2, weight = _spa_inner(target, pulse, times, field, drift, amp, delta, n)
        else:
            k2, weight = _grid_inner(target, pulse, times, field, drift, amp, delta, intermediate_grid, n)
        g = _rescatter_g(target, kin_final[:, n, None, :], k2[None, :, :], times[n])
        return np.sum(dot(field[n], g) * weight[None, :], axis=-1)

    logger.debug(f'b1: {len(flat)} momenta, {len(times)} times, {intermediate_mode}')
    outer = np.zeros((len(flat), len(times)), dtype=complex)
    columns = pool.map(column, range(1, len(times)))
    for n, values in enumerate(columns, start=1):
        outer[:, n] = values
    phase = -target_action(target, pulse, flat[:, None, :], t_end, times[None, :])
    values = -oscillatory_integral(times, outer, phase, mode=mode, max_phase_per_step=max_phase_per_step)
    return values.reshape(shape)


def _trapezoid_weights(times, n):
    """Trapezoid weights of times[:n]"""
    w = np.zeros(n)
    if n > 1:
        h = np.diff(times[:n])
        w[:-1] += h / 2
        w[1:] += h / 2
    return w


def _spa_inner(target, pulse, times, field, drift, amp, delta, n):
    """Intermediate kinetic momenta p′_s − D(t_n) for every t″ < t_n and the
    weights of the inner t″ integral"""
    tn = times[n]
    tpp = times[:n]
    ps = return_momentum(pulse, tn, tpp)
    ionize = dot(field[:n], _dipole(target, ps - drift[:n], tpp)) * amp[:n]
    phase = -target_action(target, pulse, ps, tn, tpp)
    weight = (_trapezoid_weights(times, n) * spreading_factor(tn - tpp, delta, target.dimension)
              * ionize * np.exp(1j * phase))
    return ps - drift[n], weight


def _grid_inner(target, pulse, times, field, drift, amp, delta, grid, n):
    """Grid version of :func:`_spa_inner`: one entry per intermediate momentum"""
    points, pweights = grid
    tn = times[n]
    tpp = times[:n]
    ps = return_momentum(pulse, tn, tpp)
    offset = points[:, None, :] - ps[None, :, :]
    ionize = dot(field[None, :n], _dipole(target, points[:, None, :] - drift[None, :n], tpp)) * amp[None, :n]
    phase = -target_action(target, pulse, points[:, None, :], tn, tpp[None, :])
    damping = np.exp(-delta * dot(offset, offset) / 2)
    weight = pweights * np.sum(_trapezoid_weights(times, n) * ionize * damping * np.exp(1j * phase), axis=-1)
    return points - drift[n], weight


def intermediate_momentum_grid(target, pulse, n_points=None, p_max=None):
    """Uniform intermediate-momentum grid along the target's free axes

    :param int n_points: Points per axis (default 401 in 1D, 21 in 3D)
    :param float p_max: Half width (default 3√Uₚ + 1)

    :return: (points (M, 3), weights (M,))
    :rtype: tuple

    """
    n_points = n_points or INTERMEDIATE_POINTS[target.dimension]
    tensor_grid_nodes(n_points, target.dimension, what='The intermediate-momentum grid')
    p_max = p_max or 3 * np.sqrt(pulse.ponderomotive_energy()) + 1.0
    axis_values = np.linspace(-p_max, p_max, n_points)
    h = axis_values[1] - axis_values[0]
    if target.dimension == 1:
        points = axis_values[:, None] * target.unit
        return points, np.full(n_points, h)
    grids = np.meshgrid(axis_values, axis_values, axis_values, indexing='ij')
    points = np.stack([g.ravel() for g in grids], axis=-1)
    return points, np.full(len(points), h**3)


def ati_spectrum(b0, b1=None):
    """|b₀ + b₁|² and its decomposition

    :param AmplitudeGrid b0: Direct amplitudes
    :param AmplitudeGrid b1: Rescattered amplitudes on the same grid, or None

    :return: dict with 'total', 'direct', 'rescattered', 'cross'
    :rtype: dict

    """
    if b1 is None:
        direct = np.abs(b0.values) ** 2
        zero = np.zeros_like(direct)
        return {'total': direct, 'direct': direct, 'rescattered': zero, 'cross': zero}
    if b0.momenta.shape != b1.momenta.shape or not np.array_equal(b0.momenta, b1.momenta):
        raise GridMismatchError('b0 and b1 are not on the same momentum grid')
    direct = np.abs(b0.values) ** 2
    rescattered = np.abs(b1.values) ** 2
    cross = b0.values * np.conj(b1.values)
    cross = (cross + np.conj(cross)).real
    total = np.abs(b0.values + b1.values) ** 2
    return {'total': total, 'direct': direct, 'rescattered': rescattered, 'cross': cross}


def energy_spectrum(probability, p_values, theta_values):
    """Angle-integrated dP/dE = p·2π∫ sinθ |b|² dθ on a polar grid

    :param numpy.ndarray probability: |b|² on (n_p, n_theta)
    :param numpy.ndarray p_values: |p| grid
    :param numpy.ndarray theta_values: θ grid on [0, π]

    :return: (energies, dP/dE)
    :rtype: tuple

    """
    if len(theta_values) < 2:
        return p_values**2 / 2, p_values * 4 * np.pi * probability[:, 0]
    angular = simpson(probability * np.sin(theta_values)[None, :], x=theta_values, axis=-1)
    return p_values**2 / 2, 2 * np.pi * p_values * angular


def hhg_dipole(target, pulse, a, times, delta=0.05, max_excursion=None, pool=None, chunk=32):
    """⟨r(t)⟩ = Re[i∫₀ᵗ dt′ a*(t) d*(p_s − D(t)) E(t′)·d(p_s − D(t′)) a(t′)
    exp(−iS(p_s,t,t′)) (2π/(iτ+δ))^{dim/2}]

    :param target: Target exposing ``ip``, ``dimension`` and ``dipole``
    :param LaserPulse pulse: The pulse
    :param callable a: Amplitude track or None
    :param numpy.ndarray times: Uniform time grid
    :param float delta: Spreading regularization δ
    :param float max_excursion: Optional cut on t − t′

    :return: The dipole series
    :rtype: DipoleSeries

    """
    times = np.asarray(times, dtype=float)
    field = pulse.electric_field(times)
    drift = pulse.drift(times)
    amp = _track(a)(times)
    pool = pool or serial_pool()

    def row(n):
        if n == 0:
            return np.zeros(3)
        tn = times[n]
        tp = times[:n]
        if max_excursion is not None:
            keep = tn - tp <= max_excursion
        else:
            keep = slice(None)
        tp = tp[keep]
        if len(tp) < 2:
            return np.zeros(3)
        ps = return_momentum(pulse, tn, tp)
        ionize = dot(field[:n][keep], _dipole(target, ps - drift[:n][keep], tp)) * amp[:n][keep]
        recombine = np.conj(_dipole(target, np.conj(ps - drift[n]), tn)) * np.conj(amp[n])
        integrand = (recombine * (ionize * spreading_factor(tn - tp, delta, target.dimension)
                                  * np.exp(-1j * target_action(target, pulse, ps, tn, tp)))[:, None])
        return np.real(1j * simpson(integrand, x=tp, axis=0))

    def block(indices):
        return np.array([row(n) for n in indices])

    index_chunks = [range(i, min(i + chunk, len(times))) for i in range(0, len(times), chunk)]
    values = np.concatenate(pool.map(block, index_chunks)) if len(times) else np.zeros((0, 3))
    return DipoleSeries(times=times, values=values)


def harmonic_spectrum(series, omega0, window='hann', form='length'):
    """|FFT(window·⟨r(t)⟩)|² on the harmonic-order axis

    :param DipoleSeries series: Uniformly sampled dipole
    :param float omega0: Carrier frequency
    :param str window: 'hann' or 'none'
    :param str form: 'length' or 'acceleration' (weights by Ω⁴)

    :return: The spectrum
    :rtype: HarmonicSpectrum

    """
    times = series.times
    if not is_uniform(times):
        raise DomainError('The harmonic spectrum needs a uniform time grid')
    values = np.asarray(series.values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    n = len(times)
    dt = times[1] - times[0]
    if window == 'hann':
        w = hann(n, sym=False)
    elif window == 'none':
        w = np.ones(n)
    else:
        raise DomainError(f'Unknown window {window!r}')
    spectra = np.fft.rfft(values * w[:, None], axis=0) * dt
    omega = 2 * np.pi * np.fft.rfftfreq(n, dt)
    intensity = np.sum(np.abs(spectra) ** 2, axis=-1)
    if form == 'acceleration':
        intensity = intensity * omega**4
    elif form != 'length':
        raise DomainError(f'Unknown spectrum form {form!r}')
    dominant = int(np.argmax(np.sum(np.abs(spectra) ** 2, axis=0)))
    return HarmonicSpectrum(order=omega / omega0, intensity=intensity, phase=np.angle(spectra[:, dominant]),
                            components=spectra, nyquist_order=np.pi / dt / omega0)
