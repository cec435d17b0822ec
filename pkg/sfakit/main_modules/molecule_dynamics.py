"""
Strong-field response of a molecule whose nuclei move

A quenched molecule is described by the one-dimensional double-delta target
evaluated along a classical nuclear trajectory R(t). The trajectory gives a
time-dependent binding energy Iₚ(t) = κ(R(t))²/2, a Berry-phase rate and
time-dependent matrix elements; the SFA amplitudes and the HHG dipole are
evaluated with these in place of their frozen counterparts.
"""
# Standard library imports
import logging
import warnings

# Third party imports
import attr
import numpy as np
import pandas as pd
from scipy.integrate import cumulative_trapezoid, simpson, trapezoid

# sfakit library imports
from sfakit.calculation_tools.errors import DomainError, NonConvergenceError, RefinementError
from sfakit.calculation_tools.interpolation import interpolate_real
from sfakit.calculation_tools.parallel import serial_pool
from sfakit.general_settings.variable_names import VariableNames
from sfakit.main_modules import sfa_single
from sfakit.main_modules.depletion import AmplitudeTrack, memory_rate, stationary_momentum, volterra_step
from sfakit.main_modules.sfa_single import (DipoleSeries, action, return_momentum, spreading_factor,
                                            target_action)
from sfakit.model_components.nuclei import (GaussianWavepacket, HarmonicSurface, finite_difference_forces,
                                            propagate_wavepacket, soft_core_forces, soft_core_potential,
                                            velocity_verlet_step, wavepacket_overlap)
from sfakit.model_components.targets import CHARGE, kappa_of_separation

logger = logging.getLogger('MoleculeLogger')
_var = VariableNames()

ENERGY_DRIFT_LIMIT = 1e-4
BERRY_TOLERANCE = 1e-10


# Nuclear dynamics
@attr.s(eq=False)
class NuclearTrajectory:
    """Sampled classical nuclear motion

    :param numpy.ndarray times: Sample times
    :param numpy.ndarray positions: R_i(t), shape (n, N, 3)
    :param numpy.ndarray momenta: P_i(t), shape (n, N, 3)
    :param numpy.ndarray energies: Total energy at every sample
    :param numpy.ndarray population: |a(t)|² used to weight E_el

    """
    times = attr.ib(converter=np.asarray)
    positions = attr.ib(converter=np.asarray)
    momenta = attr.ib(converter=np.asarray)
    energies = attr.ib(converter=np.asarray)
    population = attr.ib(default=None)

    @property
    def separation(self):
        """|R₂(t) − R₁(t)|"""
        return np.linalg.norm(self.positions[:, 1] - self.positions[:, 0], axis=-1)

    @property
    def energy_drift(self):
        """Largest |E(t) − E(0)| relative to |E(0)|"""
        scale = max(abs(self.energies[0]), 1e-300)
        return float(np.max(np.abs(self.energies - self.energies[0])) / scale)


def double_delta_energy(target):
    """E_el(R₁, R₂) = −κ(|R₂ − R₁|)²/2 of the double-delta electron"""
    def energy(positions):
        separation = np.linalg.norm(positions[1] - positions[0])
        return -kappa_of_separation(target.lam, separation) ** 2 / 2
    return energy


def _total_force(state, electronic, weight, delta_r):
    def force(positions):
        f = soft_core_forces(state, positions)
        if electronic is not None and weight != 0:
            f = f + weight * finite_difference_forces(electronic, positions, delta_r)
        return f
    return force


def _total_energy(state, electronic, weight):
    energy = state.kinetic_energy() + soft_core_potential(state)
    if electronic is not None:
        energy += weight * electronic(state.positions)
    return energy


def coulomb_explosion(state, times, electronic=None, population=None, delta_r=1e-3,
                      max_energy_drift=ENERGY_DRIFT_LIMIT):
    """Velocity-Verlet integration of the nuclear Newton equations

    The force is the soft-core repulsion plus, when ``electronic`` is given,
    −|a(t)|²∇E_el by ±ΔR differences.

    :param NucleiState state: Initial nuclei (not modified)
    :param numpy.ndarray times: Uniform time grid
    :param callable electronic: Optional E_el(positions)
    :param callable population: Optional |a(t)|² (default 1)
    :param float delta_r: ΔR of the gradient
    :param float max_energy_drift: Allowed relative energy drift

    :return: The trajectory
    :rtype: NuclearTrajectory

    """
    times = np.asarray(times, dtype=float)
    if len(times) < 2:
        raise DomainError('A nuclear trajectory needs at least two times')
    if state.separation <= 0:
        raise DomainError('The nuclei must start apart')
    state = state.copy()
    weights = np.ones(len(times)) if population is None else np.asarray(population(times), dtype=float)

    positions = [state.positions.copy()]
    momenta = [state.momenta.copy()]
    energies = [_total_energy(state, electronic, weights[0])]
    for n in range(1, len(times)):
        dt = times[n] - times[n - 1]
        weight = (weights[n - 1] + weights[n]) / 2
        velocity_verlet_step(state, dt, _total_force(state, electronic, weight, delta_r))
        positions.append(state.positions.copy())
        momenta.append(state.momenta.copy())
        energies.append(_total_energy(state, electronic, weights[n]))

    trajectory = NuclearTrajectory(times, np.array(positions), np.array(momenta), np.array(energies), weights)
    if population is None and trajectory.energy_drift > max_energy_drift:
        raise RefinementError('Nuclear time step too large', energy_drift=trajectory.energy_drift)
    logger.info(f'Nuclear dynamics: R {trajectory.separation[0]:.4g} -> {trajectory.separation[-1]:.4g} a.u.')
    return trajectory


# Quench track
def position_wavefunction(target, separation, x):
    """Ψ₀(x) ∝ exp(−κ|x − R/2|) + exp(−κ|x + R/2|), normalized on the grid"""
    kappa = kappa_of_separation(target.lam, separation)
    psi = np.exp(-kappa * np.abs(x - separation / 2)) + np.exp(-kappa * np.abs(x + separation / 2))
    psi = psi.astype(complex)
    return psi / np.sqrt(trapezoid(np.abs(psi) ** 2, x))


def berry_rate(target, separations, times, x=None):
    """φ_B(t) = −Im⟨Ψ₀(t)|∂ₜΨ₀(t)⟩ by central differences in time

    :return: (rate, Re⟨Ψ₀|∂ₜΨ₀⟩ as a norm-conservation check)
    :rtype: tuple

    """
    separations = np.asarray(separations, dtype=float)
    times = np.asarray(times, dtype=float)
    if x is None:
        extent = separations.max() / 2 + 40 / np.sqrt(2 * target.lam)
        x = np.linspace(-extent, extent, 4001)
    n = len(times)
    overlap = np.zeros(n, dtype=complex)
    cache = {}

    def state(i):
        if i not in cache:
            cache[i] = position_wavefunction(target, separations[i], x)
        return cache[i]

    for i in range(n):
        lo, hi = max(i - 1, 0), min(i + 1, n - 1)
        derivative = (state(hi) - state(lo)) / (times[hi] - times[lo])
        overlap[i] = trapezoid(np.conj(state(i)) * derivative, x)
        cache.pop(i - 1, None)
    return -overlap.imag, overlap.real


@attr.s(eq=False)
class QuenchTrack:
    """Binding energy and Berry rate along R(t)

    :param numpy.ndarray times: Sample times
    :param numpy.ndarray separation: R(t)
    :param numpy.ndarray ip: Iₚ(t) = κ(R(t))²/2
    :param numpy.ndarray berry_rate: φ_B(t)
    :param DoubleDeltaTarget1D target: The target at R(0)

    """
    times = attr.ib(converter=lambda v: np.asarray(v, dtype=float))
    separation = attr.ib(converter=lambda v: np.asarray(v, dtype=float))
    ip = attr.ib(converter=lambda v: np.asarray(v, dtype=float))
    berry_rate = attr.ib(converter=lambda v: np.asarray(v, dtype=float))
    target = attr.ib()

    def __attrs_post_init__(self):
        if not (self.times.shape == self.separation.shape == self.ip.shape == self.berry_rate.shape):
            raise DomainError('Quench track columns must have equal length')
        self.kappa = np.sqrt(2 * self.ip)
        self.norm = np.array([self._norm(k, r) for k, r in zip(self.kappa, self.separation)])
        self._phase = cumulative_trapezoid(self.effective_ip, self.times, initial=0.0)
        self._targets = {}

    @staticmethod
    def _norm(kappa, separation):
        e = np.exp(-kappa * separation)
        return np.sqrt(4 * kappa**3 / (np.pi * (1 + e * (1 + kappa * separation))))

    @property
    def effective_ip(self):
        """Ĩₚ(t) = Iₚ(t) + φ_B(t)"""
        return self.ip + self.berry_rate

    @property
    def frozen(self):
        return bool(np.all(self.separation == self.separation[0]) and np.all(self.berry_rate == 0))

    def separation_at(self, t):
        return interpolate_real(self.times, self.separation, t)

    def ip_phase(self, t):
        """∫ Ĩₚ dt from times[0], extended linearly beyond the track"""
        t = np.real(np.asarray(t))
        inside = np.interp(t, self.times, self._phase)
        before = self._phase[0] + self.effective_ip[0] * (t - self.times[0])
        after = self._phase[-1] + self.effective_ip[-1] * (t - self.times[-1])
        return np.where(t < self.times[0], before, np.where(t > self.times[-1], after, inside))

    def target_at(self, t):
        """Double-delta target at R(t)"""
        separation = float(self.separation_at(t))
        if separation not in self._targets:
            self._targets[separation] = self.target.with_separation(separation)
        return self._targets[separation]

    def to_frame(self):
        """pandas.DataFrame with columns t_au, R_au, ip_au, berry_rate"""
        return pd.DataFrame({_var.time: self.times, _var.separation: self.separation, _var.ip: self.ip,
                             _var.berry_rate: self.berry_rate})


def quench_track(target, times, separation):
    """Iₚ(t) and φ_B(t) of the double-delta target along R(t)

    :param DoubleDeltaTarget1D target: The target (λ fixed)
    :param numpy.ndarray times: Sample times
    :param numpy.ndarray separation: R(t), or a NuclearTrajectory

    :return: The track
    :rtype: QuenchTrack

    """
    if isinstance(separation, NuclearTrajectory):
        separation = separation.separation
    times = np.asarray(times, dtype=float)
    separation = np.broadcast_to(np.asarray(separation, dtype=float), times.shape)
    kappa = np.array([kappa_of_separation(target.lam, r) for r in separation])
    if np.all(separation == separation[0]):
        rate = np.zeros(len(times))
    else:
        rate, norm_check = berry_rate(target, separation, times)
        logger.debug(f'Quench track: max |Re<Psi|dPsi/dt>| = {np.abs(norm_check).max():.3g}')
        if np.abs(rate).max() > BERRY_TOLERANCE:
            warnings.warn(f'Nonzero Berry rate {np.abs(rate).max():.3g} for a real ground state')
    return QuenchTrack(times, separation, kappa**2 / 2, rate, target.with_separation(float(separation[0])))


class QuenchedTarget:
    """The double-delta target seen along a quench track

    Exposes the time-dependent dipole, rescattering dipole and binding-energy
    phase used by the single-electron SFA routines.
    """
    dimension = 1

    def __init__(self, track):

        self.track = track
        self.initial = track.target
        self.unit = self.initial.unit
        self.axis = self.initial.axis
        self.ip = float(track.ip[0])
        self.ip_phase = track.ip_phase

    def dipole(self, p):
        return self.initial.dipole(p)

    def dipole_at(self, p, t):
        """e·d(p − D, t) with 𝒩, κ and R taken at t"""
        k = np.asarray(p)[..., self.axis]
        t = np.real(np.asarray(t))
        track = self.track
        d = _moving_dipole(k, np.interp(t, track.times, track.norm), np.interp(t, track.times, track.kappa),
                           np.interp(t, track.times, track.separation))
        return d[..., None] * self.unit

    def rescatter_g_at(self, p1, p2, t):
        return self.track.target_at(t).rescatter_g(p1, p2)


def quench_target(track):
    """The plain target for a frozen track, a :class:`QuenchedTarget` otherwise"""
    return track.target if track.frozen else QuenchedTarget(track)


def quenched_direct_amplitude(track, pulse, a, p, t_end=None, times=None, **options):
    """b₀(p) with d(p, t) and Ĩₚ(t) taken along the track

    Accepts the options of :func:`sfakit.main_modules.sfa_single.direct_amplitude`.
    """
    return sfa_single.direct_amplitude(quench_target(track), pulse, a, p, t_end=t_end, times=times, **options)


def quenched_rescattering_amplitude(track, pulse, a, p, t_end=None, times=None, **options):
    """b₁(p) with g(·, ·, t), d(p, t) and Ĩₚ(t) taken along the track"""
    return sfa_single.rescattering_amplitude(quench_target(track), pulse, a, p, t_end=t_end, times=times,
                                             **options)


# HHG with local and cross recombination
def _center_dipole(track, k, t, sign):
    """Contribution of the centre with sign σ to e·d(k, t): −i𝒩k exp(iσkR/2)/(k² + κ²)²"""
    norm = np.interp(t, track.times, track.norm)
    kappa = np.interp(t, track.times, track.kappa)
    separation = np.interp(t, track.times, track.separation)
    return CHARGE * (-1j * norm * k * np.exp(1j * sign * k * separation / 2) / (k**2 + kappa**2) ** 2)


@attr.s(eq=False)
class QuenchedHarmonics:
    """Local (same-centre), cross (centre-to-centre) and total HHG dipoles"""
    local = attr.ib()
    cross = attr.ib()
    total = attr.ib()

    def spectra(self, omega0, **options):
        """Harmonic spectra of the three dipoles"""
        return {name: sfa_single.harmonic_spectrum(series, omega0, **options)
                for name, series in (('local', self.local), ('cross', self.cross), ('total', self.total))}


def quenched_hhg(track, pulse, a, times, delta=0.05, max_excursion=None, pool=None, chunk=32):
    """HHG dipole split into local and cross recombination

    Ionization from centre σ at t′ and recombination at centre σ′ at t shift the
    stationary momentum to p_s + (σR(t′) − σ′R(t))/(2τ). The local family has
    σ = σ′, the cross family σ ≠ σ′.

    :param QuenchTrack track: The quench track
    :param LaserPulse pulse: The pulse
    :param callable a: Amplitude track or None
    :param numpy.ndarray times: Uniform time grid

    :return: The dipoles
    :rtype: QuenchedHarmonics

    """
    times = np.asarray(times, dtype=float)
    target = quench_target(track)
    unit = track.target.unit
    axis = track.target.axis
    field = pulse.electric_field(times)
    drift = pulse.drift(times)
    amp = np.ones(len(times), dtype=complex) if a is None else a(times)
    pool = pool or serial_pool()

    def row(n):
        out = np.zeros((2, 3))
        if n == 0:
            return out
        tn = times[n]
        tp = times[:n]
        keep = tn - tp <= max_excursion if max_excursion is not None else slice(None)
        tp = tp[keep]
        if len(tp) < 2:
            return out
        tau = tn - tp
        ps = return_momentum(pulse, tn, tp)
        r_ion = track.separation_at(tp)
        r_rec = track.separation_at(tn)
        spread = spreading_factor(tau, delta, 1) * amp[:n][keep]
        for sign_ion in (1, -1):
            for sign_rec in (1, -1):
                shift = (sign_ion * r_ion - sign_rec * r_rec) / (2 * tau)
                p_star = ps + shift[:, None] * unit
                k_ion = (p_star - drift[:n][keep])[:, axis]
                k_rec = (p_star - drift[n])[:, axis]
                ionize = field[:n][keep][:, axis] * _center_dipole(track, k_ion, tp, sign_ion)
                recombine = np.conj(_center_dipole(track, np.conj(k_rec), tn, sign_rec)) * np.conj(amp[n])
                integrand = recombine * ionize * spread * np.exp(-1j * target_action(target, pulse, p_star, tn, tp))
                value = np.real(1j * simpson(integrand, x=tp))
                out[0 if sign_ion == sign_rec else 1] += value * unit
        return out

    def block(indices):
        return np.array([row(n) for n in indices])

    index_chunks = [range(i, min(i + chunk, len(times))) for i in range(0, len(times), chunk)]
    values = np.concatenate(pool.map(block, index_chunks)) if len(times) else np.zeros((0, 2, 3))
    local = DipoleSeries(times=times, values=values[:, 0])
    cross = DipoleSeries(times=times, values=values[:, 1])
    return QuenchedHarmonics(local=local, cross=cross, total=DipoleSeries(times=times, values=values.sum(axis=1)))


# Self-consistent nuclei and electron
@attr.s(eq=False)
class SelfConsistentResult:
    """Coupled nuclear trajectory, quench track and ground-state amplitude"""
    trajectory = attr.ib()
    track = attr.ib()
    amplitude = attr.ib()


def _moving_dipole(k, norm, kappa, separation):
    """e·d(k) of the double-delta state with 𝒩, κ and R given per sample"""
    return CHARGE * (-2j * norm * k * np.cos(k * separation / 2) / (k**2 + kappa**2) ** 2)


def _kernel_row(pulse, times, n, field, drift, electron, axis, epsilon, conjugate):
    """K(t_n, t_j), j ≤ n, with each dipole taken at the nuclei of its own time"""
    t, tp = times[n], times[:n + 1]
    norm, kappa, separation, phase = (column[:n + 1] for column in electron)
    ps = stationary_momentum(pulse, t, tp)
    k_first = (ps - drift[n])[:, axis]
    if conjugate:
        first = np.conj(_moving_dipole(np.conj(k_first), norm[n], kappa[n], separation[n]))
    else:
        first = _moving_dipole(k_first, norm[n], kappa[n], separation[n])
    second = _moving_dipole((ps - drift[:n + 1])[:, axis], norm, kappa, separation)
    kinetic = action(pulse, 0.0, ps, t, tp)
    spread = np.sqrt(np.pi / (epsilon + 0.5j * (t - tp)))
    gamma = field[n] * first * field[:n + 1] * second * np.exp(-1j * (kinetic + phase[n] - phase)) * spread
    return gamma if conjugate else -gamma


def selfconsistent_loop(target, pulse, state, times, mode='markov', epsilon=1e-2, conjugate_first_dipole=False,
                        delta_r=1e-3):
    """Alternates nuclear and electronic steps

    Each step moves the nuclei by velocity Verlet under the soft-core repulsion
    plus |a|²·E_el(R), then advances a(t) by one step of the SFA depletion
    equation. The kernel row at t_n uses the stationary-momentum (saddle) form
    with d(p, t) and 𝒩, κ, R taken along the nuclear path, and the binding
    phase is ∫ Iₚ(R(τ)) dτ, so a(t) carries the SFA phase.

    :param DoubleDeltaTarget1D target: The electron model (λ fixed)
    :param LaserPulse pulse: The pulse
    :param NucleiState state: Initial nuclei (not modified)
    :param numpy.ndarray times: Time grid starting at or after 0
    :param str mode: 'markov' or 'full' (Volterra)
    :param float epsilon: Kernel regularization ε > 0
    :param bool conjugate_first_dipole: Use d*(p−D(t)) in the first factor

    :return: The coupled solution
    :rtype: SelfConsistentResult

    """
    if mode not in ('markov', 'full'):
        raise DomainError(f'Unknown SFA depletion mode {mode!r}')
    if epsilon <= 0:
        raise DomainError('The kernel regularization must be positive')
    times = np.asarray(times, dtype=float)
    n_t = len(times)
    electronic = double_delta_energy(target)
    state = state.copy()
    axis = target.axis
    field = pulse.electric_field(times)[:, axis]
    drift = pulse.drift(times)

    norm, kappa, separation, phase = (np.zeros(n_t) for _ in range(4))
    electron = (norm, kappa, separation, phase)
    a = np.ones(n_t, dtype=complex)
    a_dot = np.zeros(n_t, dtype=complex)
    rate = np.zeros(n_t, dtype=complex)
    positions = [state.positions.copy()]
    momenta = [state.momenta.copy()]
    energies = [_total_energy(state, electronic, 1.0)]

    def settle(n):
        separation[n] = state.separation
        kappa[n] = kappa_of_separation(target.lam, separation[n])
        norm[n] = QuenchTrack._norm(kappa[n], separation[n])

    settle(0)
    for n in range(1, n_t):
        dt = times[n] - times[n - 1]
        weight = abs(a[n - 1]) ** 2
        velocity_verlet_step(state, dt, _total_force(state, electronic, weight, delta_r))
        settle(n)
        phase[n] = phase[n - 1] + (kappa[n - 1] ** 2 + kappa[n] ** 2) / 4 * dt
        row = _kernel_row(pulse, times, n, field, drift, electron, axis, epsilon, conjugate_first_dipole)
        if mode == 'markov':
            rate[n] = memory_rate(times, row, n)
            a[n] = a[n - 1] * np.exp(-(rate[n - 1] + rate[n]) * dt / 2)
        else:
            volterra_step(times, row, a, a_dot, n)
        if not np.isfinite(a[n]):
            raise NonConvergenceError('Ground-state amplitude diverged', step=n, time=times[n])
        positions.append(state.positions.copy())
        momenta.append(state.momenta.copy())
        energies.append(_total_energy(state, electronic, abs(a[n]) ** 2))

    trajectory = NuclearTrajectory(times, np.array(positions), np.array(momenta), np.array(energies),
                                   np.abs(a) ** 2)
    track = quench_track(target, times, trajectory)
    amplitude = AmplitudeTrack(times, a, strategy=f'selfconsistent_{mode}')
    if not amplitude.is_monotone(tol=1e-9):
        logger.warning('Self-consistent depletion is not monotone on this grid')
    logger.info(f'Self-consistent loop ({mode}): |a(t_end)|² = {amplitude.final_population:.4g}')
    return SelfConsistentResult(trajectory=trajectory, track=track, amplitude=amplitude)


# Nuclear autocorrelation
def autocorrelation_factor(xi0, xi1, t, surface0=None, surface1=None):
    """⟨ξ₁(t)|ξ₀(t)⟩ for Gaussian packets on their own locally harmonic surfaces

    :param GaussianWavepacket xi0: Packet of the neutral at times[0]
    :param GaussianWavepacket xi1: Packet of the ion at times[0]
    :param t: Time grid starting at the reference time
    :param HarmonicSurface surface0: Surface of ξ₀ (default free)
    :param HarmonicSurface surface1: Surface of ξ₁ (default free)

    :return: Overlaps at every time
    :rtype: numpy.ndarray

    """
    times = np.atleast_1d(np.asarray(t, dtype=float))
    first = propagate_wavepacket(xi0, surface0 or HarmonicSurface(), times)
    second = propagate_wavepacket(xi1, surface1 or HarmonicSurface(), times)
    return np.array([wavepacket_overlap(b, f) for f, b in zip(first, second)])


def overlap_amplitude(a, overlaps, times):
    """a(t)·⟨ξ₁(t)|ξ₀(t)⟩ as an amplitude track

    :param callable a: Ground-state amplitude or None
    :param numpy.ndarray overlaps: Overlaps on ``times``
    :param numpy.ndarray times: The grid

    :return: The product track
    :rtype: AmplitudeTrack

    """
    times = np.asarray(times, dtype=float)
    base = np.ones(len(times), dtype=complex) if a is None else a(times)
    return AmplitudeTrack(times, base * np.asarray(overlaps), strategy='overlap')


def quench_overlaps(state, width, times):
    """⟨ξ₁(t)|ξ₀(t)⟩ along the separation after a sudden ionization

    Both packets start as the same Gaussian of width σ at R(0) with the reduced
    mass of the first two nuclei. ξ₀ stays on the neutral surface (free) and ξ₁
    is pushed by the initial soft-core repulsion, taken as a constant force.

    :param NucleiState state: Nuclei at the ionization time
    :param float width: σ of the packets (a.u.)
    :param numpy.ndarray times: Time grid starting at the ionization time

    :return: Overlaps at every time
    :rtype: numpy.ndarray

    """
    if width <= 0:
        raise DomainError('The wavepacket width must be positive')
    m1, m2 = state.masses[:2]
    r = state.separation
    force = state.charges[0] * state.charges[1] * r / (r**2 + state.soft_core**2) ** 1.5
    packet = GaussianWavepacket.from_width(r, width, mass=m1 * m2 / (m1 + m2))
    return autocorrelation_factor(packet, packet, times, HarmonicSurface(), HarmonicSurface(f=-force, x0=r))
