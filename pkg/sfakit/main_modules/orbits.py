"""
Complex-time quantum orbits

The tunnelling, recollision and return equations

    (p − D(t′))²/2 + Iₚ = 0,   (p − D(t))²/2 = Ω − Iₚ,   ∫_{t′}^{t} (p − D) dτ = 0

are reduced to two unknowns (t′, t) by solving the return equation for p in
closed form, and the reduced system is solved by multi-start damped Newton.
"""
# Standard library imports
import logging
import warnings

# Third party imports
import attr
import numpy as np
from scipy.optimize import brentq, minimize_scalar

# sfakit library imports
from sfakit.calculation_tools.errors import DomainError, NoClassicalReturnError
from sfakit.calculation_tools.helper import dot
from sfakit.calculation_tools.newton import damped_newton, deduplicate
from sfakit.calculation_tools.parallel import serial_pool
from sfakit.main_modules.sfa_single import action

logger = logging.getLogger('OrbitLogger')

SHORT_LONG_SPLIT = 0.65
COALESCENCE_LIMIT = 1e-4


@attr.s(eq=False)
class QuantumOrbit:
    """One saddle solution (t′, t, p) at harmonic energy Ω

    :param complex t_ion: Ionization time t′
    :param complex t_rec: Recombination time t
    :param numpy.ndarray p_s: Stationary canonical momentum
    :param complex action: S(p_s, t, t′) − Ωt
    :param complex hessian: Determinant of the 5×5 second-derivative matrix
    :param float omega: Harmonic photon energy Ω (a.u.)
    :param float residual: Largest saddle-equation residual
    :param str label: short, long or higher_return(k)

    """
    t_ion = attr.ib()
    t_rec = attr.ib()
    p_s = attr.ib()
    action = attr.ib()
    hessian = attr.ib()
    omega = attr.ib()
    residual = attr.ib(default=0.0)
    label = attr.ib(default='')
    coalescent = attr.ib(default=False)

    @property
    def excursion(self):
        """Re t − Re t′"""
        return float(np.real(self.t_rec) - np.real(self.t_ion))

    @property
    def times(self):
        return np.array([self.t_ion, self.t_rec])

    def as_row(self, omega0):
        """Row of the orbits table"""
        return [self.omega / omega0, self.t_ion.real, self.t_ion.imag, self.t_rec.real, self.t_rec.imag,
                *np.real(self.p_s), *np.imag(self.p_s), np.imag(self.action), self.label]


def _kinematics(pulse, x):
    """τ, p_s, k′ = p_s − D(t′) and k = p_s − D(t) for rows x = (t′, t)"""
    tp, t = x[..., 0], x[..., 1]
    tau = t - tp
    ps = (pulse.drift_integral(t) - pulse.drift_integral(tp)) / tau[..., None]
    return tau, ps, ps - pulse.drift(tp), ps - pulse.drift(t)


def saddle_residual(pulse, ip, q, x):
    """Residuals of the tunnelling and recollision equations

    :param LaserPulse pulse: The pulse
    :param float ip: Ionization potential
    :param float q: Return kinetic energy Q (Ω − Iₚ for harmonics)
    :param numpy.ndarray x: Rows (t′, t), shape (n, 2)

    :return: Residuals, shape (n, 2)
    :rtype: numpy.ndarray

    """
    _, _, k1, k2 = _kinematics(pulse, x)
    return np.stack([dot(k1, k1) / 2 + ip, dot(k2, k2) / 2 - q], axis=-1)


def saddle_jacobian(pulse, x):
    """Analytic Jacobian of :func:`saddle_residual` with respect to (t′, t)"""
    tau, _, k1, k2 = _kinematics(pulse, x)
    e1 = pulse.electric_field(x[..., 0])
    e2 = pulse.electric_field(x[..., 1])
    jac = np.empty(x.shape[:-1] + (2, 2), dtype=complex)
    jac[..., 0, 0] = dot(k1, k1) / tau - dot(k1, e1)
    jac[..., 0, 1] = -dot(k1, k2) / tau
    jac[..., 1, 0] = dot(k2, k1) / tau
    jac[..., 1, 1] = -dot(k2, k2) / tau - dot(k2, e2)
    return jac


def hessian_matrix(pulse, t_ion, t_rec, p, basis=None):
    """Second derivatives of S(p, t, t′) − Ωt over (p·basis, t′, t)

    :param LaserPulse pulse: The pulse
    :param complex t_ion: t′
    :param complex t_rec: t
    :param numpy.ndarray p: Canonical momentum
    :param numpy.ndarray basis: Rows spanning the momentum subspace (default: identity)

    :return: Matrix of shape (n + 2, n + 2)
    :rtype: numpy.ndarray

    """
    basis = np.eye(3) if basis is None else np.atleast_2d(basis)
    n = len(basis)
    k1 = p - pulse.drift(t_ion)
    k2 = p - pulse.drift(t_rec)
    matrix = np.zeros((n + 2, n + 2), dtype=complex)
    matrix[:n, :n] = (t_rec - t_ion) * np.eye(n)
    matrix[:n, n] = matrix[n, :n] = -basis @ k1
    matrix[:n, n + 1] = matrix[n + 1, :n] = basis @ k2
    matrix[n, n] = dot(k1, pulse.electric_field(t_ion))
    matrix[n + 1, n + 1] = -dot(k2, pulse.electric_field(t_rec))
    return matrix


def _default_window(pulse):
    if pulse.enveloped:
        return 0.0, pulse.duration
    return 0.0, pulse.period


def field_peaks(pulse, window, n_samples=4001):
    """Times of the local maxima of |E·e1| inside the window"""
    grid = np.linspace(window[0], window[1], n_samples)
    strength = np.abs(pulse.electric_field(grid) @ pulse.axes[0])
    inner = (strength[1:-1] >= strength[:-2]) & (strength[1:-1] > strength[2:])
    peaks = grid[1:-1][inner]
    return peaks[strength[1:-1][inner] > 1e-3 * strength.max()] if len(peaks) else peaks


def recollision_seeds(pulse, ip, window, seeds_per_half_cycle=8, max_excursion=2.2):
    """Starting rows (t′, t) for the recollision saddle search

    t′ sits just after each field peak with the quasi-static tunnelling
    imaginary part √(2Iₚ)/|E|; t spans excursions from 0.45T to ``max_excursion``·T.

    :return: Seeds, shape (n, 2)
    :rtype: numpy.ndarray

    """
    period = pulse.period
    seeds = []
    for peak in field_peaks(pulse, window):
        strength = np.linalg.norm(pulse.electric_field(peak))
        t_ion = peak + 0.05 * period + 1j * np.sqrt(2 * ip) / strength
        for tau in np.linspace(0.45, max_excursion, seeds_per_half_cycle) * period:
            seeds.append((t_ion, t_ion.real + tau))
    return np.array(seeds, dtype=complex).reshape(-1, 2)


def classify(orbit, pulse):
    """Label by excursion: higher_return(k) for k = ⌊excursion/T⌋ ≥ 1, else
    short below 0.65T and long above

    :return: The label
    :rtype: str

    """
    k = int(np.floor(orbit.excursion / pulse.period))
    if k >= 1:
        return f'higher_return({k})'
    return 'short' if orbit.excursion < SHORT_LONG_SPLIT * pulse.period else 'long'


def label_pairs(orbits, pulse):
    """Labels first-return orbits pairwise within each ionization half-cycle

    The smaller excursion of a pair is short; unpaired orbits keep the label of
    :func:`classify`.
    """
    half = pulse.period / 2
    groups = {}
    for orbit in orbits:
        orbit.label = classify(orbit, pulse)
        if not orbit.label.startswith('higher'):
            groups.setdefault(int(np.floor(np.real(orbit.t_ion) / half)), []).append(orbit)
    for members in groups.values():
        if len(members) == 2:
            first, second = sorted(members, key=lambda o: o.excursion)
            first.label, second.label = 'short', 'long'
    return orbits


def hadamard_ratio(matrix):
    """|det M| over the product of its row norms, in [0, 1]; small near coalescence"""
    norms = np.prod(np.linalg.norm(matrix, axis=-1))
    return float(abs(np.linalg.det(matrix)) / norms) if norms > 0 else 0.0


def _build_orbit(pulse, ip, omega, x, residual):
    tp, t = x
    _, ps, _, _ = _kinematics(pulse, x[None, :])
    ps = ps[0]
    phase = action(pulse, ip, ps, t, tp) - omega * t
    matrix = hessian_matrix(pulse, tp, t, ps)
    det = np.linalg.det(matrix)
    orbit = QuantumOrbit(t_ion=complex(tp), t_rec=complex(t), p_s=ps, action=complex(phase), hessian=complex(det),
                         omega=float(omega), residual=float(residual))
    orbit.coalescent = hadamard_ratio(matrix) < COALESCENCE_LIMIT
    return orbit


def solve_saddles(pulse, ip, omega, window=None, seeds_per_half_cycle=8, tol=1e-11, max_iter=80,
                  dedup_tolerance=1e-6, return_energy=None):
    """All saddle solutions whose ionization time lies in the window

    :param LaserPulse pulse: The pulse
    :param float ip: Ionization potential (a.u.)
    :param float omega: Harmonic photon energy Ω ≥ 0 (a.u.)
    :param tuple window: Real span of Re t′
    :param int seeds_per_half_cycle: Excursion seeds per field peak
    :param float return_energy: Q in place of Ω − Iₚ (e.g. for rescattering)

    :return: Orbits sorted by Re t′ then excursion
    :rtype: list

    """
    if omega < 0:
        raise DomainError('The harmonic energy must be non-negative')
    window = _default_window(pulse) if window is None else window
    q = omega - ip if return_energy is None else return_energy
    seeds = recollision_seeds(pulse, ip, window, seeds_per_half_cycle)
    if not len(seeds):
        logger.info('No field peaks in the window; no orbits')
        return []

    x, converged, norm = damped_newton(lambda z: saddle_residual(pulse, ip, q, z),
                                       lambda z: saddle_jacobian(pulse, z), seeds, tol=tol, max_iter=max_iter)
    keep = (converged & (x[:, 0].imag > -1e-12) & (x[:, 1].real > x[:, 0].real)
            & (x[:, 0].real >= window[0]) & (x[:, 0].real <= window[1]))
    if pulse.enveloped:
        keep &= x[:, 1].real <= pulse.duration
    x, norm = x[keep], norm[keep]
    unique = deduplicate(x, dedup_tolerance)
    orbits = [_build_orbit(pulse, ip, omega, x[i], norm[i]) for i in unique]
    orbits.sort(key=lambda o: (np.real(o.t_ion), o.excursion))
    label_pairs(orbits, pulse)
    for orbit in orbits:
        if orbit.coalescent:
            warnings.warn(f'Coalescent saddles near Ω = {omega:.6g} (t′ = {orbit.t_ion:.4g})')
    logger.debug(f'Ω = {omega:.5g}: {len(orbits)} orbits from {len(seeds)} seeds')
    return orbits


def refine_orbit(pulse, ip, omega, x0, tol=1e-11, max_iter=40):
    """Newton refinement of a single (t′, t) guess, or None when it fails"""
    q = omega - ip
    x, converged, norm = damped_newton(lambda z: saddle_residual(pulse, ip, q, z),
                                       lambda z: saddle_jacobian(pulse, z), np.atleast_2d(x0), tol=tol,
                                       max_iter=max_iter)
    if not converged[0] or x[0, 0].imag < -1e-12:
        return None
    return _build_orbit(pulse, ip, omega, x[0], norm[0])


@attr.s(eq=False)
class OrbitTrack:
    """One orbit family followed through Ω

    :param numpy.ndarray omegas: Harmonic energies
    :param list orbits: Orbit per Ω, None where the root was lost
    :param float lost_at: First Ω at which tracking failed

    """
    omegas = attr.ib()
    orbits = attr.ib()
    lost_at = attr.ib(default=None)

    @property
    def label(self):
        found = [o.label for o in self.orbits if o is not None]
        return found[0] if found else ''


def continuation(pulse, ip, omegas, window=None, start=None, pool=None, **solve_options):
    """Tracks every orbit found at the plateau centre through the Ω grid

    Roots are seeded at Ω₀ = Iₚ + 1.6Uₚ (or ``start``) and followed outwards in
    both directions, each step seeded by the previous solution. A root that
    fails to converge is flagged lost from that Ω onwards.

    :param LaserPulse pulse: The pulse
    :param float ip: Ionization potential
    :param numpy.ndarray omegas: Increasing grid of Ω
    :param tuple window: Real span of Re t′

    :return: One track per orbit family
    :rtype: list

    """
    omegas = np.asarray(omegas, dtype=float)
    start = ip + 1.6 * pulse.ponderomotive_energy() if start is None else start
    i0 = int(np.argmin(np.abs(omegas - start)))
    seeds = solve_saddles(pulse, ip, omegas[i0], window=window, **solve_options)
    pool = pool or serial_pool()

    def follow(orbit):
        found = [None] * len(omegas)
        found[i0] = orbit
        lost = []
        for direction in (range(i0 + 1, len(omegas)), range(i0 - 1, -1, -1)):
            current = orbit
            last_jump = None
            for i in direction:
                step = refine_orbit(pulse, ip, omegas[i], current.times)
                jump = None if step is None else float(np.abs(step.times - current.times).max())
                if jump is None or (last_jump is not None and jump > 10 * max(last_jump, 1e-3)):
                    lost.append(omegas[i])
                    warnings.warn(f'Lost orbit {orbit.label} at Ω = {omegas[i]:.6g}')
                    break
                step.label = current.label
                found[i] = current = step
                last_jump = jump
        lost_at = min(lost, key=lambda w: abs(w - omegas[i0])) if lost else None
        return OrbitTrack(omegas=omegas, orbits=found, lost_at=lost_at)

    tracks = pool.map(follow, seeds)
    logger.info(f'Continuation: {len(tracks)} orbit families over {len(omegas)} energies')
    return tracks


def half_cycle_partner(orbit, pulse, ip):
    """The orbit shifted by T/2 with p → −p (exact for monochromatic drives)"""
    shift = pulse.period / 2
    x = np.array([orbit.t_ion + shift, orbit.t_rec + shift])
    partner = _build_orbit(pulse, ip, orbit.omega, x,
                           np.abs(saddle_residual(pulse, ip, orbit.omega - ip, x[None, :])).max())
    partner.label = orbit.label
    return partner


def spa_dipole(orbits, target, pulse, a=None):
    """Σ_s i H_s a*(t_s) d*(p_s − D(t_s)) E(t′_s)·d(p_s − D(t′_s)) a(t′_s) exp(−iS_Ω)

    H = (2π/i)^{(n+2)/2}/√det ∂²S with n the target dimension. The momentum
    subspace of a 1D target is its axis.

    :param list orbits: Orbits at one Ω
    :param target: Target with ``dimension`` and ``dipole``
    :param LaserPulse pulse: The pulse
    :param callable a: Amplitude track or None

    :return: Complex dipole vector d̃(Ω)
    :rtype: numpy.ndarray

    """
    total = np.zeros(3, dtype=complex)
    basis = np.eye(3) if target.dimension == 3 else np.atleast_2d(target.unit)
    n = len(basis)
    for orbit in orbits:
        tp, t = orbit.t_ion, orbit.t_rec
        matrix = hessian_matrix(pulse, tp, t, orbit.p_s, basis)
        det = np.linalg.det(matrix)
        if hadamard_ratio(matrix) < COALESCENCE_LIMIT:
            warnings.warn(f'Near-singular Hessian for a {orbit.label} orbit at Ω = {orbit.omega:.6g}')
        prefactor = (2 * np.pi / 1j) ** ((n + 2) / 2) / np.sqrt(complex(det))
        k1 = orbit.p_s - pulse.drift(tp)
        k2 = orbit.p_s - pulse.drift(t)
        a_ion = 1.0 if a is None else complex(a(tp))
        a_rec = 1.0 if a is None else complex(a(t))
        ionize = dot(pulse.electric_field(tp), target.dipole(k1)) * a_ion
        recombine = np.conj(target.dipole(np.conj(k2))) * np.conj(a_rec)
        total += 1j * prefactor * recombine * ionize * np.exp(-1j * orbit.action)
    return total


def spa_spectrum(tracks, target, pulse, a=None):
    """|d̃(Ω)|² summed over the tracked orbit families at every Ω

    :return: (omegas, intensity, per-family complex contributions)
    :rtype: tuple

    """
    if not tracks:
        return np.zeros(0), np.zeros(0), []
    omegas = tracks[0].omegas
    contributions = []
    total = np.zeros((len(omegas), 3), dtype=complex)
    for track in tracks:
        values = np.zeros((len(omegas), 3), dtype=complex)
        for i, orbit in enumerate(track.orbits):
            if orbit is not None:
                values[i] = spa_dipole([orbit], target, pulse, a)
        contributions.append(values)
        total += values
    return omegas, np.sum(np.abs(total) ** 2, axis=-1), contributions


def _excursion_position(pulse, t_birth, t):
    """Position along e1 of an electron born at rest at t_birth"""
    p = pulse.drift(t_birth)
    x = p * np.subtract(t, t_birth)[..., None] - (pulse.drift_integral(t) - pulse.drift_integral(t_birth))
    return x @ pulse.axes[0]


def _return_energy(pulse, t_birth, n_samples=800):
    """Kinetic energy at the first return and the return time, or None"""
    period = pulse.period
    grid = t_birth + np.linspace(1e-3, 1.5, n_samples) * period
    x = _excursion_position(pulse, t_birth, grid)
    crossing = np.flatnonzero(np.sign(x[1:]) != np.sign(x[0]))
    if not len(crossing):
        return None
    i = crossing[0] + 1
    t_return = brentq(lambda s: _excursion_position(pulse, t_birth, s), grid[i - 1], grid[i], xtol=1e-13)
    velocity = pulse.drift(t_birth) - pulse.drift(t_return)
    return 0.5 * velocity @ velocity, t_return


def classical_return_scan(pulse, n_birth=720):
    """Maximum classical return energy over real birth phases

    Electrons start at rest at the origin; the first return to the origin
    along the major axis is found for every birth phase in one period and the
    best phase is refined.

    :param LaserPulse pulse: A monochromatic pulse
    :param int n_birth: Birth phases in the scan

    :return: (E_max/Uₚ, birth phase ωt_b, return phase ωt_r) with phases in rad
    :rtype: tuple

    """
    up = pulse.ponderomotive_energy()
    if up <= 0:
        raise NoClassicalReturnError('No classical returns without a field')
    if pulse.enveloped:
        logger.warning('Classical scan on an enveloped pulse uses its first cycle')
    period = pulse.period
    births = np.linspace(0.0, period, n_birth, endpoint=False)
    energies = np.full(n_birth, -np.inf)
    for i, tb in enumerate(births):
        found = _return_energy(pulse, tb)
        if found is not None:
            energies[i] = found[0]
    if not np.any(np.isfinite(energies)):
        raise NoClassicalReturnError('No birth phase returns to the origin')

    best = int(np.argmax(energies))
    step = period / n_birth

    def negative(tb):
        found = _return_energy(pulse, tb)
        return np.inf if found is None else -found[0]

    refined = minimize_scalar(negative, bounds=(births[best] - step, births[best] + step), method='bounded',
                              options={'xatol': 1e-10})
    t_birth = refined.x if np.isfinite(refined.fun) and -refined.fun >= energies[best] else births[best]
    energy, t_return = _return_energy(pulse, t_birth)
    omega = pulse.omega
    logger.info(f'Classical cutoff: {energy / up:.4f} Up')
    return float(energy / up), float((omega * t_birth) % (2 * np.pi)), float(omega * t_return)
