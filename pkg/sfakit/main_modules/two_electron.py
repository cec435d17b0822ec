"""
Non-sequential double ionization

Two recollision pathways lead from the neutral ground state |0⟩ to the
two-electron continuum |p, p′⟩:

- RESI: |0⟩ → |k, 0⟩ (tunnelling at t′) → |p, η⟩ (recollision excitation at t″)
  → |p, p′⟩ (tunnelling of the excited electron at t‴)
- EII:  |0⟩ → |k, 0⟩ (tunnelling at t′) → |p, p′⟩ (impact ionization at t″)

Every amplitude is evaluated by the saddle-point method. All energies are
measured from the two-electron ground state E₀ and every propagator carries
exp(−iS). The bound electron of the ion is modelled by exponential orbitals
r^l cos^l θ exp(−κr) with κ = √(2I), and the electron-electron interaction is a
contact potential V₁₂ = v₁₂δ(r₁ − r₂), so every matrix element is closed-form.
"""
# Standard library imports
import logging
import warnings

# Third party imports
import attr
import numpy as np
import pandas as pd
from numpy.polynomial.hermite import hermgauss

# sfakit library imports
from sfakit.calculation_tools.errors import DomainError, GridMismatchError
from sfakit.calculation_tools.helper import dot
from sfakit.calculation_tools.newton import damped_newton, deduplicate
from sfakit.calculation_tools.parallel import serial_pool
from sfakit.general_settings.variable_names import VariableNames
from sfakit.main_modules import orbits
from sfakit.main_modules.sfa_single import action, return_momentum

logger = logging.getLogger('TwoElectronLogger')
_var = VariableNames()

CHARGE = -1.0
MECHANISMS = ('resi', 'eii')
SUM_MODES = ('coherent', 'incoherent')
INTERACTIONS = ('contact', 'yukawa')

# Plane-wave normalizations of the contact matrix elements
EXCITATION_NORM = (2 * np.pi) ** -3
IMPACT_NORM = (2 * np.pi) ** -4.5


@attr.s(frozen=True)
class ExcitedLevel:
    """Excited state η of the singly charged ion

    :param float ip: Binding energy I_{1η,p} (a.u.)
    :param int l: 0 for an s orbital, 1 for a p orbital along the model axis

    """
    ip = attr.ib(converter=float)
    l = attr.ib(default=0, converter=int)

    @l.validator
    def _check_l(self, attribute, value):
        if value not in (0, 1):
            raise DomainError(f'Only s and p excited levels are modelled, got l = {value}')

    @property
    def kappa(self):
        return np.sqrt(2 * self.ip)

    @property
    def energy(self):
        """E_{1η} = −I_{1η,p}"""
        return -self.ip


def _as_levels(value):
    levels = []
    for item in value:
        if isinstance(item, ExcitedLevel):
            levels.append(item)
        elif isinstance(item, dict):
            levels.append(ExcitedLevel(**item))
        else:
            levels.append(ExcitedLevel(*np.atleast_1d(item)))
    return levels


def _as_axis(value):
    axis = np.asarray(value, dtype=float)
    norm = np.linalg.norm(axis)
    if axis.shape != (3,) or norm == 0:
        raise DomainError('The model axis must be a nonzero 3-vector')
    return axis / norm


@attr.s(eq=False)
class TwoElectronModel:
    """Energies, excited ladder and interaction of a two-electron atom

    :param float i2p: Two-electron ionization potential I_{2p} (E₀ = −I_{2p})
    :param float i1p: Ionization potential of the ion I_{1p} (E₁₀ = −I_{1p})
    :param list levels: Excited ionic levels η
    :param float v12: Strength v₁₂ of the electron-electron interaction
    :param str interaction: contact (v₁₂δ(r)) or yukawa (v₁₂exp(−μr)/r)
    :param float screening: Yukawa screening μ
    :param float delta: iδ regularization of the perturbative denominators
    :param bool ground_is_twice_ion: Use E₀ = 2E₁₀ in place of −I_{2p}
    :param numpy.ndarray axis: Orientation of the p levels
    :param callable first_dipole: Optional regular dipole d(k) for the first
        ionization step; None sets the tunnelling prefactor to one

    """
    i2p = attr.ib(converter=float)
    i1p = attr.ib(converter=float)
    levels = attr.ib(factory=list, converter=_as_levels)
    v12 = attr.ib(default=1.0, converter=float)
    interaction = attr.ib(default='contact')
    screening = attr.ib(default=1.0, converter=float)
    delta = attr.ib(default=1e-2, converter=float)
    ground_is_twice_ion = attr.ib(default=False)
    axis = attr.ib(default=(0.0, 0.0, 1.0), converter=_as_axis)
    first_dipole = attr.ib(default=None)

    def __attrs_post_init__(self):

        if not 0 < self.i1p < self.i2p:
            raise DomainError('Need 0 < I_1p < I_2p')
        for level in self.levels:
            if not 0 < level.ip < self.i1p:
                raise DomainError(f'Excited level with I = {level.ip} must be bound more weakly than the ion')
        if self.delta <= 0:
            raise DomainError('delta must be positive')
        if self.interaction not in INTERACTIONS:
            raise DomainError(f'Unknown interaction {self.interaction!r}; expected one of {INTERACTIONS}')
        if self.interaction == 'yukawa' and self.screening <= 0:
            raise DomainError('The Yukawa screening must be positive')

    @property
    def e0(self):
        """Two-electron ground energy E₀"""
        return -2 * self.i1p if self.ground_is_twice_ion else -self.i2p

    @property
    def e10(self):
        return -self.i1p

    @property
    def first_ip(self):
        """E₁₀ − E₀, the binding energy of the first electron"""
        return self.e10 - self.e0

    @property
    def kappa_ion(self):
        return np.sqrt(2 * self.i1p)

    @property
    def channel_names(self):
        return [f'eta{i}' for i in range(len(self.levels))]

    def level(self, name):
        """The excited level behind a channel name"""
        try:
            return self.levels[self.channel_names.index(name)]
        except ValueError:
            raise DomainError(f'Unknown channel {name!r}; expected one of {self.channel_names}')


# Orbitals and matrix elements
def orbital_norm(kappa, l):
    """Normalization of r^l cos^l θ exp(−κr)"""
    return np.sqrt(kappa**3 / np.pi) if l == 0 else np.sqrt(kappa**5 / np.pi)


def transfer_form_factor(model, level, q):
    """F(q) = ∫ exp(−iq·r) φ₀(r) φ_η(r) d³r and ∇_q F

    :param TwoElectronModel model: The model
    :param ExcitedLevel level: The excited level η
    :param numpy.ndarray q: Momentum transfers, shape (..., 3)

    :return: (F, ∇F)
    :rtype: tuple

    """
    q = np.asarray(q)
    alpha = model.kappa_ion + level.kappa
    pre = orbital_norm(model.kappa_ion, 0) * orbital_norm(level.kappa, level.l)
    den = alpha**2 + dot(q, q)
    if level.l == 0:
        value = pre * 8 * np.pi * alpha / den**2
        grad = (-32 * np.pi * alpha * pre / den**3)[..., None] * q
        return value, grad
    qa = dot(q, model.axis)
    c = -32j * np.pi * alpha * pre
    value = c * qa / den**3
    grad = c * (model.axis / den[..., None] ** 3 - 6 * (qa / den**4)[..., None] * q)
    return value, grad


def ground_form_factor(model, q):
    """H(q) = ∫ exp(−iq·r) φ₀(r) d³r of the ionic ground orbital and ∇_q H"""
    q = np.asarray(q)
    kappa = model.kappa_ion
    pre = orbital_norm(kappa, 0) * 8 * np.pi * kappa
    den = kappa**2 + dot(q, q)
    return pre / den**2, (-4 * pre / den**3)[..., None] * q


def interaction_transform(model, q):
    """Fourier transform Ṽ(q) of V₁₂ and its gradient"""
    q = np.asarray(q)
    if model.interaction == 'contact':
        return np.full(q.shape[:-1], model.v12), np.zeros(q.shape)
    den = dot(q, q) + model.screening**2
    value = 4 * np.pi * model.v12 / den
    return value, (-2 * value / den)[..., None] * q


def _excitation_factor(model, level, q):
    """Ṽ(q)·F(q) and its gradient"""
    f, grad_f = transfer_form_factor(model, level, q)
    v, grad_v = interaction_transform(model, q)
    return v * f, np.asarray(v)[..., None] * grad_f + np.asarray(f)[..., None] * grad_v


def excitation_potential(model, p, p2, level):
    """2⟨ψ₀(p)|V₁₂|ψ₀(p′, η)⟩ / (p² − p′² − 2(E₁₀ − E_{1η}) + iδ)

    p is the momentum before the collision (ion in its ground state) and p′
    the momentum after it (ion in η).
    """
    p, p2 = np.asarray(p), np.asarray(p2)
    value, _ = _excitation_factor(model, level, p - p2)
    den = dot(p, p) - dot(p2, p2) - 2 * (model.e10 - level.energy) + 1j * model.delta
    return 2 * EXCITATION_NORM * value / den


def excitation_kernel_g(model, p, p2, level):
    """Recollision-excitation dipole g(p, p′, η) = e∇_{p′} of :func:`excitation_potential`

    :param TwoElectronModel model: The model
    :param numpy.ndarray p: Momenta before the collision, shape (..., 3)
    :param numpy.ndarray p2: Momenta after the collision, shape (..., 3)
    :param ExcitedLevel level: The level η

    :return: Complex vectors, shape (..., 3)
    :rtype: numpy.ndarray

    """
    p, p2 = np.asarray(p), np.asarray(p2)
    value, grad = _excitation_factor(model, level, p - p2)
    den = dot(p, p) - dot(p2, p2) - 2 * (model.e10 - level.energy) + 1j * model.delta
    scale = 2 * EXCITATION_NORM
    result = scale * (-grad / den[..., None] + (2 * value / den**2)[..., None] * p2)
    return CHARGE * result


def impact_potential(model, k1, k2, k_ret):
    """2⟨ψ₀(k₁, k₂)|V₁₂|ψ₀(k)⟩ / (k² − k₁² − k₂² − 2E₁₀ + iδ)"""
    k1, k2, k_ret = np.asarray(k1), np.asarray(k2), np.asarray(k_ret)
    value, _ = ground_form_factor(model, k1 + k2 - k_ret)
    v, _ = interaction_transform(model, k1 - k_ret)
    den = dot(k_ret, k_ret) - dot(k1, k1) - dot(k2, k2) - 2 * model.e10 + 1j * model.delta
    return 2 * IMPACT_NORM * v * value / den


def impact_kernel_g(model, k1, k2, k_ret):
    """Impact-ionization dipole 2e(∇_{k₁} + ∇_{k₂}) of :func:`impact_potential`

    :param numpy.ndarray k1: Final kinetic momentum of the first electron
    :param numpy.ndarray k2: Final kinetic momentum of the second electron
    :param numpy.ndarray k_ret: Kinetic momentum of the returning electron

    :return: Complex vectors, shape (..., 3)
    :rtype: numpy.ndarray

    """
    k1, k2, k_ret = np.asarray(k1), np.asarray(k2), np.asarray(k_ret)
    value, grad = ground_form_factor(model, k1 + k2 - k_ret)
    v, grad_v = interaction_transform(model, k1 - k_ret)
    den = dot(k_ret, k_ret) - dot(k1, k1) - dot(k2, k2) - 2 * model.e10 + 1j * model.delta
    scale = 2 * IMPACT_NORM
    result = scale * ((v[..., None] * 2 * grad + value[..., None] * grad_v) / den[..., None]
                      + (2 * v * value / den**2)[..., None] * (k1 + k2))
    return CHARGE * 2 * result


# Actions
def reference_time(pulse, window=None):
    """Common upper limit of the final-state actions"""
    if pulse.enveloped:
        return pulse.duration
    window = (0.0, pulse.period) if window is None else window
    return window[1] + pulse.period


def resi_actions(model, pulse, p, p2, k, t_ion, t_exc, t_tun, level, t_end=None):
    """(S_b, S_c, S_d) of the RESI chain

    S_b(k, t′, t″) carries E₁₀ − E₀, S_c(p, t″, t‴) carries E_{1η} − E₀ and
    S_d(p, p′, t‴, t_end) carries −E₀.

    :param numpy.ndarray p: Final momentum of the recolliding electron
    :param numpy.ndarray p2: Final momentum of the excited electron
    :param numpy.ndarray k: Intermediate momentum p″
    :param t_ion: t′
    :param t_exc: t″
    :param t_tun: t‴

    :return: The three actions
    :rtype: tuple

    """
    t_end = reference_time(pulse) if t_end is None else t_end
    s_b = action(pulse, model.e10 - model.e0, k, t_exc, t_ion)
    s_c = action(pulse, level.energy - model.e0, p, t_tun, t_exc)
    s_d = action(pulse, -model.e0, p, t_end, t_tun) + action(pulse, 0.0, p2, t_end, t_tun)
    return s_b, s_c, s_d


def eii_action(model, pulse, p, p2, k, t_ion, t_col, t_end=None):
    """S_b(k, t′, t″) + S_d(p, p′, t″, t_end) of the EII chain"""
    t_end = reference_time(pulse) if t_end is None else t_end
    s_b = action(pulse, model.e10 - model.e0, k, t_col, t_ion)
    s_d = action(pulse, -model.e0, p, t_end, t_col) + action(pulse, 0.0, p2, t_end, t_col)
    return s_b + s_d


# Saddles
def _window(pulse, window):
    if window is not None:
        return window
    return (0.0, pulse.duration) if pulse.enveloped else (0.0, pulse.period)


def recollision_saddles(pulse, ip, energy, energy_rate, window=None, seeds_per_half_cycle=8, tol=1e-11,
                        max_iter=80, dedup_tolerance=1e-6):
    """Solves (k − D(t′))²/2 + Iₚ = 0 and (k − D(t″))²/2 = Q(t″) with k the return momentum

    :param LaserPulse pulse: The pulse
    :param float ip: Binding energy of the first electron
    :param callable energy: Q(t″)
    :param callable energy_rate: dQ/dt″

    :return: (rows (t′, t″), residual norms)
    :rtype: tuple

    """
    window = _window(pulse, window)
    seeds = orbits.recollision_seeds(pulse, ip, window, seeds_per_half_cycle, max_excursion=1.2)
    if not len(seeds):
        return np.zeros((0, 2), dtype=complex), np.zeros(0)

    def residual(x):
        return orbits.saddle_residual(pulse, ip, energy(x[:, 1]), x)

    def jacobian(x):
        jac = orbits.saddle_jacobian(pulse, x)
        jac[:, 1, 1] -= energy_rate(x[:, 1])
        return jac

    x, converged, norm = damped_newton(residual, jacobian, seeds, tol=tol, max_iter=max_iter)
    keep = (converged & (x[:, 0].imag > -1e-12) & (x[:, 1].real > x[:, 0].real)
            & (x[:, 0].real >= window[0]) & (x[:, 0].real <= window[1]))
    if pulse.enveloped:
        keep &= x[:, 1].real <= pulse.duration
    x, norm = x[keep], norm[keep]
    unique = deduplicate(x, dedup_tolerance)
    return x[unique], norm[unique]


def tunnelling_times(pulse, ip, p, window=None, tol=1e-11, max_iter=80, dedup_tolerance=1e-6):
    """Roots of (p − D(t))²/2 + Iₚ = 0 with Im t > 0 and Re t in the window

    :return: (times, residual norms)
    :rtype: tuple

    """
    window = _window(pulse, window)
    p = np.asarray(p)
    period = pulse.period
    seeds = []
    for peak in orbits.field_peaks(pulse, window):
        strength = np.linalg.norm(pulse.electric_field(peak))
        for offset in (-0.1, 0.0, 0.1):
            seeds.append(peak + offset * period + 1j * np.sqrt(2 * ip) / strength)
    if not seeds:
        return np.zeros(0, dtype=complex), np.zeros(0)

    def residual(x):
        k = p - pulse.drift(x[:, 0])
        return (dot(k, k) / 2 + ip)[:, None]

    def jacobian(x):
        k = p - pulse.drift(x[:, 0])
        return (-dot(k, pulse.electric_field(x[:, 0])))[:, None, None]

    x, converged, norm = damped_newton(residual, jacobian, np.array(seeds)[:, None], tol=tol, max_iter=max_iter)
    keep = (converged & (x[:, 0].imag > -1e-12) & (x[:, 0].real >= window[0]) & (x[:, 0].real <= window[1]))
    x, norm = x[keep], norm[keep]
    unique = deduplicate(x, dedup_tolerance)
    return x[unique, 0], norm[unique]


def _first_ionization(model, pulse, k, t_ion):
    if model.first_dipole is None:
        return 1.0
    return dot(pulse.electric_field(t_ion), model.first_dipole(k - pulse.drift(t_ion)))


def _track_value(a, t):
    return 1.0 if a is None else complex(a(t))


def _recollision_block(pulse, t_ion, t_col, k, curvature):
    """SPA weight (2π/i)^{5/2}/√det over (k, t′, t″)"""
    matrix = orbits.hessian_matrix(pulse, t_ion, t_col, k)
    matrix[4, 4] += curvature
    if orbits.hadamard_ratio(matrix) < orbits.COALESCENCE_LIMIT:
        warnings.warn(f'Near-singular recollision Hessian at t″ = {t_col:.4g}')
    return (2 * np.pi / 1j) ** 2.5 / np.sqrt(complex(np.linalg.det(matrix)))


@attr.s(eq=False)
class RecollisionTerm:
    """One (t′, t″) saddle of the first electron with its p′-independent weight"""
    t_ion = attr.ib()
    t_exc = attr.ib()
    k = attr.ib()
    weight = attr.ib()
    residual = attr.ib(default=0.0)


def excitation_terms(model, pulse, p, level, a=None, window=None, t_end=None, **solver_options):
    """Recollision-excitation saddles of the first electron at final momentum p

    The weight collects every factor of the RESI amplitude that does not
    involve the second electron: E(t″)·g, the first-ionization prefactor, a(t′),
    the SPA factor over (k, t′, t″) and exp(−i[S_b + S(p, t″ → t_end)]).

    :return: The terms
    :rtype: list

    """
    p = np.asarray(p, dtype=float)
    t_end = reference_time(pulse, window) if t_end is None else t_end
    gap = level.energy - model.e10
    eps_c = level.energy - model.e0

    def energy(t):
        kin = p - pulse.drift(t)
        return dot(kin, kin) / 2 + gap

    def energy_rate(t):
        return -dot(p - pulse.drift(t), pulse.electric_field(t))

    rows, norms = recollision_saddles(pulse, model.first_ip, energy, energy_rate, window, **solver_options)
    terms = []
    for (t_ion, t_exc), norm in zip(rows, norms):
        k = return_momentum(pulse, t_exc, t_ion)
        field = pulse.electric_field(t_exc)
        k_after = p - pulse.drift(t_exc)
        kernel = dot(field, excitation_kernel_g(model, k - pulse.drift(t_exc), k_after, level))
        spa = _recollision_block(pulse, t_ion, t_exc, k, dot(k_after, field))
        phase = action(pulse, model.first_ip, k, t_exc, t_ion) + action(pulse, eps_c, p, t_end, t_exc)
        weight = (spa * kernel * _first_ionization(model, pulse, k, t_ion) * _track_value(a, t_ion)
                  * np.exp(-1j * phase))
        terms.append(RecollisionTerm(t_ion=complex(t_ion), t_exc=complex(t_exc), k=k, weight=complex(weight),
                                     residual=float(norm)))
    return terms


def _delayed_times(pulse, base, t_exc):
    """Tunnelling times after Re t″; flat pulses repeat every period"""
    if pulse.enveloped:
        return base[base.real > np.real(t_exc)]
    period = pulse.period
    shift = np.maximum(np.ceil((np.real(t_exc) - base.real) / period), 0.0) * period
    return base + shift


def tunnelling_weights(model, pulse, p2, level, times, t_end):
    """Second-electron factor (2π/i)^{1/2}/√∂²S · exp(−iS(p′, t‴ → t_end)) at each t‴"""
    p2 = np.asarray(p2, dtype=float)
    times = np.asarray(times)
    kin = p2 - pulse.drift(times)
    curvature = dot(kin, pulse.electric_field(times))
    phase = action(pulse, level.ip, p2, t_end, times)
    return np.sqrt(2 * np.pi / 1j) / np.sqrt(curvature.astype(complex)) * np.exp(-1j * phase)


def _combine_resi(model, pulse, terms, p2, level, base_times, t_end):
    total = 0j
    for term in terms:
        times = _delayed_times(pulse, base_times, term.t_exc)
        if len(times):
            total += term.weight * np.sum(tunnelling_weights(model, pulse, p2, level, times, t_end))
    return (1j) ** 3 * total


def resi_channel_amplitude(model, pulse, p, p2, level, a=None, window=None, **solver_options):
    """Direct RESI amplitude of one channel η (no exchange term)

    :return: (amplitude, number of recollision saddles, number of tunnelling saddles)
    :rtype: tuple

    """
    window = _window(pulse, window)
    t_end = reference_time(pulse, window)
    terms = excitation_terms(model, pulse, p, level, a, window, t_end, **solver_options)
    base, _ = tunnelling_times(pulse, level.ip, p2, window)
    return _combine_resi(model, pulse, terms, p2, level, base, t_end), len(terms), len(base)


def resi_amplitude(model, pulse, p, p2, channels=None, exchange=True, a=None, window=None, **solver_options):
    """Coherent RESI amplitude summed over the requested channels

    A channel without saddles contributes nothing and is reported with a warning.

    :param TwoElectronModel model: The model
    :param LaserPulse pulse: The pulse
    :param numpy.ndarray p: Final momentum of the first electron
    :param numpy.ndarray p2: Final momentum of the second electron
    :param list channels: Channel names (default: all levels)
    :param bool exchange: Add the {p ↔ p′} term

    :return: The amplitude
    :rtype: complex

    """
    names = model.channel_names if channels is None else list(channels)
    total = 0j
    for name in names:
        level = model.level(name)
        value, n_rec, n_tun = resi_channel_amplitude(model, pulse, p, p2, level, a, window, **solver_options)
        if exchange:
            swapped, m_rec, m_tun = resi_channel_amplitude(model, pulse, p2, p, level, a, window, **solver_options)
            value += swapped
            n_rec, n_tun = min(n_rec, m_rec), min(n_tun, m_tun)
        if n_rec == 0 or n_tun == 0:
            warnings.warn(f'RESI channel {name} has no saddles at p = {p}, p′ = {p2}')
        total += value
    return total


def eii_amplitude(model, pulse, p, p2, a=None, window=None, **solver_options):
    """EII amplitude i²Σ_s SPA·E(t″)·g(k₁, k₂, k)·[E(t′)·d] a(t′) exp(−iS)

    :param TwoElectronModel model: The model
    :param LaserPulse pulse: The pulse
    :param numpy.ndarray p: Final momentum of the first electron
    :param numpy.ndarray p2: Final momentum of the second electron

    :return: The amplitude
    :rtype: complex

    """
    value, _ = _eii(model, pulse, np.asarray(p, dtype=float), np.asarray(p2, dtype=float), a, window,
                    **solver_options)
    return value


def _eii(model, pulse, p, p2, a, window, **solver_options):
    window = _window(pulse, window)
    t_end = reference_time(pulse, window)

    def energy(t):
        k1 = p - pulse.drift(t)
        k2 = p2 - pulse.drift(t)
        return dot(k1, k1) / 2 + dot(k2, k2) / 2 + model.i1p

    def energy_rate(t):
        field = pulse.electric_field(t)
        return -dot(p - pulse.drift(t), field) - dot(p2 - pulse.drift(t), field)

    rows, _ = recollision_saddles(pulse, model.first_ip, energy, energy_rate, window, **solver_options)
    total = 0j
    for t_ion, t_col in rows:
        k = return_momentum(pulse, t_col, t_ion)
        field = pulse.electric_field(t_col)
        k1 = p - pulse.drift(t_col)
        k2 = p2 - pulse.drift(t_col)
        kernel = dot(field, impact_kernel_g(model, k1, k2, k - pulse.drift(t_col)))
        spa = _recollision_block(pulse, t_ion, t_col, k, dot(k1, field) + dot(k2, field))
        phase = eii_action(model, pulse, p, p2, k, t_ion, t_col, t_end)
        total += (spa * kernel * _first_ionization(model, pulse, k, t_ion) * _track_value(a, t_ion)
                  * np.exp(-1j * phase))
    return (1j) ** 2 * total, len(rows)


# Correlated momentum maps
@attr.s(eq=False)
class ChannelAmplitudes:
    """Direct amplitudes per channel on a (p∥, p∥′, p⊥, p⊥′) grid

    Both electrons share the grid; the exchange term is the transpose.

    :param numpy.ndarray parallel: Longitudinal momenta
    :param numpy.ndarray transverse: Transverse momenta (Gauss-Hermite nodes)
    :param numpy.ndarray weights: Transverse quadrature weights
    :param dict values: Channel name -> complex array (n, n, m, m)
    :param dict flags: Channel name -> number of nodes without saddles

    """
    parallel = attr.ib(converter=np.asarray)
    transverse = attr.ib(converter=np.asarray)
    weights = attr.ib(converter=np.asarray)
    values = attr.ib(factory=dict)
    flags = attr.ib(factory=dict)
    mechanism = attr.ib(default='resi')

    def __attrs_post_init__(self):
        shape = (len(self.parallel),) * 2 + (len(self.transverse),) * 2
        if len(self.weights) != len(self.transverse):
            raise GridMismatchError('One transverse weight per node is required')
        for name, values in self.values.items():
            if np.shape(values) != shape:
                raise GridMismatchError(f'Channel {name} has shape {np.shape(values)}, expected {shape}')

    def exchange(self, name):
        """M(p′, p) of a channel on the same grid"""
        return np.transpose(self.values[name], (1, 0, 3, 2))


@attr.s(eq=False)
class CorrelationMap:
    """Probability over (p∥, p∥′) with the transverse momenta integrated

    :param numpy.ndarray parallel: Longitudinal momentum grid
    :param numpy.ndarray values: Probabilities, shape (n, n)
    :param list channels: Channels included
    :param str channel_sum: coherent or incoherent
    :param str symmetrization: coherent or incoherent

    """
    parallel = attr.ib(converter=np.asarray)
    values = attr.ib(converter=np.asarray)
    channels = attr.ib(factory=list)
    channel_sum = attr.ib(default='coherent')
    symmetrization = attr.ib(default='coherent')

    def __attrs_post_init__(self):
        if np.any(self.values < 0):
            raise DomainError('A correlation map cannot be negative')

    def quadrant_masses(self):
        """Fractions of the probability in quadrants I (++), II (−+), III (−−) and IV (+−)

        Nodes on the axes are left out.
        """
        p1 = self.parallel[:, None]
        p2 = self.parallel[None, :]
        masks = {'I': (p1 > 0) & (p2 > 0), 'II': (p1 < 0) & (p2 > 0),
                 'III': (p1 < 0) & (p2 < 0), 'IV': (p1 > 0) & (p2 < 0)}
        masses = {key: float(np.sum(self.values * mask)) for key, mask in masks.items()}
        total = sum(masses.values())
        if total <= 0:
            return {key: 0.0 for key in masses}
        return {key: value / total for key, value in masses.items()}

    def to_frame(self):
        """Long table with columns p1_au, p2_au, prob"""
        p1, p2 = np.meshgrid(self.parallel, self.parallel, indexing='ij')
        return pd.DataFrame({_var.p1: p1.ravel(), _var.p2: p2.ravel(), _var.prob: self.values.ravel()})


def _check_mode(value, kind):
    if value not in SUM_MODES:
        raise DomainError(f'Unknown {kind} mode {value!r}; expected one of {SUM_MODES}')


def correlation_map(amplitudes, channel_sum='coherent', symmetrization='coherent', channels=None):
    """Sums the pathways and integrates the transverse momenta

    ``symmetrization`` combines the direct and exchange terms, ``channel_sum``
    the excited-state channels; each is either coherent (|Σ|²) or incoherent (Σ|·|²).

    :param ChannelAmplitudes amplitudes: Amplitudes on a common grid
    :param str channel_sum: coherent or incoherent
    :param str symmetrization: coherent or incoherent
    :param list channels: Subset of channel names

    :return: The map
    :rtype: CorrelationMap

    """
    _check_mode(channel_sum, 'channel sum')
    _check_mode(symmetrization, 'symmetrization')
    names = list(amplitudes.values) if channels is None else list(channels)
    missing = [name for name in names if name not in amplitudes.values]
    if missing:
        raise GridMismatchError(f'Channels {missing} are not on the amplitude grid')

    if symmetrization == 'coherent':
        groups = [[amplitudes.values[n] + amplitudes.exchange(n) for n in names]]
    else:
        groups = [[amplitudes.values[n] for n in names], [amplitudes.exchange(n) for n in names]]

    shape = (len(amplitudes.parallel),) * 2 + (len(amplitudes.transverse),) * 2
    density = np.zeros(shape)
    for group in groups:
        if not group:
            continue
        if channel_sum == 'coherent':
            density += np.abs(np.sum(group, axis=0)) ** 2
        else:
            density += np.sum(np.abs(group) ** 2, axis=0)
    w = amplitudes.weights
    values = np.einsum('m,n,ijmn->ij', w, w, density)
    return CorrelationMap(parallel=amplitudes.parallel, values=values, channels=names, channel_sum=channel_sum,
                          symmetrization=symmetrization)


def transverse_grid(model, pulse, hermite_points=16, scale=None):
    """Gauss-Hermite nodes and weights for ∫ f(p⊥) dp⊥

    The default scale √(E₀/κ) is the width of the quasi-static tunnelling
    distribution.

    :return: (nodes, weights)
    :rtype: tuple

    """
    if scale is None:
        if pulse.e0 <= 0:
            raise DomainError('The default transverse scale needs a nonzero field')
        scale = np.sqrt(pulse.e0 / np.sqrt(2 * model.first_ip))
    x, w = hermgauss(hermite_points)
    return scale * x, scale * w * np.exp(x**2)


def nsdi_amplitudes(model, pulse, parallel, mechanism='resi', channels=None, hermite_points=16,
                    transverse_scale=None, a=None, window=None, pool=None, **solver_options):
    """Direct amplitudes of one mechanism on the (p∥, p∥′, p⊥, p⊥′) grid

    p∥ lies along the major polarization axis, p⊥ along the minor one.

    :param TwoElectronModel model: The model
    :param LaserPulse pulse: The pulse
    :param numpy.ndarray parallel: Longitudinal momentum grid
    :param str mechanism: resi or eii
    :param list channels: RESI channel names (default: all)
    :param int hermite_points: Gauss-Hermite points per transverse axis
    :param WorkerPool pool: Optional worker pool

    :return: The amplitudes
    :rtype: ChannelAmplitudes

    """
    if mechanism not in MECHANISMS:
        raise DomainError(f'Unknown mechanism {mechanism!r}; expected one of {MECHANISMS}')
    parallel = np.asarray(parallel, dtype=float)
    transverse, weights = transverse_grid(model, pulse, hermite_points, transverse_scale)
    e1, e2 = pulse.axes
    momenta = parallel[:, None, None] * e1 + transverse[None, :, None] * e2
    n, m = len(parallel), len(transverse)
    nodes = [(i, u) for i in range(n) for u in range(m)]
    pool = pool or serial_pool()
    window = _window(pulse, window)
    t_end = reference_time(pulse, window)

    if mechanism == 'eii':
        def row(node):
            i, u = node
            out = np.zeros((n, m), dtype=complex)
            empty = 0
            for j in range(n):
                for v in range(m):
                    out[j, v], found = _eii(model, pulse, momenta[i, u], momenta[j, v], a, window, **solver_options)
                    empty += found == 0
            return out, empty

        results = pool.map(row, nodes)
        values = np.zeros((n, n, m, m), dtype=complex)
        for (i, u), (out, _) in zip(nodes, results):
            values[i, :, u, :] = out
        flags = {'eii': int(sum(r[1] for r in results))}
        _report(flags)
        return ChannelAmplitudes(parallel, transverse, weights, {'eii': values}, flags, mechanism)

    names = model.channel_names if channels is None else list(channels)
    values, flags = {}, {}
    for name in names:
        level = model.level(name)
        base = [[tunnelling_times(pulse, level.ip, momenta[j, v], window)[0] for v in range(m)] for j in range(n)]

        def row(node):
            i, u = node
            terms = excitation_terms(model, pulse, momenta[i, u], level, a, window, t_end, **solver_options)
            out = np.zeros((n, m), dtype=complex)
            for j in range(n):
                for v in range(m):
                    out[j, v] = _combine_resi(model, pulse, terms, momenta[j, v], level, base[j][v], t_end)
            return out, len(terms) == 0

        results = pool.map(row, nodes)
        grid = np.zeros((n, n, m, m), dtype=complex)
        for (i, u), (out, _) in zip(nodes, results):
            grid[i, :, u, :] = out
        values[name] = grid
        missing = sum(len(times) == 0 for column in base for times in column)
        flags[name] = int(sum(r[1] for r in results)) + missing
    _report(flags)
    return ChannelAmplitudes(parallel, transverse, weights, values, flags, mechanism)


def _report(flags):
    for name, count in flags.items():
        if count:
            warnings.warn(f'Channel {name}: {count} grid nodes without saddles')
    logger.info(f'NSDI amplitudes: {", ".join(flags) or "no channels"}')
