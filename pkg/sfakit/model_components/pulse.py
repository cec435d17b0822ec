"""
Laser pulses and the derived field quantities

Every pulse is stored as a short harmonic series for the vector potential,

    A(t) = c0 + c1·t + Σ_k u_k cos(a_k t + φ_k),

which gives closed forms for A, E = −dA/dt, ∫A and ∫A·A that also hold for
complex times. Electron charge is e = −1, so the drift momentum is
D(t) = −A(t), dD/dt = E(t) and the kinetic momentum is p − D(t).
"""
# Standard library imports
import logging
import warnings

# Third party imports
import attr
import numpy as np

# sfakit library imports
from sfakit.calculation_tools.errors import DomainError
from sfakit.general_settings.unit_base import units

logger = logging.getLogger('PulseLogger')

ENVELOPES = ('sin2_on_vector_potential', 'sin2_on_field', 'flat_monochromatic')
UP_EV_CONSTANT = 9.337e-20

_Z = np.array([0.0, 0.0, 1.0])
_X = np.array([1.0, 0.0, 0.0])


def _validate_envelope(instance, attribute, value):
    if value not in ENVELOPES:
        raise DomainError(f'Unknown envelope {value!r}; expected one of {ENVELOPES}')


def _validate_ellipticity(instance, attribute, value):
    if not 0.0 <= value <= 1.0:
        raise DomainError(f'Ellipticity must lie in [0, 1], got {value}')


def _whole_number(value):
    number = float(value)
    if not number.is_integer():
        raise DomainError(f'n_cycles must be a whole number, got {value}')
    return int(number)


@attr.s(eq=False)
class LaserPulse:
    """The driving field

    :param float e0: Peak electric field (a.u.)
    :param float omega: Carrier frequency (a.u.)
    :param float cep: Carrier-envelope phase (rad)
    :param int n_cycles: Number of carrier cycles
    :param str envelope: One of sin2_on_vector_potential, sin2_on_field, flat_monochromatic
    :param float ellipticity: Minor/major axis ratio in [0, 1]
    :param tuple axes: Orthonormal (major, minor) polarization axes

    """
    e0 = attr.ib(converter=float)
    omega = attr.ib(converter=float)
    cep = attr.ib(default=0.0, converter=float)
    n_cycles = attr.ib(default=4, converter=_whole_number)
    envelope = attr.ib(default='sin2_on_vector_potential', validator=_validate_envelope)
    ellipticity = attr.ib(default=0.0, converter=float, validator=_validate_ellipticity)
    axes = attr.ib(default=(_Z, _X))

    def __attrs_post_init__(self):

        if self.omega <= 0:
            raise DomainError('The carrier frequency must be positive')
        if self.n_cycles < 1:
            raise DomainError('n_cycles must be a positive integer')
        e1, e2 = (np.asarray(a, dtype=float) for a in self.axes)
        if abs(e1 @ e1 - 1) > 1e-12 or abs(e2 @ e2 - 1) > 1e-12 or abs(e1 @ e2) > 1e-12:
            raise DomainError('Polarization axes must be orthonormal')
        self.axes = (e1, e2)
        self._build_series()

    @classmethod
    def from_laser_units(cls, intensity_wcm2, wavelength_nm, **kwargs):
        """Builds a pulse from a peak intensity in W/cm² and a wavelength in nm

        :param float intensity_wcm2: Peak intensity
        :param float wavelength_nm: Vacuum wavelength

        :return: The pulse
        :rtype: LaserPulse

        """
        e0 = units.field_from_intensity(intensity_wcm2)
        omega = units.omega_from_wavelength(wavelength_nm)
        return cls(e0=e0, omega=omega, **kwargs)

    @property
    def duration(self):
        """t_F = 2π·Nc/ω"""
        return 2 * np.pi * self.n_cycles / self.omega

    @property
    def period(self):
        return 2 * np.pi / self.omega

    @property
    def enveloped(self):
        return self.envelope != 'flat_monochromatic'

    @property
    def intensity_wcm2(self):
        return units.intensity_from_field(self.e0)

    @property
    def wavelength_nm(self):
        return units.wavelength_from_omega(self.omega)

    def _build_series(self):
        """Expands the chosen envelope into the harmonic series of A(t)"""
        e1, e2 = self.axes
        eps = self.ellipticity
        norm = np.sqrt(1 + eps**2)
        w, phi = self.omega, self.cep
        w_env = w / self.n_cycles

        # (vector, frequency, phase) triples of cos(freq·t + phase)
        if self.envelope == 'flat_monochromatic':
            amp = self.e0 / w / norm
            terms = [(amp * e1, w, phi), (amp * eps * e2, w, phi - np.pi / 2)]
        elif self.envelope == 'sin2_on_vector_potential':
            amp = self.e0 / w / norm
            terms = []
            for vec, shift in ((amp * e1, 0.0), (amp * eps * e2, -np.pi / 2)):
                terms += [(0.5 * vec, w, phi + shift),
                          (-0.25 * vec, w + w_env, phi + shift),
                          (-0.25 * vec, w - w_env, phi + shift)]
        else:
            amp = self.e0 / norm
            field_terms = []
            for vec, shift in ((amp * e1, -np.pi / 2), (amp * eps * e2, np.pi)):
                field_terms += [(0.5 * vec, w, phi + shift),
                                (-0.25 * vec, w + w_env, phi + shift),
                                (-0.25 * vec, w - w_env, phi + shift)]
            terms = []
            c0 = np.zeros(3)
            c1 = np.zeros(3)
            for vec, freq, ph in field_terms:
                if abs(freq) < 1e-14:
                    c1 -= vec * np.cos(ph)
                else:
                    terms.append((-vec / freq, freq, ph - np.pi / 2))
                    c0 += vec * np.sin(ph) / freq
            self._set_series(terms, c0, c1)
            return

        self._set_series(terms, np.zeros(3), np.zeros(3))

    def _set_series(self, terms, c0, c1):
        c0 = np.array(c0, dtype=float)
        kept = []
        for vec, freq, ph in terms:
            if np.allclose(vec, 0.0):
                continue
            if abs(freq) < 1e-14:
                c0 += vec * np.cos(ph)
            else:
                kept.append((vec, freq, ph))
        self._c0 = c0
        self._c1 = np.array(c1, dtype=float)
        self._u = np.array([k[0] for k in kept]).reshape(-1, 3)
        self._a = np.array([k[1] for k in kept], dtype=float)
        self._phi = np.array([k[2] for k in kept], dtype=float)
        self._gram = self._u @ self._u.T

    def _check_domain(self, t):
        if not self.enveloped:
            return
        t = np.asarray(t)
        if np.iscomplexobj(t):
            if np.any(t.imag != 0):
                return
            t = t.real
        tol = 1e-9 * self.duration
        if np.any(t < -tol) or np.any(t > self.duration + tol):
            raise DomainError(f'Time outside the pulse window [0, {self.duration:.6g}]')

    def _theta(self, t):
        t = np.asarray(t)
        return self._a * t[..., None] + self._phi, t

    def vector_potential(self, t):
        """A(t), shape (..., 3)"""
        self._check_domain(t)
        theta, t = self._theta(t)
        return self._c0 + self._c1 * t[..., None] + np.cos(theta) @ self._u

    def electric_field(self, t):
        """E(t) = −dA/dt, shape (..., 3)"""
        self._check_domain(t)
        theta, t = self._theta(t)
        return -self._c1 + (np.sin(theta) * self._a) @ self._u + 0 * t[..., None]

    def field_derivative(self, t):
        """dE/dt, shape (..., 3)"""
        theta, t = self._theta(t)
        return (np.cos(theta) * self._a**2) @ self._u + 0 * t[..., None]

    def field_integral(self, t):
        """An antiderivative of A(t), shape (..., 3)"""
        theta, t = self._theta(t)
        tt = t[..., None]
        return self._c0 * tt + self._c1 * tt**2 / 2 + (np.sin(theta) / self._a) @ self._u

    def field_integral_squared(self, t):
        """An antiderivative of A(t)·A(t), shape (...)"""
        theta, t = self._theta(t)
        c0, c1 = self._c0, self._c1
        a = self._a
        value = (c0 @ c0) * t + (c0 @ c1) * t**2 + (c1 @ c1) * t**3 / 3
        value = value + 2 * np.sum((self._u @ c0) * np.sin(theta) / a, axis=-1)
        value = value + 2 * np.sum((self._u @ c1) * (t[..., None] * np.sin(theta) / a + np.cos(theta) / a**2), axis=-1)
        if len(a):
            a_sum = a[:, None] + a[None, :]
            a_dif = a[:, None] - a[None, :]
            p_sum = self._phi[:, None] + self._phi[None, :]
            p_dif = self._phi[:, None] - self._phi[None, :]
            tt = t[..., None, None]
            term = _sin_over(a_sum, p_sum, tt) + _sin_over(a_dif, p_dif, tt)
            value = value + 0.5 * np.sum(self._gram * term, axis=(-1, -2))
        return value

    def envelope_value(self, t):
        """Envelope f(t) in [0, 1], so that the peak field is E0·f(t)"""
        t = np.real(np.asarray(t, dtype=complex))
        if not self.enveloped:
            return np.ones_like(t)
        return np.sin(self.omega * t / (2 * self.n_cycles)) ** 2

    # Drift-momentum view used by every SFA formula
    def drift(self, t):
        """D(t) = −A(t)"""
        return -self.vector_potential(t)

    def drift_integral(self, t):
        """An antiderivative of D(t)"""
        return -self.field_integral(t)

    def drift_square_integral(self, t):
        """An antiderivative of D(t)·D(t)"""
        return self.field_integral_squared(t)

    def ponderomotive_energy(self, unit='au'):
        """See :func:`ponderomotive_energy`"""
        return ponderomotive_energy(self, unit=unit)

    def keldysh_parameter(self, ip):
        """See :func:`keldysh_parameter`"""
        return keldysh_parameter(self, ip)

    def cutoff_energy(self, ip):
        """Classical HHG cutoff photon energy Iₚ + 3.17Uₚ (a.u.)"""
        return ip + 3.17 * self.ponderomotive_energy()

    def time_grid(self, n_points=None, points_per_period=40):
        """Uniform grid over [0, t_F] (one optical period for flat pulses)

        :param int n_points: Number of points; overrides points_per_period
        :param int points_per_period: Density per optical period

        :return: The grid
        :rtype: numpy.ndarray

        """
        if n_points is None:
            n_points = int(np.ceil(points_per_period * self.n_cycles)) + 1
        return np.linspace(0.0, self.duration, n_points)


def _sin_over(a, phi, t):
    """sin(a t + φ)/a, continued as t·cos φ at a = 0"""
    zero = np.abs(a) < 1e-14
    a_safe = np.where(zero, 1.0, a)
    return np.where(zero, t * np.cos(phi), np.sin(a_safe * t + phi) / a_safe)


def electric_field(pulse, t):
    """Electric field E(t) of the pulse

    :param LaserPulse pulse: The pulse
    :param t: Time or array of times (a.u.)

    :return: Field vector(s), shape (..., 3)
    :rtype: numpy.ndarray

    """
    return pulse.electric_field(t)


def vector_potential(pulse, t):
    """Vector potential A(t) of the pulse, with E = −dA/dt

    :param LaserPulse pulse: The pulse
    :param t: Time or array of times (a.u.)

    :return: Vector potential(s), shape (..., 3)
    :rtype: numpy.ndarray

    """
    return pulse.vector_potential(t)


def ponderomotive_energy(pulse, unit='au'):
    """Uₚ = E0²/(4ω²)

    The eV variant uses the laboratory constant 9.337e-20·I[W/cm²]·λ[nm]².

    :param LaserPulse pulse: The pulse
    :param str unit: 'au' or 'ev'

    :return: Uₚ
    :rtype: float

    """
    if unit == 'au':
        return pulse.e0**2 / (4 * pulse.omega**2)
    if unit == 'ev':
        if pulse.e0 == 0:
            return 0.0
        return ponderomotive_energy_ev(pulse.intensity_wcm2, pulse.wavelength_nm)
    raise ValueError(f'Unknown unit {unit!r}')


def ponderomotive_energy_ev(intensity_wcm2, wavelength_nm):
    """Uₚ in eV from laboratory parameters"""
    return UP_EV_CONSTANT * intensity_wcm2 * wavelength_nm**2


def keldysh_parameter(pulse, ip):
    """γ = sqrt(Iₚ/2Uₚ)

    :param LaserPulse pulse: The pulse
    :param float ip: Ionization potential (a.u.)

    :return: The Keldysh parameter
    :rtype: float

    """
    up = ponderomotive_energy(pulse)
    if up <= 0:
        raise DomainError('Keldysh parameter undefined for a vanishing field')
    if ip <= 0:
        raise DomainError('The ionization potential must be positive')
    gamma = np.sqrt(ip / (2 * up))
    if gamma > 1:
        logger.debug(f'Keldysh parameter {gamma:.3f} > 1: multiphoton regime')
    return float(gamma)


def zero_net_area_check(pulse, tol=1e-12):
    """Warns if the pulse area ∫E dt does not vanish"""
    area = pulse.vector_potential(0.0) - pulse.vector_potential(pulse.duration)
    if np.linalg.norm(area) > tol:
        warnings.warn(f'Pulse has nonzero net area {np.linalg.norm(area):.3e}')
    return area
