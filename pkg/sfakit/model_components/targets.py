"""
Model targets built from a rank-one non-local separable potential

Two targets share one duck-typed interface (``dimension``, ``ip``, ``dipole``,
``rescatter_g``, ``bound_wavefunction``) so the single-electron pipelines accept
either:

- SeparableTarget: the 3D potential −γ|φ⟩⟨φ| with a multi-centre form factor
- DoubleDeltaTarget1D: the 1D two-centre delta model, whose even channel is a
  rank-one separable potential with φ(k) = cos(kR/2) and γ = λ/π

Momenta are 3-vectors on the last axis; all methods broadcast over leading axes.
Dipoles carry the electron charge e = −1.
"""
# Standard library imports
import logging

# Third party imports
import attr
import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq
from scipy.special import erfcx, spherical_jn

# sfakit library imports
from sfakit.calculation_tools.errors import DomainError, NonConvergenceError, UnboundTargetError
from sfakit.calculation_tools.helper import dot
from sfakit.calculation_tools.quadrature import complex_quad, pole_integral

logger = logging.getLogger('TargetLogger')

CHARGE = -1.0
PROFILES = ('gaussian', 'lorentzian')


def _as_centers(value):
    centers = np.atleast_2d(np.asarray(value, dtype=float))
    if centers.shape[-1] != 3:
        raise DomainError('Centres must be 3-vectors')
    return centers


def _radius(p):
    """|p| for real momenta, the analytic continuation √(p·p) for complex ones"""
    p = np.asarray(p)
    if np.iscomplexobj(p):
        return np.sqrt(dot(p, p))
    return np.linalg.norm(p, axis=-1)


def _j0(x):
    return spherical_jn(0, x)


def _j1(x):
    return spherical_jn(1, x)


@attr.s(eq=False)
class FormFactor:
    """φ(p) = Σ_i w_i exp(i p·R_i) φ̃(|p|)

    :param numpy.ndarray centers: Centre positions R_i, shape (n, 3)
    :param str profile: 'gaussian' (φ̃ = exp(−p²/2σ²)) or 'lorentzian' (φ̃ = 1/(p²+β²))
    :param float width: σ for the Gaussian, β for the Lorentzian
    :param numpy.ndarray weights: Complex weights w_i (default all ones)

    """
    centers = attr.ib(default=((0.0, 0.0, 0.0),), converter=_as_centers)
    profile = attr.ib(default='gaussian')
    width = attr.ib(default=1.0, converter=float)
    weights = attr.ib(default=None)

    def __attrs_post_init__(self):

        if self.profile not in PROFILES:
            raise DomainError(f'Unknown radial profile {self.profile!r}; expected one of {PROFILES}')
        if self.width <= 0:
            raise DomainError('The profile width must be positive')
        if self.weights is None:
            self.weights = np.ones(len(self.centers), dtype=complex)
        self.weights = np.asarray(self.weights, dtype=complex).reshape(-1)
        if len(self.weights) != len(self.centers):
            raise DomainError('One weight per centre is required')
        self._rel = self.centers[None, :, :] - self.centers[:, None, :]
        self._dist = np.linalg.norm(self._rel, axis=-1)
        self._pair = np.conj(self.weights)[:, None] * self.weights[None, :]

    @property
    def coincident(self):
        """True when all centres coincide, which enables the closed forms"""
        return bool(np.all(self._dist < 1e-14))

    @property
    def at_origin(self):
        return self.coincident and bool(np.all(np.abs(self.centers) < 1e-14))

    def radial(self, p):
        p = np.asarray(p)
        if self.profile == 'gaussian':
            return np.exp(-p**2 / (2 * self.width**2))
        return 1 / (p**2 + self.width**2)

    def radial_derivative_over_p(self, p):
        """φ̃′(p)/p, regular at p = 0"""
        p = np.asarray(p)
        if self.profile == 'gaussian':
            return -self.radial(p) / self.width**2
        return -2 / (p**2 + self.width**2) ** 2

    def _phases(self, p):
        return np.exp(1j * np.asarray(p) @ self.centers.T) * self.weights

    def value(self, p):
        p = np.asarray(p)
        pn = _radius(p)
        return self._phases(p).sum(axis=-1) * self.radial(pn)

    def gradient(self, p):
        p = np.asarray(p)
        pn = _radius(p)
        ph = self._phases(p)
        shift = 1j * (ph @ self.centers) * self.radial(pn)[..., None]
        return shift + (ph.sum(axis=-1) * self.radial_derivative_over_p(pn))[..., None] * p

    def angular_weight(self, p):
        """S(p) = Σ_ij w_i* w_j j0(p|R_j − R_i|), so ∫dΩ|φ|² = 4π S(p) φ̃(p)²"""
        p = np.asarray(p, dtype=float)
        return np.real(np.sum(self._pair * _j0(p[..., None, None] * self._dist), axis=(-1, -2)))

    def angular_vectors(self, p):
        """Angular integrals (over 4π) of φ*∇φ and of p̂|φ|², each divided by φ̃²
        where needed, returned as (shift, radial, direction) pieces

        :return: (Σ w_i* w_j iR_j j0, Σ w_i* w_j i j1 R̂_ij) both shape (3,), times 4π
        """
        p = float(p)
        j0 = _j0(p * self._dist)
        j1 = _j1(p * self._dist)
        safe = np.where(self._dist > 0, self._dist, 1.0)
        unit = self._rel / safe[..., None]
        shift = 4 * np.pi * np.einsum('ij,ij,jk->k', self._pair, j0, 1j * self.centers)
        direction = 4 * np.pi * np.einsum('ij,ij,ijk->k', self._pair, 1j * j1, unit)
        return shift, direction

    def radial_moment(self, k, p_max=30.0):
        """M(k) = ∫ |φ(p)|²/(p² + k²) d³p for Re k > 0"""
        k = complex(k)
        if self.coincident:
            w2 = abs(self.weights.sum()) ** 2
            if self.profile == 'gaussian':
                s = self.width
                return 4 * np.pi * w2 * (s * np.sqrt(np.pi) / 2 - np.pi * k / 2 * erfcx(k / s))
            b = self.width
            return 4 * np.pi * w2 * np.pi / (4 * b * (b + k) ** 2)

        def integrand(p):
            return 4 * np.pi * p**2 * self.angular_weight(p) * self.radial(p) ** 2

        return complex(pole_integral(integrand, 1j * k, order=1, p_max=p_max))


def coupling_for_ip(form_factor, ip, p_max=30.0):
    """The coupling γ whose bound state has the given Iₚ

    :param FormFactor form_factor: The form factor
    :param float ip: Target ionization potential (a.u.)

    :return: γ
    :rtype: float

    """
    if ip <= 0:
        raise DomainError('The ionization potential must be positive')
    kappa = np.sqrt(2 * ip)
    return float(1 / (2 * form_factor.radial_moment(kappa, p_max).real))


def critical_coupling(form_factor, p_max=30.0):
    """Smallest γ with a bound state, 1/(2∫|φ|²/p² d³p)"""
    return float(1 / (2 * form_factor.radial_moment(1e-12, p_max).real))


def solve_bound_state(form_factor, gamma, p_max=30.0):
    """Solves 1 = γ∫|φ|²/(p²/2 + Iₚ) d³p for Iₚ and normalizes the bound state

    :param FormFactor form_factor: The form factor
    :param float gamma: The coupling strength

    :return: (ip, norm)
    :rtype: tuple

    """
    gamma_c = critical_coupling(form_factor, p_max)
    if gamma <= gamma_c:
        raise UnboundTargetError(gamma, gamma_c)

    def residual(log_kappa):
        return 2 * gamma * form_factor.radial_moment(np.exp(log_kappa), p_max).real - 1

    lo, hi = np.log(1e-10), np.log(1.0)
    while residual(hi) > 0:
        hi += 1.0
        if hi > np.log(1e6):
            raise NonConvergenceError('Could not bracket the bound-state energy', gamma=gamma)
    log_kappa = brentq(residual, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=400)
    kappa = np.exp(log_kappa)
    ip = kappa**2 / 2

    def norm_integrand(p):
        return (4 * np.pi * p**2 * form_factor.angular_weight(p) * form_factor.radial(p) ** 2
                * 4 / (p**2 + kappa**2) ** 2)

    overlap = complex_quad(norm_integrand, 0.0, np.inf).real
    norm = 1 / np.sqrt(overlap)
    logger.debug(f'Bound state: gamma = {gamma:.6g}, ip = {ip:.10g}, norm = {norm:.6g}')
    return float(ip), float(norm)


@attr.s(eq=False)
class SeparableTarget:
    """3D separable-potential target

    Give either ``gamma`` or ``ip``; the other is solved for.

    :param FormFactor form_factor: The form factor
    :param float gamma: Coupling strength
    :param float ip: Ionization potential (a.u.)
    :param float epsilon: Pole regularization ε (a.u.)
    :param float p_max: Split point of the radial integrals

    """
    form_factor = attr.ib(factory=FormFactor)
    gamma = attr.ib(default=None)
    ip = attr.ib(default=None)
    epsilon = attr.ib(default=1e-3, converter=float)
    p_max = attr.ib(default=30.0, converter=float)

    dimension = 3

    def __attrs_post_init__(self):

        if (self.gamma is None) == (self.ip is None):
            raise DomainError('Give exactly one of gamma and ip')
        if self.epsilon <= 0:
            raise DomainError('epsilon must be positive')
        if self.gamma is None:
            self.gamma = coupling_for_ip(self.form_factor, float(self.ip), self.p_max)
        self.gamma = float(self.gamma)
        self.ip, self.norm = solve_bound_state(self.form_factor, self.gamma, self.p_max)
        self.kappa = np.sqrt(2 * self.ip)
        self._tables = {}

    # Bound and scattering states
    def a_function(self, k):
        """A(k) = 2γ∫|φ|²/(p² + k²) d³p"""
        return 2 * self.gamma * self.form_factor.radial_moment(k, self.p_max)

    def bound_wavefunction(self, p):
        """Ψ₀(p) = 𝒩φ(p)/(p²/2 + Iₚ)"""
        p = np.asarray(p)
        return self.norm * self.form_factor.value(p) / (dot(p, p) / 2 + self.ip)

    def bound_gradient(self, p):
        """∇_p Ψ₀(p)"""
        p = np.asarray(p)
        den = dot(p, p) / 2 + self.ip
        phi = self.form_factor.value(p)
        return self.norm * (self.form_factor.gradient(p) / den[..., None]
                            - p * (phi / den**2)[..., None])

    def on_shell_a(self, s, sign=1):
        """A(±i s + ε), tabulated over |p| when the closed forms do not apply"""
        s = np.asarray(s)
        if self.form_factor.coincident:
            return self.a_function_array(sign * 1j * s + self.epsilon)
        table = self._table(('a', sign), lambda x: self.a_function(sign * 1j * x + self.epsilon))
        return table(np.real(s))

    def a_function_array(self, k):
        """Vectorized A(k) for coincident centres"""
        k = np.asarray(k, dtype=complex)
        w2 = abs(self.form_factor.weights.sum()) ** 2
        if self.form_factor.profile == 'gaussian':
            s = self.form_factor.width
            m = s * np.sqrt(np.pi) / 2 - np.pi * k / 2 * erfcx(k / s)
        else:
            b = self.form_factor.width
            m = np.pi / (4 * b * (b + k) ** 2)
        return 2 * self.gamma * 4 * np.pi * w2 * m

    def _table(self, key, func, s_max=None, n=400):
        if key not in self._tables:
            s_max = s_max or min(self.p_max, 15.0)
            grid = np.linspace(0.0, s_max, n)
            values = np.array([func(x) for x in grid])
            spline_re = CubicSpline(grid, values.real, axis=0)
            spline_im = CubicSpline(grid, values.imag, axis=0)
            self._tables[key] = lambda x: spline_re(x) + 1j * spline_im(x)
            logger.debug(f'Tabulated {key} on {n} points up to |p| = {s_max}')
        return self._tables[key]

    def scattering_correction(self, p, p0):
        """δΨ_{p0}(p) = 2γφ(p)φ*(p0)/[(1 − A(i|p0|+ε))(p² − (|p0| − iε)²)]"""
        p, p0 = np.asarray(p), np.asarray(p0)
        s0 = np.linalg.norm(p0, axis=-1)
        c = s0 - 1j * self.epsilon
        num = 2 * self.gamma * self.form_factor.value(p) * np.conj(self.form_factor.value(p0))
        return num / ((1 - self.on_shell_a(s0, 1)) * (dot(p, p) - c**2))

    def scattering_gradient(self, p, p0):
        """∇_p δΨ_{p0}(p)"""
        p, p0 = np.asarray(p), np.asarray(p0)
        s0 = np.linalg.norm(p0, axis=-1)
        c = s0 - 1j * self.epsilon
        den = dot(p, p) - c**2
        pre = 2 * self.gamma * np.conj(self.form_factor.value(p0)) / (1 - self.on_shell_a(s0, 1))
        grad = (self.form_factor.gradient(p) / den[..., None]
                - 2 * p * (self.form_factor.value(p) / den**2)[..., None])
        return pre[..., None] * grad

    def orthogonality_overlap(self, p0):
        """⟨Ψ₀|Ψ_{p0}⟩ evaluated with the partial-fraction form of A(k)"""
        p0 = np.asarray(p0)
        s0 = np.linalg.norm(p0, axis=-1)
        c = s0 - 1j * self.epsilon
        phi0 = np.conj(self.form_factor.value(p0))
        plane = self.norm * phi0 / (c**2 / 2 + self.ip)
        a_k = self.on_shell_a(s0, 1)
        correction = self.norm * phi0 * 2 / (c**2 + self.kappa**2) * (a_k - 1) / (1 - a_k)
        return plane + correction

    # Dipole
    def _dipole_vector_integral(self, s0):
        """∫ φ*[(p²/2+Iₚ)∇φ − pφ]/[(p² − (|p0|+iε)²)(p²/2+Iₚ)²] d³p"""
        ff = self.form_factor

        def integrand(p):
            shift, direction = ff.angular_vectors(p)
            rad = ff.radial(p)
            energy = p**2 / 2 + self.ip
            vec = energy * shift * rad**2 + (energy * rad * ff.radial_derivative_over_p(p) * p - p * rad**2) * direction
            return p**2 * vec / energy**2

        return pole_integral(integrand, s0 + 1j * self.epsilon, order=1, p_max=self.p_max)

    def dipole(self, p0):
        """Dipole matrix element d(p0) = e⟨Ψ_{p0}|x|Ψ₀⟩ in closed form

        :param numpy.ndarray p0: Momenta, shape (..., 3)

        :return: Complex dipole vectors, shape (..., 3)
        :rtype: numpy.ndarray

        """
        p0 = np.asarray(p0)
        if not np.iscomplexobj(p0):
            p0 = p0.astype(float)
        ff = self.form_factor
        energy = dot(p0, p0) / 2 + self.ip
        phi = ff.value(p0)
        first = 1j * self.norm * (ff.gradient(p0) / energy[..., None] - p0 * (phi / energy**2)[..., None])
        if ff.at_origin:
            return CHARGE * first
        s0 = _radius(p0)
        table = self._table('dipole', lambda x: self._dipole_vector_integral(x))
        pre = 2j * self.gamma * self.norm * phi / (1 - self.on_shell_a(s0, -1))
        return CHARGE * (first + pre[..., None] * table(np.real(s0)))

    def regular_dipole(self, p0):
        """(p0²/2 + Iₚ)²·d(p0), finite at the tunnelling saddles p0² = −2Iₚ"""
        p0 = np.asarray(p0)
        energy = dot(p0, p0) / 2 + self.ip
        ff = self.form_factor
        if ff.at_origin:
            return CHARGE * 1j * self.norm * (ff.gradient(p0) * energy[..., None] - p0 * ff.value(p0)[..., None])
        return self.dipole(p0) * (energy**2)[..., None]

    # Continuum-continuum coupling
    def rescatter_g(self, p1, p2):
        """Non-δ part of e⟨Ψ_{p1}|x|Ψ_{p2}⟩

        Two boundary terms i∇δΨ_{p2}(p1) − i∇δΨ*_{p1}(p2) plus the double-pole
        integral i∫δΨ*_{p1}∇δΨ_{p2} d³p, which vanishes for coincident centres.

        :param numpy.ndarray p1: Final momenta, shape (..., 3)
        :param numpy.ndarray p2: Initial momenta, shape (..., 3)

        :return: Complex vectors, shape (..., 3)
        :rtype: numpy.ndarray

        """
        p1, p2 = np.broadcast_arrays(np.asarray(p1, dtype=float), np.asarray(p2, dtype=float))
        t1 = 1j * self.scattering_gradient(p1, p2)
        t2 = -1j * np.conj(self.scattering_gradient(p2, p1))
        g = t1 + t2
        if not self.form_factor.coincident:
            flat1 = p1.reshape(-1, 3)
            flat2 = p2.reshape(-1, 3)
            t3 = np.array([self._double_pole_term(a, b) for a, b in zip(flat1, flat2)])
            g = g + t3.reshape(g.shape)
        return CHARGE * g

    def _double_pole_term(self, p1, p2):
        """i∫δΨ*_{p1}(p)∇δΨ_{p2}(p) d³p by angular reduction and pole integrals"""
        ff = self.form_factor
        eps = self.epsilon
        s1, s2 = np.linalg.norm(p1), np.linalg.norm(p2)
        a2 = (s2 - 1j * eps) ** 2
        b2 = (s1 + 1j * eps) ** 2
        pre = ((2 * self.gamma) ** 2 * ff.value(p1) * np.conj(ff.value(p2))
               / (np.conj(1 - self.on_shell_a(s1, 1)) * (1 - self.on_shell_a(s2, 1))))

        def u1(p):
            shift, direction = ff.angular_vectors(p)
            rad = ff.radial(p)
            return p**2 * (shift * rad**2 + rad * ff.radial_derivative_over_p(p) * p * direction)

        def u2(p):
            _, direction = ff.angular_vectors(p)
            return p**2 * p * ff.radial(p) ** 2 * direction

        def integral(f, q2, order):
            return pole_integral(f, np.sqrt(complex(q2)), order=order, p_max=self.p_max)

        d = a2 - b2
        term_a = (integral(u1, a2, 1) - integral(u1, b2, 1)) / d
        term_b = integral(u2, a2, 2) / d - (integral(u2, a2, 1) - integral(u2, b2, 1)) / d**2
        return 1j * pre * (term_a - 2 * term_b)


def kappa_of_separation(lam, separation, tol=1e-14, max_iter=100):
    """Positive root of κ = λ(1 + exp(−κR)) by Newton iteration

    :param float lam: Delta strength λ (inverse length)
    :param float separation: Centre separation R ≥ 0

    :return: κ
    :rtype: float

    """
    if lam <= 0 or separation < 0:
        raise DomainError('Need lambda > 0 and R >= 0')
    kappa = 2 * lam if separation == 0 else lam * (1 + np.exp(-lam * separation))
    for _ in range(max_iter):
        e = np.exp(-kappa * separation)
        f = kappa - lam * (1 + e)
        df = 1 + lam * separation * e
        step = f / df
        kappa -= step
        if abs(step) < tol * max(1.0, kappa):
            return float(kappa)
    raise NonConvergenceError('kappa iteration did not converge', lam=lam, separation=separation)


def dipole_1d(target, p):
    """d(p) = −2i𝒩 p cos(pR/2)/(p² + κ²)², terms ∝ R dropped

    :param DoubleDeltaTarget1D target: The target
    :param p: Scalar momenta along the molecular axis

    :return: Complex dipole values
    :rtype: numpy.ndarray

    """
    p = np.asarray(p)
    return -2j * target.norm * p * np.cos(p * target.separation / 2) / (p**2 + target.kappa**2) ** 2


@attr.s(eq=False)
class DoubleDeltaTarget1D:
    """Two attractive delta wells of strength λ separated by R along ``axis``

    :param float lam: Strength λ (a.u., inverse length)
    :param float separation: R (a.u.)
    :param int axis: Cartesian index of the molecular axis
    :param float epsilon: Pole regularization ε
    :param bool drop_r_terms: Drop form-factor derivatives ∝ R in g

    """
    lam = attr.ib(converter=float)
    separation = attr.ib(default=0.0, converter=float)
    axis = attr.ib(default=2, converter=int)
    epsilon = attr.ib(default=1e-3, converter=float)
    drop_r_terms = attr.ib(default=True)

    dimension = 1

    def __attrs_post_init__(self):

        self.kappa = kappa_of_separation(self.lam, self.separation)
        self.ip = self.kappa**2 / 2
        e = np.exp(-self.kappa * self.separation)
        self.norm = np.sqrt(4 * self.kappa**3 / (np.pi * (1 + e * (1 + self.kappa * self.separation))))
        self.gamma = self.lam / np.pi
        self.unit = np.eye(3)[self.axis]

    def with_separation(self, separation):
        """Copy of the target at another separation"""
        return DoubleDeltaTarget1D(self.lam, separation, self.axis, self.epsilon, self.drop_r_terms)

    def project(self, p):
        return np.asarray(p)[..., self.axis]

    def form_factor(self, k):
        return np.cos(np.asarray(k) * self.separation / 2)

    def a_function(self, k):
        """A₁(k) = λ(1 + exp(−kR))/k, so A₁(κ) = 1"""
        k = np.asarray(k, dtype=complex)
        return self.lam * (1 + np.exp(-k * self.separation)) / k

    def bound_wavefunction(self, p):
        k = self.project(p)
        return self.norm * self.form_factor(k) / (k**2 + self.kappa**2)

    def dipole(self, p):
        """e·d(p) along the molecular axis, shape (..., 3)"""
        return CHARGE * dipole_1d(self, self.project(p))[..., None] * self.unit

    def _scattering_derivative(self, k, k0):
        s0 = np.abs(k0)
        c = s0 - 1j * self.epsilon
        den = k**2 - c**2
        pre = 2 * self.gamma * self.form_factor(k0) / (1 - self.a_function(1j * s0 + self.epsilon))
        value = -2 * k * self.form_factor(k) / den**2
        if not self.drop_r_terms:
            value = value - self.separation / 2 * np.sin(k * self.separation / 2) / den
        return pre * value

    def scattering_correction(self, p, p0):
        k, k0 = self.project(p), self.project(p0)
        s0 = np.abs(k0)
        c = s0 - 1j * self.epsilon
        pre = 2 * self.gamma * self.form_factor(k0) / (1 - self.a_function(1j * s0 + self.epsilon))
        return pre * self.form_factor(k) / (k**2 - c**2)

    def rescatter_g(self, p1, p2):
        """e[i∂δΨ_{k2}(k1) − i∂δΨ*_{k1}(k2)] along the axis; the integral term
        vanishes by parity"""
        k1, k2 = np.broadcast_arrays(self.project(p1), self.project(p2))
        g = 1j * self._scattering_derivative(k1, k2) - 1j * np.conj(self._scattering_derivative(k2, k1))
        return CHARGE * g[..., None] * self.unit


def grid_matrix_element(integrand, p_max=8.0, n_radial=600, n_polar=32, n_azimuth=32):
    """Brute-force ∫ f(p) d³p on a spherical product grid

    Used to cross-check the closed forms.

    :param callable integrand: f(p) with p of shape (..., 3) returning (...) or (..., 3)
    :param float p_max: Radial cut
    :param int n_radial: Gauss-Legendre points in |p|
    :param int n_polar: Gauss-Legendre points in cos θ
    :param int n_azimuth: Uniform points in φ

    :return: The integral
    :rtype: complex or numpy.ndarray

    """
    r, wr = np.polynomial.legendre.leggauss(n_radial)
    r = (r + 1) * p_max / 2
    wr = wr * p_max / 2
    x, wx = np.polynomial.legendre.leggauss(n_polar)
    az = np.arange(n_azimuth) * 2 * np.pi / n_azimuth
    waz = np.full(n_azimuth, 2 * np.pi / n_azimuth)
    sin_t = np.sqrt(1 - x**2)
    dirs = np.stack([sin_t[:, None] * np.cos(az)[None, :],
                     sin_t[:, None] * np.sin(az)[None, :],
                     np.broadcast_to(x[:, None], (n_polar, n_azimuth))], axis=-1)
    total = 0
    for ri, wi in zip(r, wr):
        values = np.asarray(integrand(ri * dirs))
        weights = wi * ri**2 * wx[:, None] * waz[None, :]
        if values.ndim == 3:
            total = total + np.einsum('ij,ijk->k', weights, values)
        else:
            total = total + np.sum(weights * values)
    return total
