"""
Classical nuclei and Gaussian nuclear wavepackets

The nuclei move on the soft-core Coulomb repulsion

    V(R₁..R_N) = Σ_{i<j} Z̃_i Z̃_j / √(|R_i − R_j|² + a²)

optionally plus an electronic energy E_el(R₁..R_N). Nuclear wavepackets are
Gaussians ξ(x) = exp(iα(x − q)² + ip(x − q) + iγ) propagated along a locally
harmonic potential.
"""
# Standard library imports
import logging

# Third party imports
import attr
import numpy as np
from scipy.integrate import solve_ivp

# sfakit library imports
from sfakit.calculation_tools.errors import DomainError, NonConvergenceError

logger = logging.getLogger('MoleculeLogger')


def _as_matrix(value):
    value = np.atleast_2d(np.asarray(value, dtype=float))
    if value.shape[-1] == 1:
        value = value * np.array([0.0, 0.0, 1.0])
    return value


@attr.s(eq=False)
class NucleiState:
    """Positions and momenta of N classical nuclei

    :param numpy.ndarray positions: R_i, shape (N, 3)
    :param numpy.ndarray momenta: P_i, shape (N, 3)
    :param numpy.ndarray masses: M_i (a.u.)
    :param numpy.ndarray charges: Effective charges Z̃_i
    :param float soft_core: Smoothing length a (a.u.)

    """
    positions = attr.ib(converter=_as_matrix)
    momenta = attr.ib(default=None)
    masses = attr.ib(default=918.076)
    charges = attr.ib(default=1.0)
    soft_core = attr.ib(default=1.0, converter=float)

    def __attrs_post_init__(self):

        n = len(self.positions)
        self.momenta = np.zeros((n, 3)) if self.momenta is None else _as_matrix(self.momenta)
        self.masses = np.broadcast_to(np.asarray(self.masses, dtype=float), (n,)).copy()
        self.charges = np.broadcast_to(np.asarray(self.charges, dtype=float), (n,)).copy()
        if self.momenta.shape != self.positions.shape:
            raise DomainError('One momentum per nucleus is required')
        if np.any(self.masses <= 0):
            raise DomainError('Nuclear masses must be positive')
        if self.soft_core < 0:
            raise DomainError('The soft-core length cannot be negative')

    @classmethod
    def diatomic(cls, separation, mass=918.076, charge=1.0, soft_core=1.0, axis=2):
        """Two nuclei at rest at ±R/2 along ``axis``"""
        if separation <= 0:
            raise DomainError('The separation must be positive')
        unit = np.eye(3)[axis]
        positions = np.array([-separation / 2 * unit, separation / 2 * unit])
        return cls(positions=positions, masses=mass, charges=charge, soft_core=soft_core)

    def copy(self):
        return NucleiState(self.positions.copy(), self.momenta.copy(), self.masses.copy(), self.charges.copy(),
                           self.soft_core)

    @property
    def separation(self):
        """|R₂ − R₁| of the first two nuclei"""
        return float(np.linalg.norm(self.positions[1] - self.positions[0]))

    @property
    def total_momentum(self):
        return self.momenta.sum(axis=0)

    def kinetic_energy(self):
        return float(np.sum(self.momenta**2 / (2 * self.masses[:, None])))


def soft_core_potential(state, positions=None):
    """Σ_{i<j} Z̃_i Z̃_j / √(r_ij² + a²)"""
    positions = state.positions if positions is None else positions
    diff = positions[:, None, :] - positions[None, :, :]
    dist = np.sqrt(np.sum(diff**2, axis=-1) + state.soft_core**2)
    zz = state.charges[:, None] * state.charges[None, :]
    upper = np.triu_indices(len(positions), 1)
    return float(np.sum(zz[upper] / dist[upper]))


def soft_core_forces(state, positions=None):
    """−∇V of the soft-core repulsion, shape (N, 3)"""
    positions = state.positions if positions is None else positions
    diff = positions[:, None, :] - positions[None, :, :]
    dist2 = np.sum(diff**2, axis=-1) + state.soft_core**2
    zz = state.charges[:, None] * state.charges[None, :]
    np.fill_diagonal(zz, 0.0)
    return np.sum((zz / dist2**1.5)[..., None] * diff, axis=1)


def finite_difference_forces(energy, positions, delta_r=1e-3):
    """−∇E by central ±ΔR differences in every nuclear coordinate

    :param callable energy: E(positions) for positions of shape (N, 3)
    :param numpy.ndarray positions: Where to differentiate
    :param float delta_r: ΔR (a.u.)

    :return: Forces, shape (N, 3)
    :rtype: numpy.ndarray

    """
    forces = np.zeros(positions.shape)
    for index in np.ndindex(positions.shape):
        up = positions.copy()
        down = positions.copy()
        up[index] += delta_r
        down[index] -= delta_r
        forces[index] = -(energy(up) - energy(down)) / (2 * delta_r)
    return forces


def velocity_verlet_step(state, dt, force):
    """Advances ``state`` in place by one velocity-Verlet step

    :param NucleiState state: The nuclei
    :param float dt: Time step
    :param callable force: F(positions) returning (N, 3)

    """
    state.momenta = state.momenta + dt / 2 * force(state.positions)
    state.positions = state.positions + dt * state.momenta / state.masses[:, None]
    state.momenta = state.momenta + dt / 2 * force(state.positions)


@attr.s(eq=False)
class GaussianWavepacket:
    """ξ(x) = exp(iα(x − q)² + ip(x − q) + iγ) along one nuclear coordinate

    :param complex alpha: Width parameter with Im α > 0
    :param float q: Centre
    :param float p: Mean momentum
    :param complex gamma: Phase and normalization
    :param float mass: Mass of the coordinate

    """
    alpha = attr.ib(converter=complex)
    q = attr.ib(converter=float)
    p = attr.ib(default=0.0, converter=float)
    gamma = attr.ib(default=None)
    mass = attr.ib(default=459.038, converter=float)

    def __attrs_post_init__(self):

        if self.alpha.imag <= 0:
            raise DomainError('A Gaussian wavepacket needs Im(alpha) > 0')
        if self.gamma is None:
            self.gamma = 0.25j * np.log(np.pi / (2 * self.alpha.imag))
        self.gamma = complex(self.gamma)

    @classmethod
    def from_width(cls, q, sigma, p=0.0, mass=459.038):
        """Normalized packet with |ξ| ∝ exp(−(x − q)²/2σ²)"""
        return cls(alpha=0.5j / sigma**2, q=q, p=p, mass=mass)

    @property
    def width(self):
        """σ of |ξ|"""
        return float(np.sqrt(1 / (2 * self.alpha.imag)))

    def __call__(self, x):
        x = np.asarray(x)
        return np.exp(1j * self.alpha * (x - self.q) ** 2 + 1j * self.p * (x - self.q) + 1j * self.gamma)

    def norm(self):
        """∫|ξ|² dx"""
        return float(np.sqrt(np.pi / (2 * self.alpha.imag)) * np.exp(-2 * self.gamma.imag))


@attr.s(frozen=True)
class HarmonicSurface:
    """Locally harmonic potential V(x) = v0 + f·(x − x0) + k(x − x0)²/2 seen by a wavepacket

    ``k = 0`` and ``f = 0`` give free motion.
    """
    v0 = attr.ib(default=0.0, converter=float)
    f = attr.ib(default=0.0, converter=float)
    k = attr.ib(default=0.0, converter=float)
    x0 = attr.ib(default=0.0, converter=float)

    def value(self, x):
        return self.v0 + self.f * (x - self.x0) + self.k * (x - self.x0) ** 2 / 2

    def slope(self, x):
        return self.f + self.k * (x - self.x0)


def propagate_wavepacket(packet, surface, times, rtol=1e-10, atol=1e-12):
    """Gaussian wavepacket dynamics on a locally harmonic surface

    α̇ = −2α²/M − V″/2, q̇ = p/M, ṗ = −V′(q), γ̇ = iα/M + pq̇ − (p²/2M + V(q))

    :param GaussianWavepacket packet: State at times[0]
    :param HarmonicSurface surface: The potential
    :param numpy.ndarray times: Output times

    :return: One packet per time
    :rtype: list

    """
    times = np.asarray(times, dtype=float)
    mass = packet.mass

    def rhs(t, y):
        alpha, q, p, gamma = y
        q_dot = p / mass
        return np.array([-2 * alpha**2 / mass - surface.k / 2,
                         q_dot,
                         -surface.slope(q.real),
                         1j * alpha / mass + p * q_dot - (p**2 / (2 * mass) + surface.value(q.real))], dtype=complex)

    y0 = np.array([packet.alpha, packet.q, packet.p, packet.gamma], dtype=complex)
    if len(times) == 1:
        return [packet]
    sol = solve_ivp(rhs, (times[0], times[-1]), y0, method='DOP853', t_eval=times, rtol=rtol, atol=atol)
    if not sol.success:
        raise NonConvergenceError(f'Wavepacket propagation failed: {sol.message}')
    return [GaussianWavepacket(alpha=a, q=q.real, p=p.real, gamma=g, mass=mass) for a, q, p, g in sol.y.T]


def wavepacket_overlap(first, second):
    """⟨first|second⟩ in closed form"""
    a = 1j * (np.conj(first.alpha) - second.alpha)
    b = (2j * np.conj(first.alpha) * first.q - 2j * second.alpha * second.q - 1j * first.p + 1j * second.p)
    c = (-1j * np.conj(first.alpha) * first.q**2 + 1j * second.alpha * second.q**2 + 1j * first.p * first.q
         - 1j * second.p * second.q + 1j * (second.gamma - np.conj(first.gamma)))
    return complex(np.sqrt(np.pi / a) * np.exp(b**2 / (4 * a) + c))
