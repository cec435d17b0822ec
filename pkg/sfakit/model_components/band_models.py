"""
Two-band crystal models for the semiconductor Bloch equations

Every model exposes the same interface on crystal momenta of shape
(..., dimension): ``valence``, ``conduction``, ``gap``, their group velocities,
the interband dipole d_cv(k) = i⟨u_c|∇u_v⟩ and the Berry-connection difference
ξ_g = ξ_c − ξ_v. Momenta live in the polarization plane; the first axis is the
major axis of the pulse.
"""
# Standard library imports
import logging

# Third party imports
import attr
import numpy as np
import pandas as pd
from scipy.interpolate import CubicSpline

# sfakit library imports
from sfakit.calculation_tools.errors import DomainError, OutputError

logger = logging.getLogger('SBELogger')

BAND_MODELS = ('tightbinding1d', 'haldane2d', 'tabulated')


def _dephasing(instance, attribute, value):
    if value is not None and not value > 0:
        raise DomainError('T2 must be positive (or None for no dephasing)')


@attr.s(eq=False)
class BandModel:
    """Common part of the band models

    :param float lattice: Lattice constant (a.u.)
    :param float t2: Dephasing time T2 (a.u.), None for T2 = ∞

    """
    lattice = attr.ib(converter=float)
    t2 = attr.ib(default=None, validator=_dephasing)

    dimension = 1

    @property
    def dephasing_rate(self):
        """1/T2, zero without dephasing"""
        return 0.0 if self.t2 is None or np.isinf(self.t2) else 1.0 / self.t2

    def _k(self, k):
        k = np.asarray(k, dtype=float)
        if k.shape[-1:] != (self.dimension,):
            raise DomainError(f'Crystal momenta of a {self.dimension}D model need a last axis of length '
                              f'{self.dimension}, got shape {k.shape}')
        return k

    def gap(self, k):
        """ε_g = ε_c − ε_v"""
        return self.conduction(k) - self.valence(k)

    def wrap(self, k):
        """Umklapp of k into the first Brillouin zone"""
        return self._k(k)

    def brillouin_zone(self, n_k):
        """Uniform grid of the first Brillouin zone and its quadrature weights

        :param int n_k: Points per reciprocal direction

        :return: (k_points of shape (M, dimension), weights of shape (M,))
        :rtype: tuple

        """
        raise NotImplementedError

    def max_gap(self, n_k=256):
        """Largest ε_g found on a dense zone grid"""
        points, _ = self.brillouin_zone(n_k)
        return float(np.max(self.gap(points)))

    def min_gap(self, n_k=256):
        points, _ = self.brillouin_zone(n_k)
        return float(np.min(self.gap(points)))


@attr.s(eq=False)
class TightBinding1D(BandModel):
    """Mirror-symmetric cosine bands ε_c = −ε_v = Δ/2 + t_h(1 − cos ka)

    so that ε_g = Δ + 2t_h(1 − cos ka), with a constant dipole and no Berry
    connection.

    :param float gap_min: Δ, the direct gap at k = 0 (a.u.)
    :param float hopping: t_h (a.u.)
    :param complex dipole_value: d_cv (a.u.)

    """
    gap_min = attr.ib(default=0.11, converter=float)
    hopping = attr.ib(default=0.02, converter=float)
    dipole_value = attr.ib(default=2.0, converter=complex)

    def __attrs_post_init__(self):

        if self.gap_min <= 0:
            raise DomainError('The band gap must be positive')
        if self.lattice <= 0:
            raise DomainError('The lattice constant must be positive')

    def conduction(self, k):
        k = self._k(k)[..., 0]
        return self.gap_min / 2 + self.hopping * (1 - np.cos(k * self.lattice))

    def valence(self, k):
        return -self.conduction(k)

    def conduction_velocity(self, k):
        k = self._k(k)
        return self.hopping * self.lattice * np.sin(k * self.lattice)

    def valence_velocity(self, k):
        return -self.conduction_velocity(k)

    def dipole(self, k):
        k = self._k(k)
        return np.full(k.shape, self.dipole_value, dtype=complex)

    def berry_gap(self, k):
        return np.zeros(self._k(k).shape)

    def wrap(self, k):
        k = self._k(k)
        g = 2 * np.pi / self.lattice
        return np.mod(k + g / 2, g) - g / 2

    def brillouin_zone(self, n_k):
        if n_k < 2:
            raise DomainError('At least two k points are required')
        fractions = np.arange(n_k) / n_k - 0.5
        points = (2 * np.pi / self.lattice * fractions)[:, None]
        return points, np.full(n_k, 2 * np.pi / self.lattice / n_k)


# Honeycomb geometry in units of the nearest-neighbour distance
_NN = np.array([[0.0, 1.0], [-np.sqrt(3) / 2, -0.5], [np.sqrt(3) / 2, -0.5]])
_NNN = np.array([_NN[1] - _NN[2], _NN[2] - _NN[0], _NN[0] - _NN[1]])
_RECIPROCAL = 2 * np.pi * np.array([[1 / np.sqrt(3), -1 / 3], [0.0, 2 / 3]])


@attr.s(eq=False)
class HaldaneModel(BandModel):
    """Haldane model on the honeycomb lattice, H(k) = d₀ + d·σ with

        d₀ = 2t₂ cos ϕ Σ cos(k·b_i)
        d_x + i d_y = t₁ Σ exp(ik·a_i)
        d_z = M − 2t₂ sin ϕ Σ sin(k·b_i)

    a_i are the nearest-neighbour and b_i the next-nearest-neighbour vectors.
    Dipole and Berry connection are taken in the gauge
    u_c = (cos θ/2, e^{iφ} sin θ/2), u_v = (sin θ/2, −e^{iφ} cos θ/2), giving

        ξ_g = cos θ ∇φ,    d_cv = (i/2)∇θ + (1/2) sin θ ∇φ

    The gauge is singular where d_x = d_y = 0 (the Dirac points), so zone grids
    must avoid them. ``t2 = 0`` is gapped graphene; |M| < 3√3|t₂ sin ϕ| is the
    topological phase.

    :param float hopping: t₁ (a.u.)
    :param float mass: Sublattice potential M (a.u.)
    :param float nnn_hopping: t₂ (a.u.)
    :param float phi: Haldane flux phase ϕ (rad)
    :param float orientation: Rotation of the lattice against the major polarization axis (rad)

    """
    hopping = attr.ib(default=0.02, converter=float)
    mass = attr.ib(default=0.02, converter=float)
    nnn_hopping = attr.ib(default=0.005, converter=float)
    phi = attr.ib(default=np.pi / 2, converter=float)
    orientation = attr.ib(default=0.0, converter=float)

    dimension = 2

    def __attrs_post_init__(self):

        if self.lattice <= 0:
            raise DomainError('The lattice constant must be positive')
        if self.hopping == 0:
            raise DomainError('The Haldane model needs a nonzero nearest-neighbour hopping')

    @property
    def topological(self):
        return abs(self.mass) < 3 * np.sqrt(3) * abs(self.nnn_hopping * np.sin(self.phi))

    @property
    def _rotation(self):
        c, s = np.cos(self.orientation), np.sin(self.orientation)
        return np.array([[c, -s], [s, c]])

    def _vectors(self, k):
        k = self._k(k)
        nn = _NN @ self._rotation.T * self.lattice
        nnn = _NNN @ self._rotation.T * self.lattice
        return k @ nn.T, k @ nnn.T, nn, nnn

    def _hamiltonian(self, k):
        """d₀, d and their k-gradients"""
        ka, kb, nn, nnn = self._vectors(k)
        t1, t2, phi = self.hopping, self.nnn_hopping, self.phi
        d0 = 2 * t2 * np.cos(phi) * np.sum(np.cos(kb), axis=-1)
        dx = t1 * np.sum(np.cos(ka), axis=-1)
        dy = t1 * np.sum(np.sin(ka), axis=-1)
        dz = self.mass - 2 * t2 * np.sin(phi) * np.sum(np.sin(kb), axis=-1)
        grad_d0 = -2 * t2 * np.cos(phi) * (np.sin(kb) @ nnn)
        grad_dx = -t1 * (np.sin(ka) @ nn)
        grad_dy = t1 * (np.cos(ka) @ nn)
        grad_dz = -2 * t2 * np.sin(phi) * (np.cos(kb) @ nnn)
        return d0, (dx, dy, dz), grad_d0, (grad_dx, grad_dy, grad_dz)

    def _angles(self, k):
        """cos θ, sin θ, ∇θ, ∇φ of the d-vector"""
        _, (dx, dy, dz), _, (gx, gy, gz) = self._hamiltonian(k)
        rho2 = dx**2 + dy**2
        rho = np.sqrt(rho2)
        r2 = rho2 + dz**2
        grad_phi = (dx[..., None] * gy - dy[..., None] * gx) / rho2[..., None]
        grad_rho = (dx[..., None] * gx + dy[..., None] * gy) / rho[..., None]
        grad_theta = (dz[..., None] * grad_rho - rho[..., None] * gz) / r2[..., None]
        r = np.sqrt(r2)
        return dz / r, rho / r, grad_theta, grad_phi

    def conduction(self, k):
        d0, d, _, _ = self._hamiltonian(k)
        return d0 + np.sqrt(sum(c**2 for c in d))

    def valence(self, k):
        d0, d, _, _ = self._hamiltonian(k)
        return d0 - np.sqrt(sum(c**2 for c in d))

    def _radial_velocity(self, k):
        d0, d, grad_d0, grads = self._hamiltonian(k)
        r = np.sqrt(sum(c**2 for c in d))
        return grad_d0, sum(c[..., None] * g for c, g in zip(d, grads)) / r[..., None]

    def conduction_velocity(self, k):
        grad_d0, grad_r = self._radial_velocity(k)
        return grad_d0 + grad_r

    def valence_velocity(self, k):
        grad_d0, grad_r = self._radial_velocity(k)
        return grad_d0 - grad_r

    def dipole(self, k):
        _, sin_theta, grad_theta, grad_phi = self._angles(k)
        return 0.5j * grad_theta + 0.5 * sin_theta[..., None] * grad_phi

    def berry_gap(self, k):
        cos_theta, _, _, grad_phi = self._angles(k)
        return cos_theta[..., None] * grad_phi

    def brillouin_zone(self, n_k):
        if n_k < 2:
            raise DomainError('At least two k points per direction are required')
        if n_k % 3 == 0:
            raise DomainError('Zone grids with n_k divisible by 3 contain the Dirac points')
        fractions = np.arange(n_k) / n_k
        f1, f2 = np.meshgrid(fractions, fractions, indexing='ij')
        reciprocal = _RECIPROCAL @ self._rotation.T / self.lattice
        points = f1.reshape(-1, 1) * reciprocal[0] + f2.reshape(-1, 1) * reciprocal[1]
        area = abs(np.linalg.det(reciprocal))
        return points, np.full(n_k * n_k, area / n_k**2)


@attr.s(eq=False)
class TabulatedBands1D(BandModel):
    """One-dimensional bands interpolated from a table over one zone

    Periodic cubic splines through the tabulated ε_v, ε_c, d_cv and ξ_g give
    the bands anywhere; velocities are the spline derivatives.

    :param numpy.ndarray k: Increasing crystal momenta covering [−π/a, π/a)
    :param numpy.ndarray valence: ε_v at k
    :param numpy.ndarray conduction: ε_c at k
    :param numpy.ndarray dipole: Complex d_cv at k
    :param numpy.ndarray berry: ξ_g at k (zero when omitted)

    """
    k = attr.ib(default=None, converter=np.asarray)
    valence_values = attr.ib(default=None, converter=np.asarray)
    conduction_values = attr.ib(default=None, converter=np.asarray)
    dipole_values = attr.ib(default=None, converter=np.asarray)
    berry_values = attr.ib(default=None)

    def __attrs_post_init__(self):

        n = len(self.k)
        if n < 4:
            raise DomainError('A band table needs at least four rows')
        g = 2 * np.pi / self.lattice
        if np.any(np.diff(self.k) <= 0) or self.k[-1] - self.k[0] >= g:
            raise DomainError('Tabulated k must increase and span less than one reciprocal vector')
        berry = np.zeros(n) if self.berry_values is None else np.asarray(self.berry_values, dtype=float)
        dipole = np.asarray(self.dipole_values, dtype=complex)
        table = np.column_stack([self.valence_values, self.conduction_values, dipole.real, dipole.imag, berry])
        if np.any(table[:, 1] - table[:, 0] <= 0):
            raise DomainError('The tabulated conduction band must lie above the valence band everywhere')
        nodes = np.append(self.k, self.k[0] + g)
        self._spline = CubicSpline(nodes, np.vstack([table, table[:1]]), axis=0, bc_type='periodic')
        self._slope = self._spline.derivative()

    @classmethod
    def from_csv(cls, path, lattice, t2=None):
        """Reads columns k_au, eps_v_au, eps_c_au, d_re, d_im and optionally xi_g

        :param str path: CSV file
        :param float lattice: Lattice constant (a.u.)
        :param float t2: Dephasing time

        :return: The model
        :rtype: TabulatedBands1D

        """
        try:
            table = pd.read_csv(path, comment='#')
        except OSError as exc:
            raise OutputError(f'Cannot read the band table {path}: {exc}') from exc
        missing = {'k_au', 'eps_v_au', 'eps_c_au', 'd_re'} - set(table.columns)
        if missing:
            raise DomainError(f'Band table {path} lacks the columns {sorted(missing)}')
        table = table.sort_values('k_au')
        dipole = table['d_re'].to_numpy() + 1j * table.get('d_im', 0.0 * table['d_re']).to_numpy()
        berry = table['xi_g'].to_numpy() if 'xi_g' in table.columns else None
        logger.info(f'Read {len(table)} band rows from {path}')
        return cls(lattice=lattice, t2=t2, k=table['k_au'].to_numpy(), valence_values=table['eps_v_au'].to_numpy(),
                   conduction_values=table['eps_c_au'].to_numpy(), dipole_values=dipole, berry_values=berry)

    def wrap(self, k):
        k = self._k(k)
        g = 2 * np.pi / self.lattice
        return self.k[0] + np.mod(k - self.k[0], g)

    def _values(self, k, column):
        return self._spline(self.wrap(k)[..., 0])[..., column]

    def valence(self, k):
        return self._values(k, 0)

    def conduction(self, k):
        return self._values(k, 1)

    def valence_velocity(self, k):
        return self._slope(self.wrap(k)[..., 0])[..., 0][..., None]

    def conduction_velocity(self, k):
        return self._slope(self.wrap(k)[..., 0])[..., 1][..., None]

    def dipole(self, k):
        values = self._spline(self.wrap(k)[..., 0])
        return (values[..., 2] + 1j * values[..., 3])[..., None]

    def berry_gap(self, k):
        return self._values(k, 4)[..., None]

    def brillouin_zone(self, n_k):
        if n_k < 2:
            raise DomainError('At least two k points are required')
        fractions = np.arange(n_k) / n_k - 0.5
        points = (2 * np.pi / self.lattice * fractions)[:, None]
        return points, np.full(n_k, 2 * np.pi / self.lattice / n_k)


def tabulate(model, n_k, path=None):
    """Samples a 1D model into the table format read by :meth:`TabulatedBands1D.from_csv`

    :param BandModel model: A one-dimensional model
    :param int n_k: Number of rows
    :param str path: Optional CSV destination

    :return: The table
    :rtype: pandas.DataFrame

    """
    if model.dimension != 1:
        raise DomainError('Only one-dimensional models can be tabulated')
    points, _ = model.brillouin_zone(n_k)
    dipole = model.dipole(points)[:, 0]
    table = pd.DataFrame({'k_au': points[:, 0], 'eps_v_au': model.valence(points),
                          'eps_c_au': model.conduction(points), 'd_re': dipole.real, 'd_im': dipole.imag,
                          'xi_g': model.berry_gap(points)[:, 0]})
    if path is not None:
        table.to_csv(path, index=False, float_format='%.17g')
    return table
