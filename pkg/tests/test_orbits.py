import unittest
import warnings

import numpy as np

from sfakit.calculation_tools.errors import NoClassicalReturnError
from sfakit.main_modules import orbits, sfa_single
from sfakit.main_modules.orbits import QuantumOrbit
from sfakit.main_modules.sfa_single import action
from sfakit.model_components.pulse import LaserPulse
from sfakit.model_components.targets import DoubleDeltaTarget1D

HELIUM_IP = 0.9


class LinearDipoleTarget:

    """1D target along z with d(k) = k, regular at the tunnelling saddles"""

    dimension = 1
    ip = 0.5
    unit = np.array([0.0, 0.0, 1.0])

    def dipole(self, p):
        return np.asarray(p)[..., 2:3] * self.unit


class TestQuantumOrbits(unittest.TestCase):

    """Tests the saddle equations and their solutions"""

    def make_pulse(self):
        return LaserPulse(e0=0.0755, omega=0.057, n_cycles=1, envelope='flat_monochromatic')

    def make_orbits(self):
        pulse = self.make_pulse()
        omega = HELIUM_IP + 1.6 * pulse.ponderomotive_energy()
        with warnings.catch_warnings():
            warnings.simplefilter('ignore')
            found = orbits.solve_saddles(pulse, HELIUM_IP, omega)
        return pulse, omega, found

    def test_jacobian_matches_finite_differences(self):
        """
        Test the analytic Jacobian against central differences
        """
        pulse = self.make_pulse()
        x = np.array([[20.0 + 5.0j, 70.0 + 1.0j]])
        jac = orbits.saddle_jacobian(pulse, x)[0]
        h = 1e-5
        for j in range(2):
            step = np.zeros((1, 2), dtype=complex)
            step[0, j] = h
            numeric = (orbits.saddle_residual(pulse, HELIUM_IP, 1.0, x + step)
                       - orbits.saddle_residual(pulse, HELIUM_IP, 1.0, x - step))[0] / (2 * h)
            np.testing.assert_allclose(jac[:, j], numeric, rtol=1e-6, atol=1e-9)

    def test_hessian_matches_finite_differences(self):
        """
        Test the second derivatives of S − Ωt over (p, t′, t)
        """
        pulse = self.make_pulse()
        omega = 1.5
        v0 = np.array([0.1, -0.2, 0.3, 20.0 + 5.0j, 70.0 + 1.0j])

        def phase(v):
            return action(pulse, HELIUM_IP, v[:3], v[4], v[3]) - omega * v[4]

        matrix = orbits.hessian_matrix(pulse, v0[3], v0[4], v0[:3])
        h = 1e-3
        for i in range(5):
            for j in range(5):
                ei = np.eye(5)[i] * h
                ej = np.eye(5)[j] * h
                numeric = (phase(v0 + ei + ej) - phase(v0 + ei - ej) - phase(v0 - ei + ej)
                           + phase(v0 - ei - ej)) / (4 * h**2)
                self.assertAlmostEqual(abs(matrix[i, j] - numeric), 0.0, places=4)

    def test_orbits_satisfy_saddle_equations(self):
        """
        Test that stored orbits have small residuals and Im t′ > 0
        """
        pulse, omega, found = self.make_orbits()
        self.assertGreaterEqual(len(found), 2)
        for orbit in found:
            self.assertLess(orbit.residual, 1e-10)
            self.assertGreater(orbit.t_ion.imag, 0.0)
            x = orbit.times[None, :]
            residual = orbits.saddle_residual(pulse, HELIUM_IP, omega - HELIUM_IP, x)
            self.assertLess(np.abs(residual).max(), 1e-10)

    def test_short_and_long_pair_found(self):
        """
        Test that a short and a long orbit are found in the plateau
        """
        _, _, found = self.make_orbits()
        labels = {orbit.label for orbit in found}
        self.assertIn('short', labels)
        self.assertIn('long', labels)

    def test_half_cycle_symmetry(self):
        """
        Test that shifting an orbit by T/2 with p → −p gives another solution
        """
        pulse, _, found = self.make_orbits()
        orbit = found[0]
        partner = orbits.half_cycle_partner(orbit, pulse, HELIUM_IP)
        self.assertLess(partner.residual, 1e-8)
        np.testing.assert_allclose(partner.p_s, -orbit.p_s, atol=1e-8)

    def test_continuation_keeps_converged_orbits(self):
        """
        Test that tracked orbits remain solutions along the Ω grid
        """
        pulse = self.make_pulse()
        up = pulse.ponderomotive_energy()
        omegas = HELIUM_IP + np.linspace(1.2, 2.0, 5) * up
        with warnings.catch_warnings():
            warnings.simplefilter('ignore')
            tracks = orbits.continuation(pulse, HELIUM_IP, omegas)
        self.assertGreater(len(tracks), 0)
        for track in tracks:
            present = [o for o in track.orbits if o is not None]
            self.assertGreater(len(present), 0)
            for orbit in present:
                self.assertLess(orbit.residual, 1e-10)


class TestClassification(unittest.TestCase):

    """Tests the orbit labels"""

    def make_orbit(self, t_ion, t_rec):
        return QuantumOrbit(t_ion=t_ion, t_rec=t_rec, p_s=np.zeros(3), action=0j, hessian=1.0, omega=1.0)

    def test_labels_by_excursion(self):
        """
        Test short, long and higher-return labels from the excursion time
        """
        pulse = LaserPulse(e0=0.05, omega=0.057, n_cycles=1, envelope='flat_monochromatic')
        period = pulse.period
        self.assertEqual(orbits.classify(self.make_orbit(1j, 0.4 * period), pulse), 'short')
        self.assertEqual(orbits.classify(self.make_orbit(1j, 0.9 * period), pulse), 'long')
        self.assertEqual(orbits.classify(self.make_orbit(1j, 1.5 * period), pulse), 'higher_return(1)')
        self.assertEqual(orbits.classify(self.make_orbit(1j, 2.2 * period), pulse), 'higher_return(2)')

    def test_pair_labels_follow_excursion_order(self):
        """
        Test that the smaller excursion of a pair is labelled short
        """
        pulse = LaserPulse(e0=0.05, omega=0.057, n_cycles=1, envelope='flat_monochromatic')
        period = pulse.period
        pair = [self.make_orbit(0.1 * period + 1j, 0.8 * period), self.make_orbit(0.1 * period + 1j, 0.85 * period)]
        orbits.label_pairs(pair, pulse)
        self.assertEqual([o.label for o in pair], ['short', 'long'])

    def test_labels_invariant_under_cep_shift(self):
        """
        Test that a 2π shift of the CEP leaves the labels unchanged
        """
        first = LaserPulse(e0=0.05, omega=0.057, n_cycles=1, envelope='flat_monochromatic')
        second = LaserPulse(e0=0.05, omega=0.057, n_cycles=1, envelope='flat_monochromatic', cep=2 * np.pi)
        orbit = self.make_orbit(1j, 0.7 * first.period)
        self.assertEqual(orbits.classify(orbit, first), orbits.classify(orbit, second))

    def test_no_orbits_give_zero_dipole(self):
        """
        Test that the SPA sum over no orbits vanishes
        """
        pulse = LaserPulse(e0=0.05, omega=0.057, n_cycles=1, envelope='flat_monochromatic')
        target = DoubleDeltaTarget1D(lam=1.0)
        np.testing.assert_array_equal(orbits.spa_dipole([], target, pulse), np.zeros(3))


class TestSpaDipole(unittest.TestCase):

    """Tests the saddle-point harmonic dipole against direct quadrature"""

    SAMPLES = 1024

    def make_pulse(self):
        return LaserPulse(e0=0.0755, omega=0.057, n_cycles=1, envelope='flat_monochromatic')

    def quadrature_harmonics(self, target, pulse, orders):
        """One-period Fourier integral of the steady-state dipole with excursions below one period"""
        times = np.linspace(0.0, 2 * pulse.period, 2 * self.SAMPLES, endpoint=False)
        dt = times[1] - times[0]
        series = sfa_single.hhg_dipole(target, pulse, None, times, max_excursion=pulse.period - dt / 2)
        x = series.values[self.SAMPLES:, 2]
        t = times[self.SAMPLES:]
        return np.array([np.sum(x * np.exp(-1j * q * pulse.omega * t)) * dt for q in orders])

    def spa_harmonics(self, target, pulse, orders):
        values = []
        for q in orders:
            with warnings.catch_warnings():
                warnings.simplefilter('ignore')
                found = orbits.solve_saddles(pulse, target.ip, q * pulse.omega)
            first = [o for o in found if o.excursion < pulse.period]
            self.assertGreaterEqual(len(first), 2)
            values.append(orbits.spa_dipole(first, target, pulse)[2])
        return np.array(values)

    def test_plateau_matches_quadrature(self):
        """
        Test that the SPA dipole reproduces the quadrature plateau intensity
        """
        target = LinearDipoleTarget()
        pulse = self.make_pulse()
        orders = np.arange(19, 28, 2)
        quadrature = np.abs(self.quadrature_harmonics(target, pulse, orders)) ** 2
        spa = np.abs(self.spa_harmonics(target, pulse, orders)) ** 2 / 4
        self.assertTrue(np.all(np.isfinite(spa)))
        ratio = np.mean(spa) / np.mean(quadrature)
        self.assertGreater(ratio, 0.5)
        self.assertLess(ratio, 2.0)

    def test_spectrum_sums_tracked_families(self):
        """
        Test that the SPA spectrum is |Σ d̃|² over the tracked orbit families
        """
        target = LinearDipoleTarget()
        pulse = self.make_pulse()
        up = pulse.ponderomotive_energy()
        omegas = target.ip + np.linspace(1.2, 2.0, 5) * up
        with warnings.catch_warnings():
            warnings.simplefilter('ignore')
            tracks = orbits.continuation(pulse, target.ip, omegas)
            result, intensity, contributions = orbits.spa_spectrum(tracks, target, pulse)
        np.testing.assert_array_equal(result, omegas)
        self.assertEqual(len(contributions), len(tracks))
        expected = np.zeros((len(omegas), 3), dtype=complex)
        for track in tracks:
            for i, orbit in enumerate(track.orbits):
                if orbit is not None:
                    expected[i] += orbits.spa_dipole([orbit], target, pulse)
        np.testing.assert_allclose(intensity, np.sum(np.abs(expected) ** 2, axis=-1), rtol=1e-12)
        self.assertGreater(intensity.max(), 0.0)


class TestClassicalReturns(unittest.TestCase):

    """Tests the simple-man scan"""

    def test_cutoff_law(self):
        """
        Test that the maximum return energy is 3.17 Up
        """
        pulse = LaserPulse(e0=0.05, omega=0.057, n_cycles=3, envelope='flat_monochromatic')
        ratio, birth, ret = orbits.classical_return_scan(pulse)
        self.assertAlmostEqual(ratio, 3.17, delta=0.01)
        self.assertGreater(ret, birth)

    def test_zero_field_has_no_returns(self):
        """
        Test that a vanishing field raises NoClassicalReturnError
        """
        pulse = LaserPulse(e0=0.0, omega=0.057, n_cycles=3, envelope='flat_monochromatic')
        self.assertRaises(NoClassicalReturnError, orbits.classical_return_scan, pulse)


if __name__ == '__main__':
    unittest.main()
