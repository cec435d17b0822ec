import unittest
import warnings

import numpy as np

from sfakit.calculation_tools.errors import DomainError, GridMismatchError
from sfakit.main_modules import two_electron as te
from sfakit.main_modules.two_electron import ChannelAmplitudes, CorrelationMap, ExcitedLevel, TwoElectronModel
from sfakit.model_components.pulse import LaserPulse
from sfakit.model_components.targets import SeparableTarget

Z = np.array([0.0, 0.0, 1.0])


def make_model(v12=1.0, l=0, interaction='contact'):
    return TwoElectronModel(i2p=1.59, i1p=1.02, levels=[ExcitedLevel(0.5, l)], v12=v12, interaction=interaction,
                            screening=0.8)


def make_pulse(e0=0.1):
    return LaserPulse(e0=e0, omega=0.057, n_cycles=1, envelope='flat_monochromatic')


def make_amplitudes(n_channels=2, n=5, m=3, seed=7):
    rng = np.random.default_rng(seed)
    parallel = np.linspace(-1.0, 1.0, n)
    transverse = np.linspace(-0.5, 0.5, m)
    weights = rng.uniform(0.1, 1.0, m)
    values = {f'eta{c}': rng.normal(size=(n, n, m, m)) + 1j * rng.normal(size=(n, n, m, m))
              for c in range(n_channels)}
    return ChannelAmplitudes(parallel, transverse, weights, values)


class TestModel(unittest.TestCase):

    """Tests the energies and validation of the two-electron model"""

    def test_energies(self):
        """
        Test E₀, E₁₀ and the first binding energy
        """
        model = make_model()
        self.assertAlmostEqual(model.e0, -1.59)
        self.assertAlmostEqual(model.first_ip, 0.57)
        twice = TwoElectronModel(i2p=1.59, i1p=1.02, levels=[(0.5, 0)], ground_is_twice_ion=True)
        self.assertAlmostEqual(twice.e0, -2.04)
        self.assertAlmostEqual(twice.first_ip, 1.02)

    def test_level_validation(self):
        """
        Test that d levels and levels bound deeper than the ion are rejected
        """
        self.assertRaises(DomainError, ExcitedLevel, 0.5, 2)
        self.assertRaises(DomainError, TwoElectronModel, i2p=1.59, i1p=1.02, levels=[ExcitedLevel(1.2, 0)])
        self.assertRaises(DomainError, TwoElectronModel, i2p=1.0, i1p=1.02)
        self.assertRaises(DomainError, TwoElectronModel, i2p=1.59, i1p=1.02, delta=0.0)

    def test_unknown_channel(self):
        """
        Test that an unknown channel name raises DomainError
        """
        self.assertRaises(DomainError, make_model().level, 'eta3')


class TestKernels(unittest.TestCase):

    """Tests the closed-form matrix elements"""

    def test_s_level_form_factor_is_isotropic(self):
        """
        Test that the s-level transfer form factor depends on |q| only
        """
        model = make_model()
        level = model.levels[0]
        q = np.array([0.3, -0.4, 1.2])
        theta = 0.7
        rotation = np.array([[np.cos(theta), -np.sin(theta), 0.0], [np.sin(theta), np.cos(theta), 0.0],
                             [0.0, 0.0, 1.0]])
        first, _ = te.transfer_form_factor(model, level, q)
        second, _ = te.transfer_form_factor(model, level, rotation @ q)
        third, _ = te.transfer_form_factor(model, level, -q)
        self.assertAlmostEqual(first, second, places=14)
        self.assertAlmostEqual(first, third, places=14)

    def test_p_level_form_factor_is_odd(self):
        """
        Test that the p-level form factor changes sign with q
        """
        model = make_model(l=1)
        level = model.levels[0]
        q = np.array([0.2, 0.1, 0.5])
        first, _ = te.transfer_form_factor(model, level, q)
        second, _ = te.transfer_form_factor(model, level, -q)
        self.assertAlmostEqual(abs(first + second), 0.0, places=14)
        self.assertGreater(abs(first), 0.0)

    def test_excitation_kernel_matches_finite_differences(self):
        """
        Test g(p, p′, η) against central differences of the excitation potential
        """
        p = np.array([0.2, -0.1, 1.1])
        p2 = np.array([0.05, 0.3, 0.4])
        h = 1e-6
        for l, interaction in ((0, 'contact'), (1, 'contact'), (0, 'yukawa'), (1, 'yukawa')):
            model = make_model(l=l, interaction=interaction)
            level = model.levels[0]
            kernel = te.excitation_kernel_g(model, p, p2, level)
            numeric = np.array([(te.excitation_potential(model, p, p2 + h * e, level)
                                 - te.excitation_potential(model, p, p2 - h * e, level)) / (2 * h)
                                for e in np.eye(3)])
            np.testing.assert_allclose(kernel, te.CHARGE * numeric, rtol=1e-6, atol=1e-12)

    def test_impact_kernel_matches_finite_differences(self):
        """
        Test the EII dipole against central differences along k₁ + k₂
        """
        k1 = np.array([0.1, 0.2, 0.6])
        k2 = np.array([-0.2, 0.0, 0.3])
        k_ret = np.array([0.0, 0.1, 1.5])
        h = 1e-6
        for interaction in te.INTERACTIONS:
            model = make_model(interaction=interaction)
            kernel = te.impact_kernel_g(model, k1, k2, k_ret)
            numeric = np.array([(te.impact_potential(model, k1 + h * e, k2 + h * e, k_ret)
                                 - te.impact_potential(model, k1 - h * e, k2 - h * e, k_ret)) / (2 * h)
                                for e in np.eye(3)])
            np.testing.assert_allclose(kernel, 2 * te.CHARGE * numeric, rtol=1e-6, atol=1e-12)

    def test_kernels_vanish_without_interaction(self):
        """
        Test that v₁₂ = 0 switches both kernels off
        """
        model = make_model(v12=0.0)
        p = np.array([0.1, 0.0, 1.0])
        np.testing.assert_array_equal(te.excitation_kernel_g(model, p, 0.5 * p, model.levels[0]), np.zeros(3))
        np.testing.assert_array_equal(te.impact_kernel_g(model, p, -p, 2 * p), np.zeros(3))


class TestActions(unittest.TestCase):

    """Tests the RESI and EII actions"""

    def test_field_free_actions(self):
        """
        Test the three RESI actions and the EII action with A ≡ 0
        """
        model = make_model()
        level = model.levels[0]
        pulse = make_pulse(e0=0.0)
        p = np.array([0.0, 0.0, 0.4])
        p2 = np.array([0.1, 0.0, -0.2])
        k = np.array([0.0, 0.2, 0.3])
        t_ion, t_exc, t_tun, t_end = 10.0, 50.0, 70.0, 110.0
        s_b, s_c, s_d = te.resi_actions(model, pulse, p, p2, k, t_ion, t_exc, t_tun, level, t_end)
        self.assertAlmostEqual(s_b, (k @ k / 2 + model.first_ip) * (t_exc - t_ion), places=10)
        self.assertAlmostEqual(s_c, (p @ p / 2 + level.energy - model.e0) * (t_tun - t_exc), places=10)
        self.assertAlmostEqual(s_d, (p @ p / 2 + p2 @ p2 / 2 - model.e0) * (t_end - t_tun), places=10)
        expected = ((k @ k / 2 + model.first_ip) * (t_exc - t_ion)
                    + (p @ p / 2 + p2 @ p2 / 2 - model.e0) * (t_end - t_exc))
        self.assertAlmostEqual(te.eii_action(model, pulse, p, p2, k, t_ion, t_exc, t_end), expected, places=10)

    def test_reference_time(self):
        """
        Test the final-state time for flat and enveloped pulses
        """
        flat = make_pulse()
        self.assertAlmostEqual(te.reference_time(flat), 2 * flat.period)
        enveloped = LaserPulse(e0=0.1, omega=0.057, n_cycles=2)
        self.assertAlmostEqual(te.reference_time(enveloped), enveloped.duration)


class TestSaddles(unittest.TestCase):

    """Tests the RESI and EII saddle searches"""

    def test_recollision_saddles_satisfy_equations(self):
        """
        Test that every RESI recollision saddle has a residual below 1e-10
        """
        model = make_model()
        level = model.levels[0]
        pulse = make_pulse()
        p = 0.3 * Z
        with warnings.catch_warnings():
            warnings.simplefilter('ignore')
            terms = te.excitation_terms(model, pulse, p, level)
        self.assertGreater(len(terms), 0)
        for term in terms:
            self.assertLess(term.residual, 1e-10)
            self.assertGreater(term.t_ion.imag, 0.0)
            self.assertGreater(term.t_exc.real, term.t_ion.real)
            k_ion = term.k - pulse.drift(term.t_ion)
            k_exc = term.k - pulse.drift(term.t_exc)
            k_after = p - pulse.drift(term.t_exc)
            self.assertLess(abs(k_ion @ k_ion / 2 + model.first_ip), 1e-9)
            self.assertLess(abs(k_exc @ k_exc / 2 - k_after @ k_after / 2 - (level.energy - model.e10)), 1e-9)

    def test_tunnelling_times_are_roots(self):
        """
        Test that the second-electron tunnelling times solve their equation
        """
        pulse = make_pulse()
        p2 = -0.2 * Z
        times, norms = te.tunnelling_times(pulse, 0.5, p2)
        self.assertGreater(len(times), 0)
        for t in times:
            k = p2 - pulse.drift(t)
            self.assertLess(abs(k @ k / 2 + 0.5), 1e-9)
            self.assertGreater(t.imag, 0.0)

    def test_no_interaction_gives_zero_amplitudes(self):
        """
        Test that RESI and EII vanish for v₁₂ = 0
        """
        model = make_model(v12=0.0)
        pulse = make_pulse()
        with warnings.catch_warnings():
            warnings.simplefilter('ignore')
            resi = te.resi_amplitude(model, pulse, 0.3 * Z, -0.2 * Z)
            eii = te.eii_amplitude(model, pulse, 0.3 * Z, -0.2 * Z)
        self.assertEqual(resi, 0.0)
        self.assertEqual(eii, 0.0)

    def test_first_ionization_dipole_scales_resi(self):
        """
        Test that the RESI amplitude is linear in the first-ionization dipole
        """
        model = make_model()
        pulse = make_pulse()
        dipole = SeparableTarget(ip=model.first_ip).regular_dipole
        amplitudes = []
        for scale in (1.0, 2.5):
            model.first_dipole = lambda k, scale=scale: scale * dipole(k)
            with warnings.catch_warnings():
                warnings.simplefilter('ignore')
                amplitudes.append(te.resi_amplitude(model, pulse, 0.3 * Z, -0.2 * Z))
        self.assertGreater(abs(amplitudes[0]), 0.0)
        self.assertAlmostEqual(amplitudes[1] / amplitudes[0], 2.5, places=9)

    def test_unknown_mechanism(self):
        """
        Test that an unknown mechanism raises DomainError
        """
        self.assertRaises(DomainError, te.nsdi_amplitudes, make_model(), make_pulse(), [0.0], mechanism='ns')


class TestCorrelationMap(unittest.TestCase):

    """Tests the pathway sums over synthetic amplitudes"""

    def test_map_is_symmetric(self):
        """
        Test P(p∥, p∥′) = P(p∥′, p∥) for every combination of sums
        """
        amplitudes = make_amplitudes()
        for channel_sum in te.SUM_MODES:
            for symmetrization in te.SUM_MODES:
                result = te.correlation_map(amplitudes, channel_sum, symmetrization)
                np.testing.assert_allclose(result.values, result.values.T, rtol=1e-12)
                self.assertTrue(np.all(result.values >= 0))

    def test_single_channel_sums_agree(self):
        """
        Test that coherent and incoherent channel sums agree for one channel
        """
        amplitudes = make_amplitudes(n_channels=1)
        coherent = te.correlation_map(amplitudes, 'coherent', 'coherent')
        incoherent = te.correlation_map(amplitudes, 'incoherent', 'coherent')
        np.testing.assert_allclose(coherent.values, incoherent.values, rtol=1e-12)

    def test_channel_cross_term(self):
        """
        Test that coherent minus incoherent channel sums is the interference term
        """
        amplitudes = make_amplitudes(n_channels=2)
        coherent = te.correlation_map(amplitudes, 'coherent', 'coherent')
        incoherent = te.correlation_map(amplitudes, 'incoherent', 'coherent')
        first = amplitudes.values['eta0'] + amplitudes.exchange('eta0')
        second = amplitudes.values['eta1'] + amplitudes.exchange('eta1')
        w = amplitudes.weights
        cross = np.einsum('m,n,ijmn->ij', w, w, 2 * np.real(first * np.conj(second)))
        np.testing.assert_allclose(coherent.values - incoherent.values, cross, rtol=1e-10, atol=1e-10)

    def test_incoherent_symmetrization(self):
        """
        Test that the incoherent symmetrization adds |M|² and its transpose
        """
        amplitudes = make_amplitudes(n_channels=1)
        result = te.correlation_map(amplitudes, 'coherent', 'incoherent')
        direct = np.abs(amplitudes.values['eta0']) ** 2
        w = amplitudes.weights
        expected = np.einsum('m,n,ijmn->ij', w, w, direct)
        np.testing.assert_allclose(result.values, expected + expected.T, rtol=1e-12)

    def test_bad_inputs(self):
        """
        Test mode names, missing channels and mismatched shapes
        """
        amplitudes = make_amplitudes()
        self.assertRaises(DomainError, te.correlation_map, amplitudes, 'partial')
        self.assertRaises(GridMismatchError, te.correlation_map, amplitudes, channels=['eta5'])
        self.assertRaises(GridMismatchError, ChannelAmplitudes, [0.0, 1.0], [0.0], [1.0],
                          {'eta0': np.zeros((2, 2, 2, 2))})

    def test_negative_map_rejected(self):
        """
        Test that a negative probability raises DomainError
        """
        self.assertRaises(DomainError, CorrelationMap, [0.0, 1.0], -np.ones((2, 2)))

    def test_quadrant_masses(self):
        """
        Test the quadrant fractions of a uniform map with axis nodes left out
        """
        result = CorrelationMap([-1.0, 0.0, 1.0], np.ones((3, 3)))
        masses = result.quadrant_masses()
        for key in ('I', 'II', 'III', 'IV'):
            self.assertAlmostEqual(masses[key], 0.25)
        skewed = np.zeros((3, 3))
        skewed[2, 2] = 3.0
        skewed[0, 2] = 1.0
        masses = CorrelationMap([-1.0, 0.0, 1.0], skewed).quadrant_masses()
        self.assertAlmostEqual(masses['I'], 0.75)
        self.assertAlmostEqual(masses['II'], 0.25)

    def test_frame_columns(self):
        """
        Test the long-table export of a map
        """
        frame = CorrelationMap([-1.0, 1.0], np.arange(4.0).reshape(2, 2)).to_frame()
        self.assertEqual(list(frame.columns), ['p1_au', 'p2_au', 'prob'])
        self.assertEqual(len(frame), 4)
        self.assertAlmostEqual(frame['prob'].iloc[1], 1.0)

    def test_transverse_grid(self):
        """
        Test that the Gauss-Hermite weights integrate a Gaussian
        """
        model = make_model()
        pulse = make_pulse()
        nodes, weights = te.transverse_grid(model, pulse, 24)
        width = 0.3
        self.assertAlmostEqual(np.sum(weights * np.exp(-nodes**2 / width**2)), np.sqrt(np.pi) * width, places=6)
        self.assertRaises(DomainError, te.transverse_grid, model, make_pulse(e0=0.0))


if __name__ == '__main__':
    unittest.main()
