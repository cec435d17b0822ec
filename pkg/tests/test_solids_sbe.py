import os
import tempfile
import unittest

import numpy as np

from sfakit.calculation_tools.errors import DomainError, GridMismatchError, StepCriterionError
from sfakit.calculation_tools.parallel import WorkerPool
from sfakit.main_modules import solids_sbe as sbe
from sfakit.main_modules.sfa_single import DipoleSeries, harmonic_spectrum
from sfakit.model_components.band_models import HaldaneModel, TabulatedBands1D, TightBinding1D, tabulate
from sfakit.model_components.pulse import LaserPulse
from sfakit.model_components.targets import CHARGE


def make_model(**kwargs):
    options = dict(lattice=8.0, gap_min=0.11, hopping=0.02, dipole_value=2.0, t2=None)
    options.update(kwargs)
    return TightBinding1D(**options)


def make_pulse(e0=0.003, omega=0.014, n_cycles=2):
    return LaserPulse(e0=e0, omega=omega, n_cycles=n_cycles)


def band_power(spectrum, values, order, half_width=0.5):
    keep = np.abs(spectrum.order - order) <= half_width
    return np.sum(values[keep])


class TestBandModels(unittest.TestCase):

    """Tests the crystal models"""

    def test_tight_binding_bands(self):
        """
        Test ε_g = Δ + 2t_h(1 − cos ka) and the group velocities
        """
        model = make_model()
        k = np.linspace(-0.3, 0.3, 7)[:, None]
        np.testing.assert_allclose(model.gap(k), 0.11 + 0.04 * (1 - np.cos(8.0 * k[:, 0])), rtol=1e-14)
        np.testing.assert_allclose(model.conduction_velocity(k)[:, 0], 0.16 * np.sin(8.0 * k[:, 0]), rtol=1e-14)
        self.assertAlmostEqual(model.max_gap(), 0.19, places=12)
        self.assertEqual(model.dipole(k).shape, (7, 1))
        self.assertRaises(DomainError, model.gap, np.zeros((3, 2)))
        self.assertRaises(DomainError, make_model, t2=-1.0)

    def test_zone_grid(self):
        """
        Test the zone grid is symmetric and integrates the zone volume
        """
        model = make_model()
        points, weights = model.brillouin_zone(16)
        self.assertAlmostEqual(np.sum(weights), 2 * np.pi / 8.0, places=14)
        self.assertEqual(points[8, 0], 0.0)
        np.testing.assert_allclose(np.sort(-points[1:, 0]), np.sort(points[1:, 0]), atol=1e-15)

    def test_tabulated_bands_reproduce_the_model(self):
        """
        Test that a tabulated tight-binding model is reproduced by the periodic spline
        """
        model = make_model()
        with tempfile.TemporaryDirectory() as folder:
            path = os.path.join(folder, 'bands.csv')
            tabulate(model, 64, path)
            table = TabulatedBands1D.from_csv(path, lattice=8.0)
        k = np.linspace(-0.39, 0.39, 11)[:, None]
        np.testing.assert_allclose(table.gap(k), model.gap(k), atol=1e-6)
        np.testing.assert_allclose(table.conduction_velocity(k), model.conduction_velocity(k), atol=1e-4)
        np.testing.assert_allclose(table.gap(k + 2 * np.pi / 8.0), table.gap(k), atol=1e-12)
        np.testing.assert_allclose(table.dipole(k), model.dipole(k), atol=1e-12)

    def test_haldane_velocities(self):
        """
        Test the Haldane group velocities against finite differences of the bands
        """
        model = HaldaneModel(lattice=2.68)
        k = np.array([[0.3, -0.2], [0.1, 0.7], [-0.5, 0.4]])
        h = 1e-6
        for band, velocity in ((model.conduction, model.conduction_velocity),
                               (model.valence, model.valence_velocity)):
            numeric = np.column_stack([(band(k + h * e) - band(k - h * e)) / (2 * h) for e in np.eye(2)])
            np.testing.assert_allclose(velocity(k), numeric, atol=1e-7)

    def test_haldane_phases(self):
        """
        Test the topological flag, a positive gap and the Dirac-point grid check
        """
        self.assertTrue(HaldaneModel(lattice=2.68).topological)
        self.assertFalse(HaldaneModel(lattice=2.68, nnn_hopping=0.0).topological)
        self.assertGreater(HaldaneModel(lattice=2.68).min_gap(n_k=64), 0.0)
        self.assertRaises(DomainError, HaldaneModel(lattice=2.68).brillouin_zone, 12)
        _, weights = HaldaneModel(lattice=2.68).brillouin_zone(10)
        self.assertAlmostEqual(np.sum(weights), (2 * np.pi / 2.68) ** 2 * 2 / (3 * np.sqrt(3)), places=12)


class TestBlochEquations(unittest.TestCase):

    """Tests the RK4 integration of the two-band equations"""

    def test_zero_field_keeps_initial_state(self):
        """
        Test that E ≡ 0 leaves n_c = 0 and π = 0
        """
        trajectory = sbe.integrate_sbe(make_model(), make_pulse(e0=0.0), 16, 0.5)
        np.testing.assert_array_equal(trajectory.w, -np.ones(trajectory.w.shape))
        np.testing.assert_array_equal(trajectory.pi, np.zeros(trajectory.pi.shape))
        np.testing.assert_array_equal(trajectory.n_v + trajectory.n_c, np.ones(trajectory.w.shape))

    def test_bloch_length_is_conserved(self):
        """
        Test that w² + 4|π|² stays constant without dephasing
        """
        trajectory = sbe.integrate_sbe(make_model(), make_pulse(), 32, 0.1)
        self.assertGreater(np.max(np.abs(trajectory.pi)), 1e-3)
        self.assertLess(trajectory.bloch_drift, 1e-8)
        state = trajectory.state(-1)
        np.testing.assert_allclose(state.n_v + state.n_c, 1.0, rtol=0, atol=1e-15)

    def test_dephasing_shortens_the_bloch_vector(self):
        """
        Test that a finite T2 only ever shortens the Bloch vector
        """
        trajectory = sbe.integrate_sbe(make_model(t2=41.34), make_pulse(), 32, 0.5)
        self.assertLessEqual(np.max(trajectory.bloch_length), 1.0 + 1e-10)
        self.assertLess(np.min(trajectory.bloch_length[-1]), 1.0 - 1e-8)

    def test_weak_field_excitation_is_quadratic(self):
        """
        Test that halving E₀ divides the final n_c by four
        """
        model = make_model()
        final = []
        for e0 in (2e-4, 1e-4):
            pulse = make_pulse(e0=e0, omega=0.15, n_cycles=10)
            final.append(sbe.integrate_sbe(model, pulse, 32, 0.25).excitation[-1])
        self.assertGreater(final[1], 0.0)
        self.assertAlmostEqual(final[0] / final[1], 4.0, delta=0.2)

    def test_step_criterion(self):
        """
        Test that a coarse step is refused with a suggested step
        """
        model = make_model()
        pulse = make_pulse()
        with self.assertRaises(StepCriterionError) as context:
            sbe.integrate_sbe(model, pulse, 16, 2.0)
        self.assertAlmostEqual(context.exception.suggested_dt, 2 * np.pi / 0.19 / 20, places=9)
        self.assertAlmostEqual(sbe.step_limit(model, pulse), 2 * np.pi / 0.19 / 20, places=9)

    def test_parallel_blocks_match_serial(self):
        """
        Test that splitting the zone into blocks does not change the result
        """
        model = make_model()
        pulse = make_pulse(n_cycles=1)
        serial = sbe.integrate_sbe(model, pulse, 16, 0.5)
        with WorkerPool(2) as pool:
            blocked = sbe.integrate_sbe(model, pulse, 16, 0.5, pool=pool, chunk=5)
        np.testing.assert_array_equal(blocked.pi, serial.pi)


class TestCurrents(unittest.TestCase):

    """Tests the intraband and interband currents"""

    def make_seed(self, pulse, n_c=0.01, n_k=16):
        """Trajectory with one excited node at K = 0"""
        model = make_model()
        times = sbe.sbe_time_grid(pulse, 0.5)
        points, weights = model.brillouin_zone(n_k)
        w = -np.ones((len(times), n_k))
        w[:, n_k // 2] = 2 * n_c - 1
        drift = sbe.plane_components(pulse, pulse.drift(times), 1)
        trajectory = sbe.SBETrajectory(times=times, k_points=points, weights=weights, drift=drift, w=w,
                                       pi=np.zeros(w.shape, dtype=complex))
        return model, trajectory

    def test_filled_valence_band_carries_no_current(self):
        """
        Test that an empty conduction band gives zero intra and interband currents
        """
        model = make_model()
        trajectory = sbe.integrate_sbe(model, make_pulse(e0=0.0), 16, 0.5)
        self.assertLess(np.max(np.abs(sbe.intraband_current(model, trajectory))), 1e-14)
        np.testing.assert_array_equal(sbe.interband_current(model, trajectory), np.zeros((len(trajectory.times), 2)))

    def test_bloch_oscillation_of_a_seed(self):
        """
        Test J_ra = e n_c ΔK 2t_h a sin(−D(t)a) for a single excited node
        """
        pulse = make_pulse(e0=0.01)
        model, trajectory = self.make_seed(pulse)
        current = sbe.intraband_current(model, trajectory)
        expected = CHARGE * 0.01 * trajectory.weights[8] * 0.32 * np.sin(-trajectory.drift[:, 0] * 8.0)
        np.testing.assert_allclose(current[:, 0], expected, rtol=0, atol=1e-14)
        np.testing.assert_array_equal(current[:, 1], np.zeros(len(current)))
        t = trajectory.times[100]
        np.testing.assert_array_equal(sbe.intraband_current(model, trajectory, t), current[100])
        self.assertRaises(DomainError, sbe.intraband_current, model, trajectory, t + 0.1)

    def test_anharmonic_band_emits_odd_harmonics(self):
        """
        Test that Bloch oscillations in a cosine band emit the fifth harmonic and no fourth
        """
        pulse = make_pulse(e0=3 * 0.014 / 8.0, n_cycles=10)
        model, trajectory = self.make_seed(pulse)
        current = sbe.intraband_current(model, trajectory)
        spectrum = harmonic_spectrum(DipoleSeries(times=trajectory.times, values=current), pulse.omega)
        fifth = np.max(spectrum.intensity[np.abs(spectrum.order - 5) <= 0.3])
        fourth = spectrum.intensity[np.argmin(np.abs(spectrum.order - 4))]
        self.assertGreater(fifth, 100 * fourth)

    def test_peaks_do_not_move_with_the_window(self):
        """
        Test that harmonic peaks stay within one bin between the hann and flat windows
        """
        pulse = make_pulse(e0=3 * 0.014 / 8.0, n_cycles=10)
        model, trajectory = self.make_seed(pulse)
        current = sbe.intraband_current(model, trajectory)
        zero = np.zeros(current.shape)
        peaks = []
        for window in ('hann', 'none'):
            spectrum = sbe.solid_harmonic_spectrum(trajectory.times, current, zero, pulse.omega, window=window)
            peaks.append([int(np.argmax(np.where(np.abs(spectrum.order - n) <= 0.5, spectrum.intra, 0.0)))
                          for n in (1, 3, 5)])
        for hann_peak, flat_peak in zip(*peaks):
            self.assertLessEqual(abs(hann_peak - flat_peak), 1)

    def test_interband_current_is_real(self):
        """
        Test that the interband current is real for both derivative schemes
        """
        model = make_model()
        trajectory = sbe.integrate_sbe(model, make_pulse(n_cycles=1), 16, 0.5)
        for derivative in sbe.DERIVATIVES:
            current = sbe.interband_current(model, trajectory, derivative=derivative)
            self.assertFalse(np.iscomplexobj(current))
            self.assertGreater(np.max(np.abs(current[:, 0])), 0.0)
        self.assertRaises(DomainError, sbe.interband_current, model, trajectory, 'forward')

    def test_time_derivative(self):
        """
        Test the spectral and centred derivatives of a periodic signal
        """
        times = np.linspace(0.0, 2 * np.pi, 256, endpoint=False)
        values = np.sin(3 * times)[:, None]
        np.testing.assert_allclose(sbe.time_derivative(times, values), 3 * np.cos(3 * times)[:, None], atol=1e-10)
        np.testing.assert_allclose(sbe.time_derivative(times, values, 'central'), 3 * np.cos(3 * times)[:, None],
                                   atol=2e-2)


class TestSolidSpectrum(unittest.TestCase):

    """Tests the harmonic spectra of the two currents"""

    def test_zero_currents(self):
        """
        Test that zero currents give zero spectra
        """
        times = np.linspace(0.0, 100.0, 201)
        zero = np.zeros((201, 2))
        spectrum = sbe.solid_harmonic_spectrum(times, zero, zero, 0.057)
        np.testing.assert_array_equal(spectrum.total, np.zeros(len(spectrum.order)))
        self.assertEqual(list(spectrum.to_frame().columns), ['harmonic_order', 'intra', 'inter', 'total'])

    def test_total_is_coherent(self):
        """
        Test total = |FFT(J_ra + J_er)|² rather than the sum of the parts
        """
        times = np.linspace(0.0, 110.0, 401)
        intra = np.column_stack([np.cos(0.057 * times), np.zeros(401)])
        spectrum = sbe.solid_harmonic_spectrum(times, intra, 0.5 * intra, 0.057)
        np.testing.assert_allclose(spectrum.total, 2.25 * spectrum.intra, rtol=1e-9, atol=1e-9 * np.max(spectrum.total))
        self.assertFalse(np.allclose(spectrum.total, spectrum.intra + spectrum.inter))

    def test_grid_mismatch(self):
        """
        Test that currents on different grids are refused
        """
        times = np.linspace(0.0, 100.0, 201)
        self.assertRaises(GridMismatchError, sbe.solid_harmonic_spectrum, times, np.zeros((201, 2)),
                          np.zeros((200, 2)), 0.057)

    def test_currents_frame(self):
        """
        Test the column layout of the current table
        """
        times = np.linspace(0.0, 1.0, 3)
        frame = sbe.currents_frame(times, np.zeros((3, 2)), np.ones((3, 2)))
        self.assertEqual(list(frame.columns), ['t_au', 'Jra_x', 'Jra_y', 'Jer_x', 'Jer_y'])
        self.assertEqual(frame['Jer_y'].iloc[-1], 1.0)


class TestSFAInterbandCurrent(unittest.TestCase):

    """Tests the electron-hole SFA current"""

    def test_zero_dipole(self):
        """
        Test that d_cv ≡ 0 gives no current
        """
        times, current = sbe.sfa_interband_current(make_model(dipole_value=0.0), make_pulse(), 16, 0.5)
        np.testing.assert_array_equal(current, np.zeros((len(times), 2)))

    def test_agrees_with_the_bloch_equations(self):
        """
        Test the SFA interband spectrum against the SBE one at low excitation
        """
        model = make_model()
        pulse = make_pulse()
        trajectory = sbe.integrate_sbe(model, pulse, 32, 0.5)
        self.assertLess(np.max(trajectory.excitation), 0.01)
        times, sfa = sbe.sfa_interband_current(model, pulse, 32, 0.5)
        np.testing.assert_allclose(times, trajectory.times)
        exact = sbe.interband_current(model, trajectory)
        zero = np.zeros(exact.shape)
        sfa_spectrum = sbe.solid_harmonic_spectrum(times, zero, sfa, pulse.omega)
        sbe_spectrum = sbe.solid_harmonic_spectrum(times, zero, exact, pulse.omega)
        for order in (1, 3, 5, 7, 9):
            ratio = band_power(sfa_spectrum, sfa_spectrum.inter, order) / band_power(sbe_spectrum,
                                                                                     sbe_spectrum.inter, order)
            self.assertTrue(0.5 < ratio < 2.0, f'order {order}: ratio {ratio}')

    def test_berry_curvature_rotates_the_polarization(self):
        """
        Test that the broken mirror of the topological model gives a perpendicular current
        """
        pulse = make_pulse(e0=0.002)
        ratios = []
        for nnn_hopping in (0.0, 0.005):
            model = HaldaneModel(lattice=2.68, hopping=0.02, mass=0.02, nnn_hopping=nnn_hopping,
                                 orientation=np.pi / 2)
            times, current = sbe.sfa_interband_current(model, pulse, 20, 0.5)
            zero = np.zeros(current.shape)
            ratios.append(sbe.solid_harmonic_spectrum(times, zero, current, pulse.omega).polarization_ratio())
        self.assertLess(ratios[0], 1e-12)
        self.assertGreater(ratios[1], 1e-3)


if __name__ == '__main__':
    unittest.main()
