import unittest

import numpy as np

from sfakit.calculation_tools.errors import DomainError
from sfakit.main_modules import depletion
from sfakit.main_modules import molecule_dynamics as md
from sfakit.main_modules import sfa_single
from sfakit.model_components.nuclei import (GaussianWavepacket, HarmonicSurface, NucleiState,
                                            finite_difference_forces, propagate_wavepacket, wavepacket_overlap)
from sfakit.model_components.pulse import LaserPulse
from sfakit.model_components.targets import DoubleDeltaTarget1D, kappa_of_separation


class TestNuclearDynamics(unittest.TestCase):

    """Tests the classical nuclei"""

    def make_state(self, charge=1.0):
        return NucleiState.diatomic(2.0, charge=charge, soft_core=1.0)

    def test_state_validation(self):
        """
        Test masses, momenta and separations
        """
        self.assertRaises(DomainError, NucleiState.diatomic, 0.0)
        self.assertRaises(DomainError, NucleiState, np.zeros((2, 3)), masses=-1.0)
        self.assertRaises(DomainError, NucleiState, np.zeros((2, 3)), momenta=np.zeros((3, 3)))
        state = self.make_state()
        self.assertAlmostEqual(state.separation, 2.0)
        self.assertEqual(state.masses.shape, (2,))

    def test_uncharged_nuclei_stay_put(self):
        """
        Test that Z = 0 leaves R constant
        """
        times = np.linspace(0.0, 50.0, 101)
        trajectory = md.coulomb_explosion(self.make_state(charge=0.0), times)
        np.testing.assert_array_equal(trajectory.separation, np.full(101, 2.0))

    def test_energy_and_momentum_conservation(self):
        """
        Test the velocity-Verlet energy drift and the total momentum
        """
        times = np.linspace(0.0, 100.0, 2001)
        trajectory = md.coulomb_explosion(self.make_state(), times)
        self.assertLess(trajectory.energy_drift, 1e-6)
        self.assertLess(np.abs(trajectory.momenta[-1].sum(axis=0)).max(), 1e-12)
        self.assertGreater(trajectory.separation[-1], 2.0)
        self.assertTrue(np.all(np.diff(trajectory.separation) >= 0))

    def test_finite_difference_gradient_converges(self):
        """
        Test that halving ΔR at least halves the error of the E_el force
        """
        target = DoubleDeltaTarget1D(lam=1.0)
        energy = md.double_delta_energy(target)
        state = self.make_state()
        r = state.separation
        kappa = kappa_of_separation(1.0, r)
        e = np.exp(-kappa * r)
        dkappa = -kappa * e / (1 + r * e)
        exact = kappa * dkappa
        errors = []
        for delta_r in (0.2, 0.1):
            forces = finite_difference_forces(energy, state.positions, delta_r)
            errors.append(abs(forces[1, 2] - exact))
        self.assertLess(errors[1], errors[0] / 2)
        self.assertLess(errors[1], 1e-2 * abs(exact))


class TestQuenchTrack(unittest.TestCase):

    """Tests the binding energy and Berry rate along R(t)"""

    def test_frozen_track(self):
        """
        Test that a constant R gives a constant Iₚ and no Berry rate
        """
        target = DoubleDeltaTarget1D(lam=1.0, separation=2.0)
        times = np.linspace(0.0, 100.0, 11)
        track = md.quench_track(target, times, 2.0)
        self.assertTrue(track.frozen)
        np.testing.assert_allclose(track.ip, target.ip, rtol=1e-14)
        np.testing.assert_array_equal(track.berry_rate, np.zeros(11))
        self.assertEqual(list(track.to_frame().columns), ['t_au', 'R_au', 'ip_au', 'berry_rate'])

    def test_dissociation_reduces_ip_by_four(self):
        """
        Test Iₚ(end)/Iₚ(0) → 1/4 when the centres separate from R = 0
        """
        target = DoubleDeltaTarget1D(lam=1.0, separation=0.0)
        times = np.linspace(0.0, 300.0, 31)
        track = md.quench_track(target, times, np.linspace(0.0, 60.0, 31))
        self.assertAlmostEqual(track.ip[-1] / track.ip[0], 0.25, places=6)
        self.assertTrue(np.all(np.diff(track.ip) <= 0))

    def test_real_ground_state_has_no_berry_rate(self):
        """
        Test that φ_B vanishes for the real double-delta ground state
        """
        target = DoubleDeltaTarget1D(lam=1.0, separation=2.0)
        times = np.linspace(0.0, 50.0, 21)
        rate, _ = md.berry_rate(target, np.linspace(2.0, 4.0, 21), times)
        self.assertLess(np.abs(rate).max(), 1e-10)

    def test_ip_phase_integrates_ip(self):
        """
        Test that the phase of a constant Iₚ is Iₚ·t inside and beyond the track
        """
        target = DoubleDeltaTarget1D(lam=1.0, separation=2.0)
        track = md.quench_track(target, np.linspace(0.0, 10.0, 11), 2.0)
        np.testing.assert_allclose(track.ip_phase(np.array([0.0, 5.0, 12.0])), target.ip * np.array([0.0, 5.0, 12.0]),
                                   rtol=1e-12, atol=1e-12)


class TestQuenchedAmplitudes(unittest.TestCase):

    """Tests the SFA amplitudes along a quench track"""

    def make_setup(self, e0=0.05):
        target = DoubleDeltaTarget1D(lam=1.0, separation=2.0)
        pulse = LaserPulse(e0=e0, omega=0.057, n_cycles=1)
        times = sfa_single.default_time_grid(pulse, target.ip, p_max=0.5)
        track = md.quench_track(target, times, 2.0)
        momenta = np.array([[0.0, 0.0, 0.2], [0.0, 0.0, -0.4]])
        return target, pulse, times, track, momenta

    def test_frozen_track_reduces_to_single_electron(self):
        """
        Test that a frozen track reproduces b₀ exactly
        """
        target, pulse, times, track, momenta = self.make_setup()
        quenched = md.quenched_direct_amplitude(track, pulse, None, momenta, times=times)
        frozen = sfa_single.direct_amplitude(target, pulse, None, momenta, times=times)
        np.testing.assert_array_equal(quenched, frozen)

    def test_frozen_track_rescattering(self):
        """
        Test that a frozen track reproduces b₁ of the fixed molecule
        """
        target, pulse, times, track, momenta = self.make_setup(e0=0.03)
        quenched = md.quenched_rescattering_amplitude(track, pulse, None, momenta, times=times)
        frozen = sfa_single.rescattering_amplitude(target, pulse, None, momenta, times=times)
        np.testing.assert_allclose(quenched, frozen, rtol=1e-12, atol=1e-300)

    def test_time_dependent_target_at_constant_separation(self):
        """
        Test that the time-dependent matrix elements reduce to the frozen ones
        """
        target, pulse, times, track, momenta = self.make_setup()
        moving = sfa_single.direct_amplitude(md.QuenchedTarget(track), pulse, None, momenta, times=times)
        frozen = sfa_single.direct_amplitude(target, pulse, None, momenta, times=times)
        np.testing.assert_allclose(moving, frozen, rtol=1e-9)

    def test_zero_field_gives_zero(self):
        """
        Test that E ≡ 0 gives a vanishing quenched b₀
        """
        _, pulse, times, track, momenta = self.make_setup(e0=0.0)
        np.testing.assert_array_equal(md.quenched_direct_amplitude(track, pulse, None, momenta, times=times),
                                      np.zeros(2))

    def test_united_atom_local_equals_cross(self):
        """
        Test that R = 0 makes the local and cross HHG families coincide
        """
        target = DoubleDeltaTarget1D(lam=1.0, separation=0.0)
        pulse = LaserPulse(e0=0.05, omega=0.057, n_cycles=1)
        times = pulse.time_grid(n_points=161)
        track = md.quench_track(target, times, 0.0)
        result = md.quenched_hhg(track, pulse, None, times)
        np.testing.assert_allclose(result.local.values, result.cross.values, rtol=1e-10, atol=1e-14)
        np.testing.assert_allclose(result.total.values, result.local.values + result.cross.values, rtol=1e-12)
        self.assertGreater(np.max(np.abs(result.total.values[:, 2])), 0.0)


class TestSelfConsistentLoop(unittest.TestCase):

    """Tests the coupled nuclear and electronic steps"""

    def test_laser_off_reduces_to_nuclear_dynamics(self):
        """
        Test that without a field the loop follows the Coulomb explosion with E_el
        """
        target = DoubleDeltaTarget1D(lam=1.0)
        state = NucleiState.diatomic(2.0)
        pulse = LaserPulse(e0=0.0, omega=0.057, n_cycles=1)
        times = np.linspace(0.0, 40.0, 201)
        result = md.selfconsistent_loop(target, pulse, state, times)
        reference = md.coulomb_explosion(state, times, electronic=md.double_delta_energy(target))
        np.testing.assert_allclose(result.trajectory.positions, reference.positions, rtol=1e-12, atol=1e-14)
        np.testing.assert_array_equal(result.amplitude.values, np.ones(201))

    def test_weak_field_matches_decoupled_pipeline(self):
        """
        Test that with |a|² ≈ 1 the separation follows the decoupled run within 2%
        """
        target = DoubleDeltaTarget1D(lam=1.0)
        state = NucleiState.diatomic(2.0)
        pulse = LaserPulse(e0=0.01, omega=0.057, n_cycles=1)
        times = np.linspace(0.0, pulse.duration, 301)
        result = md.selfconsistent_loop(target, pulse, state, times)
        reference = md.coulomb_explosion(state, times, electronic=md.double_delta_energy(target))
        self.assertGreater(result.amplitude.final_population, 0.99)
        np.testing.assert_allclose(result.trajectory.separation, reference.separation, rtol=0.02)

    def make_frozen_run(self, mode):
        target = DoubleDeltaTarget1D(lam=1.0)
        state = NucleiState.diatomic(2.0, mass=1e12)
        pulse = LaserPulse(e0=0.05, omega=0.057, n_cycles=1)
        times = np.linspace(0.0, pulse.duration, 301)
        result = md.selfconsistent_loop(target, pulse, state, times, mode=mode, epsilon=1e-2)
        reference = depletion.sfa_depletion(target.with_separation(2.0), pulse, times, mode=mode, epsilon=1e-2)
        return result, reference

    def test_frozen_nuclei_follow_sfa_depletion(self):
        """
        Test that with frozen nuclei the loop reproduces the SFA depletion amplitude, phase included
        """
        for mode in ('markov', 'full'):
            result, reference = self.make_frozen_run(mode)
            self.assertEqual(result.amplitude.strategy, f'selfconsistent_{mode}')
            np.testing.assert_allclose(result.amplitude.values, reference.values, rtol=1e-6, atol=1e-9)
            self.assertGreater(np.max(np.abs(np.angle(result.amplitude.values))), 1e-6)

    def test_unknown_mode(self):
        """
        Test that only the markov and full steps are accepted
        """
        target = DoubleDeltaTarget1D(lam=1.0)
        pulse = LaserPulse(e0=0.05, omega=0.057, n_cycles=1)
        times = np.linspace(0.0, 10.0, 11)
        with self.assertRaises(DomainError):
            md.selfconsistent_loop(target, pulse, NucleiState.diatomic(2.0), times, mode='adk')
        with self.assertRaises(DomainError):
            md.selfconsistent_loop(target, pulse, NucleiState.diatomic(2.0), times, epsilon=0.0)


class TestAutocorrelation(unittest.TestCase):

    """Tests the Gaussian nuclear wavepackets"""

    def test_identical_packets(self):
        """
        Test that identical packets on the same surface overlap to one
        """
        packet = GaussianWavepacket.from_width(0.0, 0.2, mass=459.0)
        overlaps = md.autocorrelation_factor(packet, packet, np.linspace(0.0, 200.0, 5))
        np.testing.assert_allclose(overlaps, np.ones(5), atol=1e-8)

    def test_displaced_packets_follow_gaussian_law(self):
        """
        Test |⟨ξ₁|ξ₀⟩| = exp(−Δx²/4σ²)
        """
        sigma = 0.2
        for shift in (0.1, 0.3, 0.5):
            first = GaussianWavepacket.from_width(0.0, sigma)
            second = GaussianWavepacket.from_width(shift, sigma)
            self.assertAlmostEqual(abs(wavepacket_overlap(second, first)), np.exp(-shift**2 / (4 * sigma**2)),
                                   places=12)

    def test_free_spreading(self):
        """
        Test α(t) = α₀/(1 + 2α₀t/M) and the conserved norm
        """
        packet = GaussianWavepacket.from_width(0.0, 0.2, p=1.0, mass=100.0)
        times = np.array([0.0, 5.0, 10.0])
        packets = propagate_wavepacket(packet, HarmonicSurface(), times)
        for t, moved in zip(times, packets):
            expected = packet.alpha / (1 + 2 * packet.alpha * t / packet.mass)
            self.assertAlmostEqual(abs(moved.alpha - expected), 0.0, places=7)
            self.assertAlmostEqual(moved.q, t / packet.mass, places=7)
            self.assertAlmostEqual(moved.norm(), 1.0, places=7)

    def test_overlap_scales_the_hhg_dipole(self):
        """
        Test that a constant overlap c multiplies the HHG dipole by |c|²
        """
        target = DoubleDeltaTarget1D(lam=1.0)
        pulse = LaserPulse(e0=0.05, omega=0.057, n_cycles=1)
        times = pulse.time_grid(n_points=121)
        c = 0.6 * np.exp(0.4j)
        a = md.overlap_amplitude(None, np.full(121, c), times)
        scaled = sfa_single.hhg_dipole(target, pulse, a, times)
        plain = sfa_single.hhg_dipole(target, pulse, None, times)
        np.testing.assert_allclose(scaled.values, abs(c) ** 2 * plain.values, rtol=1e-10, atol=1e-16)

    def test_quench_overlaps_decay(self):
        """
        Test that the ionic packet starts on the neutral one and then separates
        """
        times = np.linspace(0.0, 300.0, 31)
        overlaps = md.quench_overlaps(NucleiState.diatomic(2.0), 0.2, times)
        self.assertAlmostEqual(abs(overlaps[0]), 1.0, places=8)
        self.assertTrue(np.all(np.diff(np.abs(overlaps)) <= 1e-12))
        self.assertLess(abs(overlaps[-1]), 0.99)

        neutral = md.quench_overlaps(NucleiState.diatomic(2.0, charge=0.0), 0.2, times)
        np.testing.assert_allclose(np.abs(neutral), 1.0, atol=1e-8)
        self.assertRaises(DomainError, md.quench_overlaps, NucleiState.diatomic(2.0), 0.0, times)


if __name__ == '__main__':
    unittest.main()
