import json
from pathlib import Path
import tempfile
import unittest
from unittest import mock

from sfakit.general_settings.variable_names import VariableNames
from sfakit.input_output.config import validate_config
from sfakit.input_output.sfakit_io import file_hash, read_csv
from sfakit.main_modules import sfa_single
from sfakit.main_modules.run_job import MANIFEST, run_job

_var = VariableNames()

SOLID = {
    'pulse': {'e0_au': 0.003, 'omega_au': 0.014, 'n_cycles': 2},
    'model': {'model': 'tightbinding1d'},
    'numerics': {'n_k': 16},
}

ATI = {
    'pulse': {'e0_au': 0.05, 'omega_au': 0.057, 'n_cycles': 1},
    'target': {'kind': 'doubledelta1d', 'lambda_au': 1.0},
    'numerics': {'n_p': 6, 'p_max_au': 0.5, 'rescattering': False},
}

ORBITS = {
    'pulse': {'e0_au': 0.0755, 'omega_au': 0.057, 'n_cycles': 1, 'envelope': 'flat_monochromatic'},
    'target': {'kind': 'doubledelta1d', 'lambda_au': 0.45 ** 0.5},
    'numerics': {'n_omega': 5},
}


class TestRunJob(unittest.TestCase):

    """Tests whole runs from a validated config to the manifest"""

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def make_config(self, raw, kind, name, **run):
        raw = {section: dict(values) for section, values in raw.items()}
        raw['run'] = dict(out=str(self.tmp / name), **run)
        return validate_config(raw, kind=kind)

    def read_manifest(self, name):
        return json.loads((self.tmp / name / MANIFEST).read_text())

    def test_solid_run(self):
        """
        Test the tables, plot script and manifest of a tight-binding run
        """
        manifest = run_job(self.make_config(SOLID, 'solid', 'solid'))
        self.assertTrue(manifest.ok)
        self.assertEqual(manifest.exit_code, 0)
        out = self.tmp / 'solid'

        currents = read_csv(out / 'sbe_currents.csv')
        self.assertEqual(list(currents.columns), [_var.time] + _var.currents)
        spectrum = read_csv(out / 'solid_spectrum.csv')
        self.assertEqual(list(spectrum.columns), [_var.harmonic_order, _var.intra, _var.inter, _var.total])
        self.assertTrue((out / 'sbe_currents.csv').read_text().startswith('# units: t_au [a.u.]'))
        self.assertNotIn('polarization_ratio', manifest.summary)

        source = (out / 'plot_solid.py').read_text()
        compile(source, 'plot_solid.py', 'exec')
        self.assertIn("load('solid_spectrum.csv')", source)

        content = self.read_manifest('solid')
        self.assertEqual(content['kind'], 'solid')
        self.assertIsNone(content['failure'])
        self.assertEqual(content['config']['numerics']['n_k'], 16)
        self.assertEqual(content['grids']['n_k_points'], 16)
        records = {record['path']: record for record in content['files']}
        self.assertEqual(set(records), {'sbe_currents.csv', 'solid_spectrum.csv', 'plot_solid.py'})
        self.assertEqual(records['solid_spectrum.csv']['sha256'], file_hash(out / 'solid_spectrum.csv'))

    def test_runs_are_reproducible(self):
        """
        Test that two runs of one config write identical files
        """
        first = run_job(self.make_config(SOLID, 'solid', 'first'))
        second = run_job(self.make_config(SOLID, 'solid', 'second'))
        self.assertEqual([(f['path'], f['sha256']) for f in first.files],
                         [(f['path'], f['sha256']) for f in second.files])

    def test_threads_do_not_change_results(self):
        """
        Test that a threaded run hashes like the serial one
        """
        serial = run_job(self.make_config(SOLID, 'solid', 'serial'))
        threaded = run_job(self.make_config(SOLID, 'solid', 'threaded', threads=3))
        self.assertEqual(threaded.threads, 3)
        self.assertEqual([f['sha256'] for f in serial.files], [f['sha256'] for f in threaded.files])

    def test_ati_without_rescattering(self):
        """
        Test that a direct-only run has no b1 columns
        """
        manifest = run_job(self.make_config(ATI, 'ati', 'ati'))
        self.assertTrue(manifest.ok)
        table = read_csv(self.tmp / 'ati' / 'ati_spectrum.csv')
        self.assertEqual(list(table.columns),
                         [_var.momentum, _var.polar_angle, _var.b0_re, _var.b0_im, _var.total_prob])
        self.assertEqual(len(table), 6)
        self.assertFalse(manifest.summary['rescattering'])
        compile((self.tmp / 'ati' / 'plot_ati.py').read_text(), 'plot_ati.py', 'exec')

    def test_failure_moves_outputs_to_partial(self):
        """
        Test that a refinement failure keeps the written tables under partial/
        """
        raw = dict(ATI, depletion={'strategy': 'adk_envelope'})
        raw['numerics'] = dict(ATI['numerics'], max_phase_per_step=1e-4)
        manifest = run_job(self.make_config(raw, 'ati', 'failed'))
        self.assertFalse(manifest.ok)
        self.assertEqual(manifest.exit_code, 3)
        self.assertEqual(manifest.failure['type'], 'RefinementError')

        out = self.tmp / 'failed'
        self.assertFalse((out / 'amplitude.csv').exists())
        self.assertTrue((out / 'partial' / 'amplitude.csv').exists())
        self.assertFalse((out / 'plot_ati.py').exists())
        content = self.read_manifest('failed')
        self.assertEqual(content['failure']['exit_code'], 3)
        self.assertEqual([record['path'] for record in content['files']], ['partial/amplitude.csv'])

    def test_memory_error_is_a_domain_failure(self):
        """
        Test that running out of memory fails the run with exit code 2
        """
        with mock.patch.object(sfa_single, 'direct_amplitude', side_effect=MemoryError()):
            manifest = run_job(self.make_config(ATI, 'ati', 'memory'))
        self.assertFalse(manifest.ok)
        self.assertEqual(manifest.exit_code, 2)
        self.assertEqual(manifest.failure['type'], 'MemoryError')
        self.assertIn('reduce the grid sizes', manifest.failure['message'])

    def test_orbit_run(self):
        """
        Test the orbit table, its families and the classical return scan
        """
        manifest = run_job(self.make_config(ORBITS, 'orbits', 'orbits', plot_script=False))
        self.assertTrue(manifest.ok)
        table = read_csv(self.tmp / 'orbits' / 'orbits.csv')
        self.assertEqual(list(table.columns), _var.orbit_columns)
        self.assertGreater(len(table), 0)
        self.assertGreater(len(manifest.summary['families']), 0)
        self.assertAlmostEqual(manifest.summary['classical_max_over_up'], 3.17, delta=0.01)
        self.assertFalse((self.tmp / 'orbits' / 'plot_orbits.py').exists())

    def test_html_figure(self):
        """
        Test that the interactive figure is written on request
        """
        manifest = run_job(self.make_config(SOLID, 'solid', 'html', html=True))
        self.assertTrue(manifest.ok)
        self.assertTrue((self.tmp / 'html' / 'figure_solid.html').exists())
        self.assertIn('figure_solid.html', [record['path'] for record in manifest.files])


if __name__ == '__main__':
    unittest.main()
