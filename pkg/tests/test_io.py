import hashlib
import io
import json
from pathlib import Path
import sys
import tempfile
import unittest

import numpy as np
import pandas as pd

from sfakit.calculation_tools.errors import OutputError
from sfakit.input_output import sfakit_io


class TestTables(unittest.TestCase):

    """Tests the CSV writer and reader"""

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def make_frame(self):
        return pd.DataFrame({'p_au': [0.1, 0.2, 1 / 3], 'total_prob': [1e-300, 2.5, np.pi], 'label': ['a', 'b', 'c']})

    def test_units_header(self):
        """
        Test known, extra and untagged columns
        """
        header = sfakit_io.units_header(['p_au', 'theta_rad', 'prob', 'R'], units={'R': 'bohr'})
        self.assertEqual(header, '# units: p_au [a.u.], theta_rad [rad], prob [arb.], R [bohr]')

    def test_first_line_and_shortest_floats(self):
        """
        Test the units line and that floats read back bit for bit
        """
        frame = self.make_frame()
        path = sfakit_io.write_csv(self.tmp / 'sub' / 'table.csv', frame)
        lines = path.read_text().splitlines()
        self.assertTrue(lines[0].startswith('# units: p_au [a.u.]'))
        self.assertEqual(lines[1], 'p_au,total_prob,label')
        self.assertEqual(lines[2], '0.1,1e-300,a')
        self.assertIn('0.3333333333333333', lines[4])

        table = sfakit_io.read_csv(path)
        np.testing.assert_array_equal(table['p_au'].to_numpy(), frame['p_au'].to_numpy())
        np.testing.assert_array_equal(table['total_prob'].to_numpy(), frame['total_prob'].to_numpy())
        self.assertEqual(list(table['label']), ['a', 'b', 'c'])

    def test_writing_is_deterministic(self):
        """
        Test that the same table gives the same bytes
        """
        first = sfakit_io.write_csv(self.tmp / 'a.csv', self.make_frame())
        second = sfakit_io.write_csv(self.tmp / 'b.csv', self.make_frame())
        self.assertEqual(first.read_bytes(), second.read_bytes())
        self.assertNotIn(b'\r\n', first.read_bytes())
        self.assertEqual(sfakit_io.file_hash(first), sfakit_io.file_hash(second))
        self.assertEqual(sfakit_io.file_hash(first), hashlib.sha256(first.read_bytes()).hexdigest())

    def test_missing_files(self):
        """
        Test that reading or hashing a missing file raises an output error
        """
        with self.assertRaises(OutputError):
            sfakit_io.read_csv(self.tmp / 'missing.csv')
        with self.assertRaises(OutputError):
            sfakit_io.file_hash(self.tmp / 'missing.csv')


class TestManifestFiles(unittest.TestCase):

    """Tests the atomic JSON writer and the partial outputs"""

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def test_atomic_json(self):
        """
        Test that numpy values are serialized and no temporary file is left
        """
        data = {'n': np.int64(3), 'x': np.float64(0.5), 'flag': np.bool_(True), 'grid': np.arange(3),
                'z': 1 + 2j, 'path': Path('a') / 'b.csv'}
        path = sfakit_io.write_json_atomic(self.tmp / 'manifest.json', data)
        content = json.loads(path.read_text())
        self.assertEqual(content, {'n': 3, 'x': 0.5, 'flag': True, 'grid': [0, 1, 2], 'z': [1.0, 2.0],
                                   'path': 'a/b.csv'})
        self.assertEqual([p.name for p in self.tmp.iterdir()], ['manifest.json'])

    def test_unserializable_value_leaves_nothing(self):
        """
        Test that a failed dump removes the temporary file
        """
        with self.assertRaises(TypeError):
            sfakit_io.write_json_atomic(self.tmp / 'manifest.json', {'bad': object()})
        self.assertEqual(list(self.tmp.iterdir()), [])

    def test_move_to_partial(self):
        """
        Test that written outputs move into partial/ and missing ones are skipped
        """
        written = self.tmp / 'a.csv'
        written.write_text('x\n')
        moved = sfakit_io.move_to_partial(self.tmp, [written, self.tmp / 'never.csv'])
        self.assertEqual(moved, [self.tmp / 'partial' / 'a.csv'])
        self.assertFalse(written.exists())
        self.assertEqual(moved[0].read_text(), 'x\n')


class TestTee(unittest.TestCase):

    """Tests the stdout copy to the run log"""

    def test_tee_copies_output_and_tracebacks(self):
        """
        Test that printed text and an escaping exception reach the log
        """
        with tempfile.TemporaryDirectory() as tmp:
            log = Path(tmp) / 'run.log'
            captured = io.StringIO()
            saved = sys.stdout
            sys.stdout = captured
            try:
                with self.assertRaises(ValueError):
                    with sfakit_io.Tee(log):
                        print('hello from the run')
                        raise ValueError('broken run')
            finally:
                sys.stdout = saved
            text = log.read_text()
            self.assertIn('hello from the run', text)
            self.assertIn('ValueError: broken run', text)
            self.assertIn('hello from the run', captured.getvalue())

    def test_unwritable_log(self):
        """
        Test that a log in a missing directory raises an output error
        """
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(OutputError):
                sfakit_io.Tee(Path(tmp) / 'missing' / 'run.log')


if __name__ == '__main__':
    unittest.main()
