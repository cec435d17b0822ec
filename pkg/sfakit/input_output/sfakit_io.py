"""
This module contains the methods used for reading and writing sfakit result files.

CSV tables carry a '# units:' first line, JSON files are written atomically and
every written file can be hashed for the run manifest.
"""
# Standard library imports
import hashlib
import json
import os
from pathlib import Path
import shutil
import sys
import tempfile
import traceback

# Third party imports
import numpy as np
import pandas as pd

# sfakit library imports
from sfakit.calculation_tools.errors import OutputError
from sfakit.general_settings.variable_names import VariableNames

__all__ = ['Tee', 'write_csv', 'read_csv', 'units_header', 'file_hash', 'write_json_atomic', 'move_to_partial']

_var = VariableNames()
PARTIAL_DIR = 'partial'


# Context manager that copies stdout and any exceptions to a log file
class Tee:

    def __init__(self, filename):

        try:
            self.file = open(filename, 'a+')
        except OSError as e:
            raise OutputError(f'Could not open log file {filename}: {e}') from e
        self.stdout = sys.stdout

    def __enter__(self):

        sys.stdout = self
        return self

    def __exit__(self, exc_type, exc_value, tb):

        sys.stdout = self.stdout
        if exc_type is not None:
            self.file.write(''.join(traceback.format_exception(exc_type, exc_value, tb)))
        self.file.close()

    def write(self, data):

        self.file.write(data)
        self.stdout.write(data)

    def flush(self):

        self.file.flush()
        self.stdout.flush()


def units_header(columns, units=None):
    """The '# units:' line for a table

    Columns without a known unit are tagged 'arb.'.

    :param list columns: Column names
    :param dict units: Extra column -> unit tags

    :return: The header line without a newline
    :rtype: str

    """
    tags = dict(_var.units)
    tags.update(units or {})
    return '# units: ' + ', '.join(f'{col} [{tags.get(col, "arb.")}]' for col in columns)


def _shortest(value):
    """Shortest decimal that reads back to the same double"""
    return repr(float(value))


def write_csv(filename, data, units=None):
    """Writes a DataFrame with the units line and shortest round-trip floats

    :param str filename: The file (parent directories are created)
    :param pandas.DataFrame data: The table
    :param dict units: Extra unit tags

    :return: The path written
    :rtype: pathlib.Path

    """
    filename = Path(filename)
    frame = data.copy()
    for column in frame.columns:
        if pd.api.types.is_float_dtype(frame[column]):
            frame[column] = [_shortest(v) for v in frame[column].to_numpy()]
    try:
        filename.parent.mkdir(parents=True, exist_ok=True)
        with open(filename, 'w', newline='') as f:
            f.write(units_header(list(frame.columns), units) + '\n')
            frame.to_csv(f, index=False, lineterminator='\n')
    except OSError as e:
        raise OutputError(f'Could not write {filename}: {e}') from e
    return filename


def read_csv(filename):
    """Reads a table written by :func:`write_csv` (the units line is skipped)

    :param str filename: The file

    :return: The table
    :rtype: pandas.DataFrame

    """
    try:
        return pd.read_csv(filename, comment='#', float_precision='round_trip')
    except (OSError, pd.errors.ParserError) as e:
        raise OutputError(f'Could not read {filename}: {e}') from e


def file_hash(filename):
    """sha256 hex digest of a file"""
    digest = hashlib.sha256()
    try:
        with open(filename, 'rb') as f:
            for block in iter(lambda: f.read(1 << 16), b''):
                digest.update(block)
    except OSError as e:
        raise OutputError(f'Could not hash {filename}: {e}') from e
    return digest.hexdigest()


def _json_default(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, Path):
        return value.as_posix()
    raise TypeError(f'{type(value).__name__} is not JSON serializable')


def write_json_atomic(filename, data):
    """Writes JSON to a temporary file in the same directory and renames it into place

    :param str filename: The destination
    :param dict data: The content

    :return: The path written
    :rtype: pathlib.Path

    """
    filename = Path(filename)
    try:
        filename.parent.mkdir(parents=True, exist_ok=True)
        handle, temporary = tempfile.mkstemp(prefix=f'.{filename.name}.', dir=filename.parent)
        try:
            with os.fdopen(handle, 'w') as f:
                json.dump(data, f, indent=2, sort_keys=True, default=_json_default)
                f.write('\n')
            os.replace(temporary, filename)
        except BaseException:
            if os.path.exists(temporary):
                os.remove(temporary)
            raise
    except OSError as e:
        raise OutputError(f'Could not write {filename}: {e}') from e
    return filename


def move_to_partial(out_dir, files):
    """Moves written outputs into out_dir/partial

    :param str out_dir: The output directory
    :param list files: Paths inside ``out_dir``

    :return: The new paths
    :rtype: list

    """
    partial = Path(out_dir) / PARTIAL_DIR
    moved = []
    try:
        partial.mkdir(parents=True, exist_ok=True)
        for filename in files:
            filename = Path(filename)
            if not filename.exists():
                continue
            target = partial / filename.name
            shutil.move(str(filename), str(target))
            moved.append(target)
    except OSError as e:
        raise OutputError(f'Could not move partial outputs to {partial}: {e}') from e
    return moved
