"""
Settings for sfakit
"""
# Standard library imports
import ast
from pathlib import Path

# Third party imports
import yaml

# sfakit library imports
from sfakit.calculation_tools.helper import AttrDict


class Settings:
    """This is a container for all of the numerical defaults used in sfakit.
    Pulse, target, quadrature and output options are collected in one spot
    so a run config only needs to name what differs from them.

    This class loads the default settings from the settings.yml file located
    in the directory wherever sfakit has been installed.

    :Methods:

    - :func:`section`

    """
    sections = {
        'general': 'General Settings',
        'pulse': 'Pulse Settings',
        'target': 'Target Settings',
        'depletion': 'Depletion Settings',
        'sfa': 'SFA Quadrature Settings',
        'orbits': 'Quantum Orbit Settings',
        'two_electron': 'Two-Electron Settings',
        'molecule': 'Molecule Dynamics Settings',
        'solid': 'Solid-State Settings',
        'output': 'Output Settings',
    }

    def __init__(self, settings_file=None):
        """Settings object initialization

        :param str settings_file: Optional path to an alternative yml file

        """
        self._settings_file = settings_file
        self._load_settings()
        self._reset_model()

    def __str__(self):

        m = 25

        settings = 'Settings\n'
        for key, title in self.sections.items():
            if hasattr(self, key):
                settings += f'\n{title} ({key}):\n'
                for k, v in getattr(self, key).items():
                    settings += f'{str(k).rjust(m)} : {v}\n'

        return settings

    def __repr__(self):
        return self.__str__()

    def _get_file_path(self):
        """The yml file in use: the one given at construction or the packaged defaults

        """
        if self._settings_file is not None:
            return Path(self._settings_file).resolve()

        return Path(__file__).with_name('settings.yml')

    def _load_settings(self):
        """Reads the yml file and coerces every value once

        """
        settings_file = self._get_file_path()

        with open(settings_file) as file:
            self.cfg = yaml.safe_load(file)

            for sub_dict in self.cfg.values():
                for key, value in sub_dict.items():
                    sub_dict[key] = coerce_value(value)

        return None

    def _reset_model(self):
        """Initializes the settings dicts to their default values

        """
        for key in self.sections:
            setattr(self, key, AttrDict(self.cfg.get(key, {})))

        return None

    def section(self, name):
        """Returns a copy of one settings section

        :param str name: The section name

        :return: The section values
        :rtype: AttrDict

        """
        if name not in self.sections:
            raise KeyError(f'Unknown settings section: {name}')
        return AttrDict(dict(getattr(self, name)))


def coerce_value(value):
    """Converts text values from yml or config files into python values

    :param value: The raw value

    :return: The coerced value (bool, None, int, float, list or the original)

    """
    if isinstance(value, (bool, int, float, list)) or value is None:
        return value
    if not isinstance(value, str):
        return value
    text = value.strip()
    if text in ['True', 'False', 'None', 'true', 'false']:
        return ast.literal_eval(text.capitalize())
    if text.lstrip('+-').isdigit():
        return int(text)
    if _is_number(text):
        return float(text)
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def _is_number(s):
    """ Returns True if the input is a float (number), else False

    :param str s: String that will be checked as to whether it is a number

    :return: True or False, depending on whether a number is detected.
    :rtype: bool

    """
    try:
        float(s)
    except (TypeError, ValueError):
        return False
    return True
