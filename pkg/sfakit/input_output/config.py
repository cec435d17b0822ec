"""
Run configuration files

A run config is a sectioned ``key = value`` file (INI/TOML shaped), or the same
sections as JSON or YAML. Every value not given is filled from the library
defaults in settings.yml, and every problem found is reported at once.
"""
# Standard library imports
import configparser
import difflib
import functools
import json
import logging
from pathlib import Path

# Third party imports
import attr
import numpy as np
import yaml

# sfakit library imports
from sfakit.calculation_tools.errors import ConfigError, SFAError
from sfakit.calculation_tools.helper import MAX_GRID_NODES, AttrDict
from sfakit.general_settings.settings import Settings, coerce_value
from sfakit.general_settings.unit_base import units
from sfakit.main_modules.depletion import CONVENTIONS, STRATEGIES
from sfakit.main_modules.solids_sbe import DERIVATIVES
from sfakit.main_modules.two_electron import INTERACTIONS, MECHANISMS, SUM_MODES, ExcitedLevel, TwoElectronModel
from sfakit.model_components.band_models import BAND_MODELS, HaldaneModel, TabulatedBands1D, TightBinding1D
from sfakit.model_components.nuclei import NucleiState
from sfakit.model_components.pulse import ENVELOPES, LaserPulse
from sfakit.model_components.targets import PROFILES, DoubleDeltaTarget1D, FormFactor, SeparableTarget

logger = logging.getLogger('ConfigLogger')

KINDS = ('ati', 'hhg', 'orbits', 'nsdi', 'quench', 'selfconsistent', 'solid')
TARGET_KINDS = ('separable3d', 'doubledelta1d')
SECTIONS = ('run', 'pulse', 'target', 'model', 'depletion', 'numerics', 'molecule')

REQUIRED_BLOCKS = {
    'ati': ('pulse', 'target'),
    'hhg': ('pulse', 'target'),
    'orbits': ('pulse', 'target'),
    'nsdi': ('pulse', 'model'),
    'quench': ('pulse', 'target'),
    'selfconsistent': ('pulse', 'target'),
    'solid': ('pulse', 'model'),
}

# Sections each kind reads; anything else in the file is an error
USED_BLOCKS = {
    'ati': ('run', 'pulse', 'target', 'depletion', 'numerics'),
    'hhg': ('run', 'pulse', 'target', 'depletion', 'numerics'),
    'orbits': ('run', 'pulse', 'target', 'numerics'),
    'nsdi': ('run', 'pulse', 'model', 'depletion', 'numerics'),
    'quench': ('run', 'pulse', 'target', 'depletion', 'numerics', 'molecule'),
    'selfconsistent': ('run', 'pulse', 'target', 'depletion', 'numerics', 'molecule'),
    'solid': ('run', 'pulse', 'model', 'numerics'),
}

CONFLICTS = {
    'pulse': [('wavelength_nm', 'omega_au'), ('intensity_wcm2', 'e0_au')],
    'target': [('gamma_au', 'ip_au')],
}

TWO_ELECTRON_MODEL_KEYS = ('i2p_au', 'i1p_au', 'excited_ips_au', 'excited_l', 'v12', 'interaction',
                           'screening_au', 'delta_au', 'ground_is_twice_ion')
TWO_ELECTRON_NUMERIC_KEYS = ('mechanism', 'channel_sum', 'symmetrization', 'hermite_points', 'n_p', 'p_max_au')
SOLID_MODEL_KEYS = ('model', 'gap_au', 'hopping_au', 'lattice_au', 'dipole_au', 't2_au', 'haldane_mass_au',
                    'haldane_t2_au', 'haldane_phi_rad', 'orientation_rad')
SOLID_NUMERIC_KEYS = ('n_k', 'dt_au', 'current_derivative', 'berry_sign', 'sfa_interband')

ENUMS = {
    ('pulse', 'envelope'): ENVELOPES,
    ('target', 'kind'): TARGET_KINDS,
    ('target', 'profile'): PROFILES,
    ('depletion', 'convention'): CONVENTIONS,
    ('depletion', 'kernel_mode'): ('saddle', 'grid'),
    ('numerics', 'quadrature'): ('simpson', 'filon'),
    ('numerics', 'intermediate_mode'): ('spa_over_p', 'grid'),
    ('numerics', 'window'): ('hann', 'none'),
    ('numerics', 'form'): ('length', 'acceleration'),
    ('numerics', 'mechanism'): MECHANISMS,
    ('numerics', 'channel_sum'): SUM_MODES,
    ('numerics', 'symmetrization'): SUM_MODES,
    ('numerics', 'current_derivative'): DERIVATIVES,
    ('model', 'interaction'): INTERACTIONS,
}

POSITIVE = {
    'pulse': ('n_cycles', 'wavelength_nm', 'omega_au'),
    'target': ('width_au', 'epsilon_au', 'p_max_au', 'lambda_au', 'ip_au', 'gamma_au'),
    'depletion': ('kernel_epsilon_au', 'grid_points', 'grid_points_3d', 'grid_p_max_au', 'adk_charge'),
    'numerics': ('points_per_period', 'intermediate_points', 'intermediate_points_3d', 'max_phase_per_step',
                 'spreading_delta_au', 'n_p', 'n_theta', 'p_max_au',
                 'seeds_per_half_cycle', 'dedup_tolerance', 'newton_tolerance', 'max_iterations', 'n_omega',
                 'hermite_points', 'n_k', 'dt_au'),
    'model': ('i2p_au', 'i1p_au', 'screening_au', 'delta_au', 'gap_au', 'lattice_au'),
    'molecule': ('mass_au', 'initial_separation_au', 'dt_au', 'delta_r_au'),
    'run': ('threads',),
}

NULLABLE = ('t2_au',)

NON_NEGATIVE = {
    'pulse': ('intensity_wcm2', 'e0_au', 'ellipticity'),
    'target': ('separation_au',),
    'molecule': ('charge', 'soft_core_au', 'wavepacket_width_au'),
    'model': ('hopping_au',),
}


def _defaults(settings, kind):
    """Default values per section for one job kind"""
    two = settings.section('two_electron')
    solid = settings.section('solid')
    run = dict(settings.section('general'))
    run.update(settings.section('output'))
    run['kind'] = kind

    target = dict(settings.section('target'))
    target.update(gamma_au=None, ip_au=None, centers=None)

    pulse = dict(settings.section('pulse'))
    pulse.update(e0_au=None, omega_au=None)

    numerics = dict(settings.section('sfa'))
    numerics.update(settings.section('orbits'))
    if kind == 'nsdi':
        numerics.update({k: two[k] for k in TWO_ELECTRON_NUMERIC_KEYS})
        model = {k: two[k] for k in TWO_ELECTRON_MODEL_KEYS}
    elif kind == 'solid':
        numerics = {k: solid[k] for k in SOLID_NUMERIC_KEYS}
        numerics['window'] = settings.sfa.window
        model = {k: solid[k] for k in SOLID_MODEL_KEYS}
    else:
        model = {}

    return {
        'run': run,
        'pulse': pulse,
        'target': target,
        'model': model,
        'depletion': dict(settings.section('depletion')),
        'numerics': numerics,
        'molecule': dict(settings.section('molecule')),
    }


def _suggest(name, choices):
    match = difflib.get_close_matches(str(name), list(choices), n=1)
    return f"; did you mean '{match[0]}'?" if match else ''


def read_config_file(filename):
    """Reads the raw sections of a config file

    ``.json`` and ``.yml``/``.yaml`` files are parsed as such, anything else
    as sectioned ``key = value`` text.

    :param str filename: The file

    :return: Section name -> dict of raw values
    :rtype: dict

    """
    filename = Path(filename)
    try:
        text = filename.read_text(encoding='utf-8')
    except (OSError, UnicodeDecodeError) as e:
        raise ConfigError(f'Could not read config file {filename}: {e}') from e

    suffix = filename.suffix.lower()
    if suffix == '.json':
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f'Invalid JSON in {filename}: {e}') from e
    elif suffix in ('.yml', '.yaml'):
        try:
            raw = yaml.safe_load(text) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f'Invalid YAML in {filename}: {e}') from e
    else:
        parser = configparser.ConfigParser(interpolation=None, comment_prefixes=('#', ';'),
                                           inline_comment_prefixes=('#', ';'))
        parser.optionxform = str
        try:
            parser.read_string(text, source=str(filename))
        except configparser.Error as e:
            raise ConfigError(f'Invalid config file {filename}: {e}') from e
        raw = {section: dict(parser[section]) for section in parser.sections()}

    if not isinstance(raw, dict) or not all(isinstance(v, dict) for v in raw.values()):
        raise ConfigError(f'{filename} must map section names to key/value blocks')
    return {str(section): {str(k): coerce_value(v) for k, v in block.items()} for section, block in raw.items()}


@attr.s(eq=False)
class RunConfig:
    """A validated run configuration

    Every section is an AttrDict holding the user values on top of the
    defaults; ``given`` records which keys the file actually set.

    :param str kind: The job kind
    :param AttrDict run: kind, out, threads, seed, verbose, html, plot_script
    :param AttrDict pulse: Pulse block
    :param AttrDict target: Target block
    :param AttrDict model: Band or two-electron model block
    :param AttrDict depletion: Ground-state depletion block
    :param AttrDict numerics: Grids, tolerances and modes
    :param AttrDict molecule: Nuclear dynamics block
    :param dict given: Section -> keys set by the file
    :param str source: The config file

    """
    kind = attr.ib()
    run = attr.ib(factory=AttrDict)
    pulse = attr.ib(factory=AttrDict)
    target = attr.ib(factory=AttrDict)
    model = attr.ib(factory=AttrDict)
    depletion = attr.ib(factory=AttrDict)
    numerics = attr.ib(factory=AttrDict)
    molecule = attr.ib(factory=AttrDict)
    given = attr.ib(factory=dict)
    source = attr.ib(default=None)

    @kind.validator
    def _check_kind(self, attribute, value):
        if value not in KINDS:
            raise ConfigError(f'Unknown job kind {value!r}{_suggest(value, KINDS)}')

    @property
    def out_dir(self):
        return Path(self.run.out)

    @property
    def threads(self):
        return int(self.run.threads)

    @property
    def seed(self):
        return int(self.run.seed)

    def echo(self):
        """Every section the job reads, as plain dicts"""
        return {name: dict(getattr(self, name)) for name in USED_BLOCKS[self.kind]}

    def build_pulse(self):
        return build_pulse(self.pulse)

    def build_target(self):
        return build_target(self.target)

    def build_band_model(self):
        return build_band_model(self.model)

    def build_two_electron_model(self):
        return build_two_electron_model(self.model)

    def build_nuclei(self):
        return build_nuclei(self.molecule, axis=int(self.target.axis))


def _check_section(name, values, defaults, errors):
    for key, value in values.items():
        if key not in defaults:
            errors.append(f"Unknown key '{key}' in [{name}]{_suggest(key, defaults)}")
            continue
        default = defaults[key]
        if isinstance(default, bool):
            if not isinstance(value, bool):
                errors.append(f"[{name}] {key} must be True or False, got {value!r}")
        elif isinstance(default, (int, float)) or key in POSITIVE.get(name, ()) + NON_NEGATIVE.get(name, ()):
            if value is None and key in NULLABLE:
                continue
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                errors.append(f"[{name}] {key} must be a number, got {value!r}")
            elif isinstance(default, int) and not float(value).is_integer():
                errors.append(f"[{name}] {key} must be a whole number, got {value!r}")
        elif isinstance(default, list) and not isinstance(value, list):
            errors.append(f"[{name}] {key} must be a list, got {value!r}")

    for first, second in CONFLICTS.get(name, []):
        if first in values and second in values:
            errors.append(f"[{name}] gives both '{first}' and '{second}'; keep one")

    for (section, key), choices in ENUMS.items():
        if section == name and key in values and values[key] not in choices:
            errors.append(f"[{name}] {key} = {values[key]!r} is not one of {list(choices)}"
                          f"{_suggest(values[key], choices)}")

    def numeric(key):
        value = values.get(key)
        return value if isinstance(value, (int, float)) and not isinstance(value, bool) else None

    for key in POSITIVE.get(name, ()):
        if numeric(key) is not None and not numeric(key) > 0:
            errors.append(f"[{name}] {key} must be positive, got {values[key]!r}")
    for key in NON_NEGATIVE.get(name, ()):
        if numeric(key) is not None and numeric(key) < 0:
            errors.append(f"[{name}] {key} cannot be negative, got {values[key]!r}")


def _check_special(name, merged, given, errors):
    """Values whose domain is not captured by a default's type"""
    if name == 'depletion' and 'strategy' in given:
        strategy = merged['strategy']
        if not (isinstance(strategy, str) and (strategy in STRATEGIES or strategy.startswith('table:'))):
            errors.append(f"[depletion] strategy = {strategy!r} is not one of {list(STRATEGIES)} or "
                          f"'table:<path>'{_suggest(strategy, STRATEGIES)}")
    if name == 'model' and 'model' in merged:
        band = merged['model']
        if not (isinstance(band, str) and (band in BAND_MODELS[:2] or band.startswith('tabulated:'))):
            errors.append(f"[model] model = {band!r} is not one of {list(BAND_MODELS[:2])} or "
                          f"'tabulated:<path>'")
        t2 = merged.get('t2_au')
        if t2 is not None and not (isinstance(t2, (int, float)) and t2 > 0):
            errors.append(f'[model] t2_au must be positive or None, got {t2!r}')
    if name == 'model' and 'excited_ips_au' in merged:
        ips, ls = merged['excited_ips_au'], merged['excited_l']
        if isinstance(ips, list) and isinstance(ls, list) and len(ips) != len(ls):
            errors.append('[model] excited_ips_au and excited_l must have the same length')
    if name == 'target' and merged['kind'] == 'separable3d' and given:
        if merged.get('gamma_au') is None and merged.get('ip_au') is None:
            errors.append('[target] needs one of gamma_au and ip_au for a separable3d target')
    if name == 'target' and merged.get('axis') not in (0, 1, 2):
        errors.append(f"[target] axis must be 0, 1 or 2, got {merged.get('axis')!r}")
    if name == 'target' and given.get('centers') is not None:
        centers = np.asarray(given['centers'], dtype=object)
        if centers.ndim != 2 or centers.shape[1] != 3:
            errors.append('[target] centers must be a list of [x, y, z] triples')


def _check_grid_sizes(kind, merged, errors):
    """Tensor momentum grids of a 3D target must stay below MAX_GRID_NODES"""
    if kind not in ('ati', 'hhg') or merged['target']['kind'] != 'separable3d':
        return
    depletion, numerics = merged['depletion'], merged['numerics']
    grids = (('depletion', 'grid_points_3d', depletion['kernel_mode'] == 'grid'
              and str(depletion['strategy']).startswith('sfa_')),
             ('numerics', 'intermediate_points_3d', numerics.get('intermediate_mode') == 'grid'))
    for section, key, used in grids:
        points = merged[section].get(key)
        if used and isinstance(points, (int, float)) and points ** 3 > MAX_GRID_NODES:
            errors.append(f'[{section}] {key} = {points!r} makes a 3D grid of {int(points) ** 3} nodes; '
                          f'the limit is {MAX_GRID_NODES}')


def _resolve_path(value, prefix, base):
    """Resolves 'prefix:<path>' relative to the config file directory"""
    if not isinstance(value, str) or not value.startswith(prefix) or base is None:
        return value
    path = Path(value.split(':', 1)[1])
    if not path.is_absolute():
        path = (base / path).resolve()
    return f'{prefix}{path.as_posix()}'


def validate_config(raw, kind=None, overrides=None, settings=None, source=None):
    """Validates raw sections against the defaults and collects every error

    :param dict raw: Section name -> raw values
    :param str kind: Job kind overriding (and checked against) [run] kind
    :param dict overrides: Extra [run] values (command line flags)
    :param Settings settings: Defaults (a fresh Settings by default)
    :param str source: The file the sections came from

    :return: The configuration
    :rtype: RunConfig

    """
    settings = settings or Settings()
    errors = []
    raw = {name: dict(block) for name, block in raw.items()}
    run = raw.setdefault('run', {})
    run.update({k: v for k, v in (overrides or {}).items() if v is not None})

    file_kind = run.get('kind')
    if kind is None:
        kind = file_kind
    elif file_kind is not None and file_kind != kind:
        errors.append(f"[run] kind = {file_kind!r} does not match the requested job {kind!r}")
    if kind is None:
        raise ConfigError('No job kind given: set [run] kind or use a subcommand')
    if kind not in KINDS:
        raise ConfigError(f'Unknown job kind {kind!r}{_suggest(kind, KINDS)}')
    run['kind'] = kind

    defaults = _defaults(settings, kind)
    used = USED_BLOCKS[kind]
    for name in raw:
        if name not in SECTIONS:
            errors.append(f'Unknown section [{name}]{_suggest(name, SECTIONS)}')
        elif name not in used:
            errors.append(f'Section [{name}] is not used by {kind} jobs')
    for name in REQUIRED_BLOCKS[kind]:
        if name not in raw:
            errors.append(f'Missing [{name}] block required by {kind} jobs')

    base = Path(source).resolve().parent if source is not None else None
    merged = {}
    for name in SECTIONS:
        given = raw.get(name, {}) if name in used else {}
        _check_section(name, given, defaults[name], errors)
        values = dict(defaults[name])
        values.update({k: v for k, v in given.items() if k in defaults[name]})
        _check_special(name, values, given, errors)
        merged[name] = values

    if kind in ('quench', 'selfconsistent') and merged['target']['kind'] != 'doubledelta1d':
        errors.append(f"{kind} jobs need [target] kind = 'doubledelta1d'")
    if kind == 'nsdi' and str(merged['depletion']['strategy']).startswith('sfa_'):
        errors.append('nsdi jobs support unit, adk_* and table depletion only')
    _check_grid_sizes(kind, merged, errors)
    if kind == 'selfconsistent' and merged['depletion']['strategy'] not in ('unit', 'sfa_markov', 'sfa_full'):
        errors.append('selfconsistent jobs step the SFA kernel: [depletion] strategy must be '
                      'unit, sfa_markov or sfa_full')

    if errors:
        raise ConfigError(errors)

    merged['depletion']['strategy'] = _resolve_path(merged['depletion']['strategy'], 'table:', base)
    if merged['depletion'].get('table_path') and base is not None:
        merged['depletion']['table_path'] = str((base / merged['depletion']['table_path']).resolve())
    if 'model' in merged['model']:
        merged['model']['model'] = _resolve_path(merged['model']['model'], 'tabulated:', base)

    given = {name: sorted(raw.get(name, {})) for name in SECTIONS if name in raw}
    config = RunConfig(kind=kind, given=given, source=None if source is None else str(source),
                       **{name: AttrDict(values) for name, values in merged.items()})
    logger.info(f'Parsed {kind} config' + (f' from {source}' if source else ''))
    return config


def parse_config(filename, kind=None, overrides=None, settings=None):
    """Reads and validates a run config

    :param str filename: INI-style, JSON or YAML file
    :param str kind: Job kind (the CLI subcommand)
    :param dict overrides: Extra [run] values
    :param Settings settings: Alternative defaults

    :return: The validated config
    :rtype: RunConfig

    :raises ConfigError: with every problem found

    """
    raw = read_config_file(filename)
    return validate_config(raw, kind=kind, overrides=overrides, settings=settings, source=filename)


# Domain objects
def _built(func):
    """Re-raises library errors from a builder as config errors"""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ConfigError:
            raise
        except SFAError as e:
            if e.exit_code == 2:
                raise ConfigError(f'{func.__name__}: {e}') from e
            raise
    return wrapper


@_built
def build_pulse(section):
    """LaserPulse from a [pulse] block

    ``e0_au`` and ``omega_au`` take precedence over the laboratory units.
    """
    e0 = section.get('e0_au')
    if e0 is None:
        e0 = units.field_from_intensity(section['intensity_wcm2'])
    omega = section.get('omega_au')
    if omega is None:
        omega = units.omega_from_wavelength(section['wavelength_nm'])
    return LaserPulse(e0=e0, omega=omega, cep=section['cep_rad'], n_cycles=section['n_cycles'],
                      envelope=section['envelope'], ellipticity=section['ellipticity'])


@_built
def build_target(section):
    """SeparableTarget or DoubleDeltaTarget1D from a [target] block"""
    if section['kind'] == 'doubledelta1d':
        return DoubleDeltaTarget1D(lam=section['lambda_au'], separation=section['separation_au'],
                                   axis=section['axis'], epsilon=section['epsilon_au'])
    centers = section.get('centers') or ((0.0, 0.0, 0.0),)
    form_factor = FormFactor(centers=centers, profile=section['profile'], width=section['width_au'])
    gamma, ip = section.get('gamma_au'), section.get('ip_au')
    if gamma is None and ip is None:
        raise ConfigError('[target] needs one of gamma_au and ip_au for a separable3d target')
    return SeparableTarget(form_factor=form_factor, gamma=gamma, ip=ip, epsilon=section['epsilon_au'],
                           p_max=section['p_max_au'])


@_built
def build_band_model(section):
    """Band model from a [model] block: tightbinding1d, haldane2d or tabulated:<path>"""
    name = section['model']
    t2 = section.get('t2_au')
    if name == 'tightbinding1d':
        return TightBinding1D(lattice=section['lattice_au'], t2=t2, gap_min=section['gap_au'],
                              hopping=section['hopping_au'], dipole_value=section['dipole_au'])
    if name == 'haldane2d':
        return HaldaneModel(lattice=section['lattice_au'], t2=t2, hopping=section['hopping_au'],
                            mass=section['haldane_mass_au'], nnn_hopping=section['haldane_t2_au'],
                            phi=section['haldane_phi_rad'], orientation=section['orientation_rad'])
    if name.startswith('tabulated:'):
        return TabulatedBands1D.from_csv(name.split(':', 1)[1], lattice=section['lattice_au'], t2=t2)
    raise ConfigError(f'Unknown band model {name!r}')


@_built
def build_two_electron_model(section):
    """TwoElectronModel from a [model] block, with a separable first-ionization dipole at E₁₀ − E₀"""
    levels = [ExcitedLevel(ip, l) for ip, l in zip(section['excited_ips_au'], section['excited_l'])]
    model = TwoElectronModel(i2p=section['i2p_au'], i1p=section['i1p_au'], levels=levels, v12=section['v12'],
                             interaction=section['interaction'], screening=section['screening_au'],
                             delta=section['delta_au'], ground_is_twice_ion=section['ground_is_twice_ion'])
    model.first_dipole = SeparableTarget(ip=model.first_ip).regular_dipole
    return model


@_built
def build_nuclei(section, axis=2):
    """Diatomic NucleiState from a [molecule] block"""
    return NucleiState.diatomic(section['initial_separation_au'], mass=section['mass_au'],
                                charge=section['charge'], soft_core=section['soft_core_au'], axis=axis)
