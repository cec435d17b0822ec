"""
Stand-alone matplotlib scripts rendered from the jinja2 templates
"""
# Standard library imports
from pathlib import Path

# Third party imports
from jinja2 import Environment, FileSystemLoader, StrictUndefined

# sfakit library imports
from sfakit.calculation_tools.errors import OutputError
from sfakit.general_settings.variable_names import VariableNames

_var = VariableNames()

# selfconsistent runs share the quench panels
TEMPLATES = {
    'ati': 'plot_ati.py.j2',
    'hhg': 'plot_hhg.py.j2',
    'orbits': 'plot_orbits.py.j2',
    'nsdi': 'plot_nsdi.py.j2',
    'quench': 'plot_quench.py.j2',
    'selfconsistent': 'plot_quench.py.j2',
    'solid': 'plot_solid.py.j2',
}

TITLES = {
    'ati': 'Photoelectron spectrum along the polarization axis',
    'hhg': 'High-harmonic spectrum',
    'orbits': 'Quantum orbits: energy-time and complex-time panels',
    'nsdi': 'Correlated two-electron momentum map',
    'quench': 'Quenched molecule: R(t), Ip(t) and the local/cross harmonics',
    'selfconsistent': 'Self-consistent nuclei and ground-state population',
    'solid': 'Solid-state currents and harmonic spectrum',
}


def _environment():
    templates_dir = (Path(__file__).parent / 'templates').resolve()
    return Environment(loader=FileSystemLoader(templates_dir), undefined=StrictUndefined, keep_trailing_newline=True,
                       trim_blocks=True, lstrip_blocks=True)


def column_names():
    """Column names available to the templates"""
    return {
        'momentum': _var.momentum,
        'angle': _var.polar_angle,
        'b0_re': _var.b0_re,
        'b0_im': _var.b0_im,
        'b1_re': _var.b1_re,
        'b1_im': _var.b1_im,
        'total': _var.total_prob,
        'order': _var.harmonic_order,
        'intensity': _var.intensity,
        'label': 'label',
        'p1': _var.p1,
        'p2': _var.p2,
        'prob': _var.prob,
        'time': _var.time,
        'separation': _var.separation,
        'ip': _var.ip,
        'contribution': _var.contribution,
        're_a': _var.re_a,
        'im_a': _var.im_a,
        'currents': _var.currents,
        'intra': _var.intra,
        'inter': _var.inter,
        'band_total': _var.total,
    }


def render_plot_script(kind, files, **context):
    """Source of the plot script for one job kind

    :param str kind: The job kind
    :param dict files: Role -> CSV file name the script reads
    :param context: Template values (up, period, max_order, ...)

    :return: Python source
    :rtype: str

    """
    from sfakit import __version__ as version
    if kind not in TEMPLATES:
        raise OutputError(f'No plot template for {kind!r} runs')
    template = _environment().get_template(TEMPLATES[kind])
    columns = column_names()
    if kind == 'orbits':
        columns['order'] = _var.omega_harm
    return template.render(kind=kind, title=TITLES[kind], version=version, files=files, columns=columns, **context)


def write_plot_script(out_dir, kind, files, **context):
    """Writes plot_<kind>.py into the output directory

    :return: The path written
    :rtype: pathlib.Path

    """
    filename = Path(out_dir) / f'plot_{kind}.py'
    source = render_plot_script(kind, files, **context)
    try:
        filename.write_text(source)
    except OSError as e:
        raise OutputError(f'Could not write {filename}: {e}') from e
    return filename
