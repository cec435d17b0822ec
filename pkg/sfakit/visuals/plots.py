"""
Interactive plotly figures of the run outputs
"""
# Standard library imports
from pathlib import Path

# Third party imports
import numpy as np
import plotly.graph_objects as go
import plotly.io as pio

# sfakit library imports
from sfakit.calculation_tools.errors import OutputError
from sfakit.general_settings.variable_names import VariableNames

pio.templates.default = "plotly_white"

_var = VariableNames()

# Default Matlab colors
colors_rgb = [(0, 0.4470, 0.7410),
              (0.8500, 0.3250, 0.0980),
              (0.9290, 0.6940, 0.1250),
              (0.4940, 0.1840, 0.5560),
              (0.4660, 0.6740, 0.1880),
              (0.3010, 0.7450, 0.9330),
              (0.6350, 0.0780, 0.1840)
              ]

# Convert to rgb format used in plotly
colors = ['rgb(' + ','.join([str(int(255 * c)) for c in color]) + ')' for color in colors_rgb]

plot_options = {
    'label_font': dict(
        size=14,
    ),
    'title_font': dict(
        size=18,
    ),
    'tick_font': dict(
        size=14,
    ),
}


def _make_line_trace(fig, x, y, name, color):
    """Adds a line trace in place

    :param go.Figure fig: A figure object
    :param list x: X-axis values for plot
    :param list y: Y-axis values for plot
    :param str name: Name of the data
    :param int color: Index for the color

    :return: None

    """
    line = dict(color=colors[color % len(colors)], width=2)
    fig.add_trace(go.Scatter(x=x, y=y, name=name, line=line))
    return None


def _fig_finishing(fig, title, x_title, y_title, log_y=False):
    """Common axis and font styling"""
    fig.update_xaxes(title=x_title, zeroline=True, zerolinewidth=2, zerolinecolor='#4e4e4e',
                     title_font=plot_options['label_font'], tickfont=plot_options['tick_font'])
    fig.update_yaxes(title=y_title, type='log' if log_y else 'linear',
                     title_font=plot_options['label_font'], tickfont=plot_options['tick_font'])
    fig.update_layout(title=title, title_font=plot_options['title_font'], legend_font=plot_options['label_font'])
    return fig


def spectrum_figure(x, curves, title, x_title='Harmonic order', y_title='Intensity (arb. u.)', log_y=True):
    """Line figure of one or more spectra sharing an x axis

    Non-positive values are dropped from logarithmic plots.

    :param numpy.ndarray x: Common x values
    :param dict curves: Name -> y values

    :return: The figure
    :rtype: go.Figure

    """
    fig = go.Figure()
    x = np.asarray(x)
    for i, (name, y) in enumerate(curves.items()):
        y = np.asarray(y, dtype=float)
        keep = y > 0 if log_y else np.ones(len(y), dtype=bool)
        _make_line_trace(fig, x[keep], y[keep], name, i)
    return _fig_finishing(fig, title, x_title, y_title, log_y)


def map_figure(frame, title):
    """Heat map of an NSDI table with columns p1_au, p2_au, prob"""
    grid = frame.pivot(index=_var.p2, columns=_var.p1, values=_var.prob)
    fig = go.Figure(go.Heatmap(x=grid.columns.to_numpy(), y=grid.index.to_numpy(), z=grid.to_numpy(),
                               colorscale='Viridis'))
    fig.update_yaxes(scaleanchor='x')
    return _fig_finishing(fig, title, 'p1 (a.u.)', 'p2 (a.u.)')


def orbits_figure(frame, title):
    """Energy-time panel of the orbits table"""
    fig = go.Figure()
    for i, (label, group) in enumerate(frame.groupby('label', sort=True)):
        fig.add_trace(go.Scatter(x=group['re_tion'], y=group[_var.omega_harm], name=f"{label} t'", mode='markers',
                                 marker=dict(color=colors[i % len(colors)], size=4)))
        _make_line_trace(fig, group['re_trec'].to_numpy(), group[_var.omega_harm].to_numpy(), f'{label} t', i)
    return _fig_finishing(fig, title, 'Re t (a.u.)', 'Harmonic order')


def write_html_figure(fig, filename):
    """Writes a figure as stand-alone HTML (plotly.js from the CDN)

    :return: The path written
    :rtype: pathlib.Path

    """
    filename = Path(filename)
    try:
        pio.write_html(fig, file=filename.as_posix(), auto_open=False, include_plotlyjs='cdn')
    except OSError as e:
        raise OutputError(f'Could not write {filename}: {e}') from e
    return filename
