"""
Top Level helper classes for sfakit
"""
# Standard library imports
import difflib

# Third party imports
import numpy as np

# sfakit library imports
from sfakit.calculation_tools.errors import GridSizeError

MAX_GRID_NODES = 100_000


class AttrDict(dict):

    """Config section whose keys read as attributes; nested dicts become
    sections too

    :Methods:

        - :func:`update`

    """
    def __init__(self, *args, **kwargs):
        super().__init__()
        self.update(*args, **kwargs)

    def __getattr__(self, name):
        if name in self:
            return self[name]
        close = difflib.get_close_matches(name, [str(k) for k in self], n=1)
        hint = f" (closest key: '{close[0]}')" if close else ''
        raise AttributeError(f'{name}{hint}')

    def __setitem__(self, key, item):
        if isinstance(item, dict) and not isinstance(item, AttrDict):
            item = AttrDict(item)
        super().__setitem__(key, item)

    def update(self, *args, **kwargs):
        """Same call syntax as dict.update, routed through __setitem__

        :return: None
        """
        for key, value in dict(*args, **kwargs).items():
            self[key] = value

    __setattr__ = __setitem__
    __delattr__ = dict.__delitem__

def dot(a, b):
    """Bilinear (non-conjugating) dot product over the last axis"""
    return np.sum(np.asarray(a) * np.asarray(b), axis=-1)


def is_uniform(grid, rtol=1e-9):
    """Checks that a 1D grid is uniformly spaced

    :param numpy.ndarray grid: The grid

    :return: True if uniform
    :rtype: bool

    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2:
        return False
    steps = np.diff(grid)
    return bool(np.all(np.abs(steps - steps[0]) <= rtol * abs(steps[0])))


def tensor_grid_nodes(points_per_axis, dimension, what='Momentum grid', limit=MAX_GRID_NODES):
    """Node count of a tensor grid, checked against ``limit``

    :param int points_per_axis: Points along each axis
    :param int dimension: Number of axes

    :return: points_per_axis**dimension
    :rtype: int

    """
    nodes = int(points_per_axis) ** int(dimension)
    if nodes > limit:
        raise GridSizeError(what, nodes, limit)
    return nodes
