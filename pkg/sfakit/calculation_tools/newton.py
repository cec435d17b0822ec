"""
Damped Newton iteration for small complex systems, vectorized over many
starting points
"""
# Standard library imports
import logging

# Third party imports
import numpy as np

logger = logging.getLogger('NewtonLogger')


def damped_newton(residual, jacobian, x0, tol=1e-11, max_iter=80, min_step=1 / 64):
    """Solves residual(x) = 0 from every row of ``x0`` at once

    Each row takes a full Newton step when that lowers the residual norm and
    halves the step (down to ``min_step``) otherwise.

    :param callable residual: f(x) with x of shape (n, m) returning (n, m)
    :param callable jacobian: J(x) returning (n, m, m)
    :param numpy.ndarray x0: Starting points, shape (n, m)
    :param float tol: Convergence threshold on the residual norm
    :param int max_iter: Iteration limit

    :return: (x, converged, residual_norm)
    :rtype: tuple

    """
    x = np.array(x0, dtype=complex, copy=True)
    if x.ndim == 1:
        x = x[None, :]
    f = residual(x)
    norm = np.linalg.norm(f, axis=-1)
    active = np.isfinite(norm)

    for it in range(max_iter):
        todo = active & (norm > tol)
        if not np.any(todo):
            break
        jac = jacobian(x[todo])
        try:
            step = np.linalg.solve(jac, -f[todo][..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = np.stack([_lstsq(j, -r) for j, r in zip(jac, f[todo])])

        scale = np.ones(step.shape[0])
        new_x = x[todo] + step
        new_f = residual(new_x)
        new_norm = np.linalg.norm(new_f, axis=-1)
        worse = ~(new_norm < norm[todo])
        while np.any(worse) and np.any(scale[worse] > min_step):
            scale[worse] /= 2
            new_x[worse] = x[todo][worse] + scale[worse, None] * step[worse]
            new_f[worse] = residual(new_x[worse])
            new_norm[worse] = np.linalg.norm(new_f[worse], axis=-1)
            worse = ~(new_norm < norm[todo]) & (scale > min_step)

        idx = np.flatnonzero(todo)
        x[idx] = new_x
        f[idx] = new_f
        norm[idx] = new_norm
        active[idx] = np.isfinite(new_norm)

    converged = active & (norm <= tol)
    logger.debug(f'Newton: {converged.sum()} of {len(x)} starts converged')
    return x, converged, norm


def _lstsq(jac, rhs):
    return np.linalg.lstsq(jac, rhs, rcond=None)[0]


def deduplicate(points, tol=1e-6):
    """Removes rows closer than ``tol`` to an earlier row

    :param numpy.ndarray points: Complex rows, shape (n, m)
    :param float tol: Distance threshold

    :return: Indices of the kept rows
    :rtype: list

    """
    kept = []
    for i, row in enumerate(points):
        if all(np.linalg.norm(row - points[j]) > tol for j in kept):
            kept.append(i)
    return kept
