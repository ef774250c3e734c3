"""Discrete differential operators, projections, and prior gradients.

Gradients are forward differences with replicate (Neumann) boundary: the
last column of dx and last row of dy are exactly zero. ``div`` is the
negative adjoint of ``grad``, so <grad p, g> = -<p, div g> holds exactly
and div(grad(p)) is minus the 5-point Neumann Laplacian.
"""

import numpy as np


def grad(p):
    """Forward differences (dx, dy) of a plane, zero at the far boundary."""
    p = np.asarray(p, dtype=np.float64)
    dx = np.zeros_like(p)
    dy = np.zeros_like(p)
    dx[:, :-1] = p[:, 1:] - p[:, :-1]
    dy[:-1, :] = p[1:, :] - p[:-1, :]
    return dx, dy


def div(g):
    """Negative adjoint of grad: <grad p, g> = -<p, div g>."""
    gx, gy = g
    gx = np.asarray(gx, dtype=np.float64)
    gy = np.asarray(gy, dtype=np.float64)
    out = np.zeros_like(gx)
    # horizontal: backward difference of gx, one-sided at the edges;
    # a 1-wide plane has a zero gradient map, hence a zero adjoint
    if gx.shape[1] > 1:
        out[:, 0] += gx[:, 0]
        out[:, 1:-1] += gx[:, 1:-1] - gx[:, :-2]
        out[:, -1] += -gx[:, -2]
    if gy.shape[0] > 1:
        out[0, :] += gy[0, :]
        out[1:-1, :] += gy[1:-1, :] - gy[:-2, :]
        out[-1, :] += -gy[-2, :]
    return out


def laplacian(p):
    """Apply grad-transpose-grad (the SPD Neumann Laplacian) to a plane."""
    return -div(grad(p))


def project_box(p, lo, hi):
    """Pixelwise clamp of p onto [lo, hi]; bounds may be scalars or planes."""
    p = np.asarray(p, dtype=np.float64)
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    for b in (lo, hi):
        if b.ndim != 0 and b.shape != p.shape:
            raise ValueError(f"bound shape {b.shape} != plane shape {p.shape}")
    if np.any(lo > hi):
        raise ValueError("lower bound exceeds upper bound")
    return np.clip(p, lo, hi)


def log_potential(g, theta):
    """Edge-preserving penalty sum(log(1 + theta*s^2)) over both gradient planes."""
    if theta <= 0:
        raise ValueError(f"theta must be positive, got {theta}")
    gx, gy = g
    return float(
        np.sum(np.log1p(theta * np.square(gx)))
        + np.sum(np.log1p(theta * np.square(gy)))
    )


def log_potential_grad(R, theta):
    """Exact gradient of log_potential(grad(R), theta) with respect to R."""
    if theta <= 0:
        raise ValueError(f"theta must be positive, got {theta}")
    dx, dy = grad(R)
    wx = 2.0 * theta * dx / (1.0 + theta * np.square(dx))
    wy = 2.0 * theta * dy / (1.0 + theta * np.square(dy))
    return -div((wx, wy))
