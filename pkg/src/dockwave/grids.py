"""Finite-difference calculus on structured mapped grids.

All solver and interior meshes in this package are logically rectangular:
an array of physical node positions ``X[i, j] in R^2`` indexed by two grid
directions, the second one usually periodic. Cartesian derivatives of a
sampled field are obtained by differentiating in index space and applying
the inverse Jacobian of the index-to-physical map. Centered differences
inside, second-order one-sided stencils at non-periodic edges.
"""

import numpy as np


def index_derivative(f, axis, periodic):
    """d f / d(index) along one axis, second order, unit index spacing."""
    f = np.asarray(f, dtype=float)
    if periodic:
        return 0.5 * (np.roll(f, -1, axis=axis) - np.roll(f, 1, axis=axis))
    df = np.empty_like(f)
    inner = [slice(None)] * f.ndim
    lo = [slice(None)] * f.ndim
    hi = [slice(None)] * f.ndim

    inner[axis] = slice(1, -1)
    lo[axis] = slice(None, -2)
    hi[axis] = slice(2, None)
    df[tuple(inner)] = 0.5 * (f[tuple(hi)] - f[tuple(lo)])

    def take(k):
        idx = [slice(None)] * f.ndim
        idx[axis] = k
        return f[tuple(idx)]

    first = [slice(None)] * f.ndim
    first[axis] = 0
    df[tuple(first)] = -1.5 * take(0) + 2.0 * take(1) - 0.5 * take(2)
    last = [slice(None)] * f.ndim
    last[axis] = -1
    df[tuple(last)] = 1.5 * take(-1) - 2.0 * take(-2) + 0.5 * take(-3)
    return df


class MappedGrid:
    """Derivative operators for fields sampled at mapped node positions.

    Parameters
    ----------
    points : (ni, nj, 2) array of physical positions.
    periodic_axes : tuple of bools, periodicity of axis 0 and axis 1.
    """

    def __init__(self, points, periodic_axes=(False, True)):
        self.points = np.asarray(points, dtype=float)
        if self.points.ndim != 3 or self.points.shape[2] != 2:
            raise ValueError("points must have shape (ni, nj, 2)")
        self.periodic_axes = tuple(periodic_axes)
        x = self.points[..., 0]
        y = self.points[..., 1]
        x_a = index_derivative(x, 0, self.periodic_axes[0])
        x_b = index_derivative(x, 1, self.periodic_axes[1])
        y_a = index_derivative(y, 0, self.periodic_axes[0])
        y_b = index_derivative(y, 1, self.periodic_axes[1])
        self.jac_det = x_a * y_b - x_b * y_a
        if np.any(self.jac_det == 0.0):
            raise ValueError("singular grid mapping")
        # rows of the inverse Jacobian: d(index)/d(x, y)
        self._ax = y_b / self.jac_det
        self._ay = -x_b / self.jac_det
        self._bx = -y_a / self.jac_det
        self._by = x_a / self.jac_det

    def gradient(self, f):
        """Cartesian gradient (df/dx, df/dy) of a nodal scalar field."""
        f_a = index_derivative(f, 0, self.periodic_axes[0])
        f_b = index_derivative(f, 1, self.periodic_axes[1])
        return self._ax * f_a + self._bx * f_b, self._ay * f_a + self._by * f_b

    def divergence(self, fx, fy):
        dfx_dx, _ = self.gradient(fx)
        _, dfy_dy = self.gradient(fy)
        return dfx_dx + dfy_dy

    def curl(self, fx, fy):
        """Scalar curl d(fy)/dx - d(fx)/dy of a planar vector field."""
        dfy_dx, _ = self.gradient(fy)
        _, dfx_dy = self.gradient(fx)
        return dfy_dx - dfx_dy
