"""Time-dependent confining potentials and drift models.

All spatial arguments are arrays of shape (..., d); time is a scalar.
Gradients have the same shape as the input, Hessians shape (..., d, d).
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import Unsupported


class Potential:
    """Abstract time-dependent potential U_t(q)."""

    def value(self, t: float, q: np.ndarray) -> np.ndarray:
        raise Unsupported(f"{type(self).__name__} provides no potential value")

    def grad(self, t: float, q: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, t: float, q: np.ndarray) -> np.ndarray:
        raise Unsupported(f"{type(self).__name__} provides no Hessian")

    def dt_value(self, t: float, q: np.ndarray) -> np.ndarray:
        raise Unsupported(f"{type(self).__name__} provides no time derivative")


class ZeroPotential(Potential):
    def value(self, t, q):
        return np.zeros(q.shape[:-1])

    def grad(self, t, q):
        return np.zeros_like(q)

    def hessian(self, t, q):
        d = q.shape[-1]
        return np.zeros(q.shape[:-1] + (d, d))

    def dt_value(self, t, q):
        return np.zeros(q.shape[:-1])


class QuadraticMatrix(Potential):
    """U_t(q) = q . M_t q / 2 for a symmetric stiffness matrix M_t.

    `matrix` is either a constant (d, d) array (scalars are promoted to 1x1)
    or a callable t -> (d, d) array.
    """

    def __init__(self, matrix, dmatrix_dt=None):
        self._callable = callable(matrix)
        if not self._callable:
            matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        self._m = matrix
        self._dm = dmatrix_dt

    def _mat(self, t):
        return np.atleast_2d(np.asarray(self._m(t), dtype=float)) if self._callable else self._m

    def value(self, t, q):
        m = self._mat(t)
        return 0.5 * np.einsum("...i,ij,...j->...", q, m, q)

    def grad(self, t, q):
        return q @ self._mat(t).T

    def hessian(self, t, q):
        m = self._mat(t)
        return np.broadcast_to(m, q.shape[:-1] + m.shape).copy()

    def dt_value(self, t, q):
        if not self._callable:
            return np.zeros(q.shape[:-1])
        if self._dm is None:
            raise Unsupported("time-dependent stiffness needs dmatrix_dt")
        dm = np.atleast_2d(np.asarray(self._dm(t), dtype=float))
        return 0.5 * np.einsum("...i,ij,...j->...", q, dm, q)


class _Separable(Potential):
    """Potential built componentwise from a scalar profile u(x)."""

    def _u(self, x):
        raise NotImplementedError

    def _du(self, x):
        raise NotImplementedError

    def _d2u(self, x):
        raise NotImplementedError

    def value(self, t, q):
        return self._u(q).sum(axis=-1)

    def grad(self, t, q):
        return self._du(q)

    def hessian(self, t, q):
        d = q.shape[-1]
        h = np.zeros(q.shape[:-1] + (d, d))
        idx = np.arange(d)
        h[..., idx, idx] = self._d2u(q)
        return h

    def dt_value(self, t, q):
        return np.zeros(q.shape[:-1])


class QuarticShift(_Separable):
    """U(q) = (q - 1)^4 / 4, summed over components."""

    def _u(self, x):
        return 0.25 * (x - 1.0) ** 4

    def _du(self, x):
        return (x - 1.0) ** 3

    def _d2u(self, x):
        return 3.0 * (x - 1.0) ** 2


class DoubleWell(_Separable):
    """U(q) = (q^2 - 1)^2 / 4, summed over components."""

    def _u(self, x):
        return 0.25 * (x * x - 1.0) ** 2

    def _du(self, x):
        return (x * x - 1.0) * x

    def _d2u(self, x):
        return 3.0 * x * x - 1.0


class MonomialGrad(_Separable):
    """U(q) = q^4 / 2, i.e. gradient 2 q^3."""

    def _u(self, x):
        return 0.5 * x ** 4

    def _du(self, x):
        return 2.0 * x ** 3

    def _d2u(self, x):
        return 6.0 * x * x


class TabulatedDrift(Potential):
    """Drift gradient tabulated on a (time, space) grid; 1-D space only.

    Linear interpolation in time between slices, monotone cubic in space,
    clamped to the boundary value outside the spatial table. Only the
    gradient and its spatial derivative (Hessian) are available.
    """

    def __init__(self, times: np.ndarray, qgrid: np.ndarray, drift: np.ndarray):
        times = np.asarray(times, dtype=float)
        qgrid = np.asarray(qgrid, dtype=float)
        drift = np.asarray(drift, dtype=float)
        if drift.shape != (times.size, qgrid.size):
            raise ValueError("drift must have shape (n_times, n_q)")
        self.times = times
        self.qgrid = qgrid
        self.drift = drift
        self._interp = [PchipInterpolator(qgrid, row, extrapolate=False) for row in drift]
        self._dinterp = [f.derivative() for f in self._interp]

    def _time_weights(self, t):
        k = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, self.times.size - 2))
        w = (t - self.times[k]) / (self.times[k + 1] - self.times[k])
        return k, float(np.clip(w, 0.0, 1.0))

    def _eval(self, fns, t, x):
        k, w = self._time_weights(t)
        xc = np.clip(x, self.qgrid[0], self.qgrid[-1])
        lo = fns[k](xc)
        hi = fns[k + 1](xc)
        return (1.0 - w) * lo + w * hi

    def grad(self, t, q):
        if q.shape[-1] != 1:
            raise Unsupported("TabulatedDrift supports d=1 only")
        return self._eval(self._interp, t, q[..., 0])[..., None]

    def hessian(self, t, q):
        if q.shape[-1] != 1:
            raise Unsupported("TabulatedDrift supports d=1 only")
        x = q[..., 0]
        d2 = self._eval(self._dinterp, t, x)
        # clamped extension is constant outside the table
        outside = (x < self.qgrid[0]) | (x > self.qgrid[-1])
        d2 = np.where(outside, 0.0, d2)
        return d2[..., None, None]


class NetworkDrift(Potential):
    """Drift gradient parametrized by a feed-forward network; 1-D space only."""

    def __init__(self, net):
        self.net = net

    def grad(self, t, q):
        if q.shape[-1] != 1:
            raise Unsupported("NetworkDrift supports d=1 only")
        x = q[..., 0]
        out = self.net.forward(np.full(x.size, t), x.ravel())
        return out.reshape(x.shape)[..., None]

    def hessian(self, t, q):
        if q.shape[-1] != 1:
            raise Unsupported("NetworkDrift supports d=1 only")
        x = q[..., 0]
        d = self.net.input_space_grad(np.full(x.size, t), x.ravel())
        return d.reshape(x.shape)[..., None, None]
