"""Periodic fields on the unit torus with spectral calculus.

Samples live at x_k = k/n.  A field array may have size 1 along any spatial
axis, which means "constant along that axis"; every operation here honours
that reduced storage without materializing the full grid.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BadExponent, OddDimension, TooFewSlices


@dataclass(frozen=True)
class GridSpec:
    d: int
    n: int
    n_t: int = 2
    t_end: float = 1.0

    def __post_init__(self):
        if self.d < 1 or self.d > 6:
            raise ValueError(f"dimension {self.d} outside 1..6")
        if self.n < 8 or self.n & (self.n - 1):
            raise ValueError(f"n={self.n} must be a power of two >= 8")
        if self.n_t < 2:
            raise ValueError("n_t must be >= 2")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")

    @property
    def dx(self):
        return 1.0 / self.n

    @property
    def dt(self):
        return self.t_end / (self.n_t - 1)

    @property
    def shape(self):
        return (self.n,) * self.d

    def times(self):
        return np.arange(self.n_t) * self.dt

    def axis_coords(self, i):
        """1-D coordinate array shaped to broadcast along spatial axis i."""
        shp = [1] * self.d
        shp[i] = self.n
        return (np.arange(self.n) / self.n).reshape(shp)

    def coords(self):
        return [self.axis_coords(i) for i in range(self.d)]


def _check_spatial(arr, grid, lead=0):
    if arr.ndim != grid.d + lead:
        raise ValueError(f"expected {grid.d + lead} axes, got shape {arr.shape}")
    for s in arr.shape[lead:]:
        if s not in (1, grid.n):
            raise ValueError(f"spatial axis of size {s} on an n={grid.n} grid")


@dataclass(frozen=True, eq=False)
class PeriodicScalarField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        _check_spatial(v, self.grid)
        object.__setattr__(self, "values", v)

    def full(self):
        return np.broadcast_to(self.values, self.grid.shape)

    def mean(self):
        return float(self.values.mean())

    def _wrap(self, v):
        return PeriodicScalarField(self.grid, v)

    def _other(self, o):
        return o.values if isinstance(o, PeriodicScalarField) else o

    def __add__(self, o):
        return self._wrap(self.values + self._other(o))

    __radd__ = __add__

    def __sub__(self, o):
        return self._wrap(self.values - self._other(o))

    def __rsub__(self, o):
        return self._wrap(self._other(o) - self.values)

    def __mul__(self, o):
        return self._wrap(self.values * self._other(o))

    __rmul__ = __mul__

    def __neg__(self):
        return self._wrap(-self.values)


@dataclass(frozen=True, eq=False)
class PeriodicVectorField:
    grid: GridSpec
    components: tuple

    def __post_init__(self):
        comps = tuple(np.asarray(c, dtype=float) for c in self.components)
        if len(comps) != self.grid.d:
            raise ValueError(f"need {self.grid.d} components, got {len(comps)}")
        for c in comps:
            _check_spatial(c, self.grid)
        object.__setattr__(self, "components", comps)

    def __getitem__(self, i):
        return PeriodicScalarField(self.grid, self.components[i])

    def magnitude(self):
        return np.sqrt(sum(c * c for c in self.components))

    def mean(self):
        return np.array([c.mean() for c in self.components])

    def __add__(self, o):
        return PeriodicVectorField(self.grid, tuple(a + b for a, b in zip(self.components, o.components)))

    def __sub__(self, o):
        return PeriodicVectorField(self.grid, tuple(a - b for a, b in zip(self.components, o.components)))

    def __neg__(self):
        return PeriodicVectorField(self.grid, tuple(-a for a in self.components))

    def scale(self, s):
        """Multiply by a scalar or a scalar field's values."""
        s = s.values if isinstance(s, PeriodicScalarField) else s
        return PeriodicVectorField(self.grid, tuple(s * a for a in self.components))

    @classmethod
    def zeros(cls, grid):
        z = np.zeros((1,) * grid.d)
        return cls(grid, (z,) * grid.d)


@dataclass(frozen=True, eq=False)
class TimeField:
    """Samples at t_j = j*t_end/(n_t-1).

    ``data`` is an array with a leading time axis for scalars, or a tuple of
    such arrays (one per component) for vectors.
    """
    grid: GridSpec
    data: object

    def __post_init__(self):
        if isinstance(self.data, (tuple, list)):
            comps = tuple(np.asarray(c, dtype=float) for c in self.data)
            if len(comps) != self.grid.d:
                raise ValueError("vector TimeField needs d components")
            for c in comps:
                _check_spatial(c, self.grid, lead=1)
                if c.shape[0] != self.grid.n_t:
                    raise ValueError("time axis length must equal n_t")
            object.__setattr__(self, "data", comps)
        else:
            a = np.asarray(self.data, dtype=float)
            _check_spatial(a, self.grid, lead=1)
            if a.shape[0] != self.grid.n_t:
                raise ValueError("time axis length must equal n_t")
            object.__setattr__(self, "data", a)

    @property
    def is_vector(self):
        return isinstance(self.data, tuple)

    def slice(self, j):
        if self.is_vector:
            return PeriodicVectorField(self.grid, tuple(c[j] for c in self.data))
        return PeriodicScalarField(self.grid, self.data[j])

    def arrays(self):
        return self.data if self.is_vector else (self.data,)

    @classmethod
    def from_slices(cls, grid, slices):
        if isinstance(slices[0], PeriodicVectorField):
            comps = []
            for i in range(grid.d):
                parts = [s.components[i] for s in slices]
                shp = np.broadcast_shapes(*(p.shape for p in parts))
                comps.append(np.stack([np.broadcast_to(p, shp) for p in parts]))
            return cls(grid, tuple(comps))
        parts = [s.values for s in slices]
        shp = np.broadcast_shapes(*(p.shape for p in parts))
        return cls(grid, np.stack([np.broadcast_to(p, shp) for p in parts]))


# ---------------------------------------------------------------- spectral core

def _wavenumbers(n):
    return 2 * np.pi * np.fft.fftfreq(n, d=1.0 / n)


def deriv_array(a, d, i, order=1):
    """Spectral derivative of raw samples along spatial axis i (of the last d axes)."""
    ax = a.ndim - d + i
    if a.shape[ax] == 1:
        return np.zeros_like(a)
    n = a.shape[ax]
    k = 2 * np.pi * np.fft.rfftfreq(n, d=1.0 / n)
    mult = (1j * k) ** order
    if order % 2 == 1:
        mult[-1] = 0.0  # Nyquist
    shp = [1] * a.ndim
    shp[ax] = mult.size
    ahat = np.fft.rfft(a, axis=ax) * mult.reshape(shp)
    return np.fft.irfft(ahat, n=n, axis=ax)


def _fourier_grids(a, d):
    """Transform over the non-constant spatial axes; returns (ahat, axes, kdict)."""
    off = a.ndim - d
    axes = [off + i for i in range(d) if a.shape[off + i] > 1]
    if not axes:
        return None, axes, {}
    ahat = np.fft.rfftn(a, axes=axes)
    kd = {}
    for ax in axes:
        n = a.shape[ax]
        if ax == axes[-1]:
            k = 2 * np.pi * np.fft.rfftfreq(n, d=1.0 / n)
        else:
            k = _wavenumbers(n)
        shp = [1] * a.ndim
        shp[ax] = k.size
        kd[ax] = k.reshape(shp)
    return ahat, axes, kd


def _nyquist_mask(kd, ax, n):
    return np.abs(np.abs(kd[ax]) - np.pi * n) < 1e-9


def grad_inv_laplacian_array(a, d):
    """Components of grad Delta^{-1} a (zero mode dropped), as raw arrays."""
    ahat, axes, kd = _fourier_grids(a, d)
    off = a.ndim - d
    out = []
    if not axes:
        return [np.zeros_like(a) for _ in range(d)]
    k2 = sum(k * k for k in kd.values())
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(k2 > 0, -1.0 / k2, 0.0)
    shape = [a.shape[ax] for ax in axes]
    for i in range(d):
        ax = off + i
        if ax not in axes:
            out.append(np.zeros_like(a))
            continue
        n = a.shape[ax]
        mult = 1j * kd[ax] * inv
        mult = np.where(_nyquist_mask(kd, ax, n), 0.0, mult)
        out.append(np.fft.irfftn(ahat * mult, s=shape, axes=axes))
    return out


def inv_laplacian_array(a, d):
    ahat, axes, kd = _fourier_grids(a, d)
    if not axes:
        return np.zeros_like(a)
    k2 = sum(k * k for k in kd.values())
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(k2 > 0, -1.0 / k2, 0.0)
    return np.fft.irfftn(ahat * inv, s=[a.shape[ax] for ax in axes], axes=axes)


def compose_scale_array(a, d, lam):
    """Samples of g(lam*x) from samples of g, for integer lam."""
    lam = int(lam)
    off = a.ndim - d
    out = a
    for i in range(d):
        ax = off + i
        n = a.shape[ax]
        if n == 1:
            continue
        idx = (lam * np.arange(n)) % n
        out = np.take(out, idx, axis=ax)
    return out


# ---------------------------------------------------------------- public ops

def gradient(f):
    g = f.grid
    return PeriodicVectorField(g, tuple(deriv_array(f.values, g.d, i) for i in range(g.d)))


def divergence(v):
    g = v.grid
    out = 0.0
    for i, c in enumerate(v.components):
        out = out + deriv_array(c, g.d, i)
    if np.isscalar(out):
        out = np.zeros((1,) * g.d)
    return PeriodicScalarField(g, out)


def laplacian(f):
    g = f.grid
    out = sum(deriv_array(f.values, g.d, i, 2) for i in range(g.d))
    return PeriodicScalarField(g, out)


def J_components(comps):
    d = len(comps)
    if d % 2:
        raise OddDimension(f"J needs an even dimension, got d={d}")
    h = d // 2
    return tuple(comps[h:]) + tuple(-c for c in comps[:h])


def apply_J(v):
    return PeriodicVectorField(v.grid, J_components(v.components))


def symplectic_gradient(H):
    """J grad H, the Hamiltonian vector field of H."""
    return apply_J(gradient(H))


def _check_p(p):
    if not (p == np.inf or p >= 1):
        raise BadExponent(f"p={p} must be >= 1 or inf")


def _lp_of_array(a, p, d):
    a = np.abs(a)
    axes = tuple(range(a.ndim - d, a.ndim))
    if p == np.inf:
        return np.max(a, axis=axes) if a.ndim > d else float(a.max())
    m = np.mean(a ** p, axis=axes)
    return m ** (1.0 / p) if a.ndim > d else float(m ** (1.0 / p))


def lp_norm(f, p):
    """Discrete L^p norm with weights n^{-d}; vectors use pointwise Euclidean length.

    For a TimeField this is the maximum over time slices.
    """
    _check_p(p)
    if isinstance(f, TimeField):
        if f.is_vector:
            mag = np.sqrt(sum(c * c for c in f.data))
        else:
            mag = f.data
        return float(np.max(_lp_of_array(mag, p, f.grid.d)))
    if isinstance(f, PeriodicVectorField):
        return _lp_of_array(f.magnitude(), p, f.grid.d)
    return _lp_of_array(f.values, p, f.grid.d)


def _derivative_tensor_norm2(arrs, d, order):
    """Squared Frobenius norm of the order-th derivative tensor of each array."""
    total = 0.0
    for combo in itertools.combinations_with_replacement(range(d), order):
        counts = np.bincount(np.array(combo, dtype=int), minlength=d) if combo else np.zeros(d, int)
        mult = math.factorial(order) / np.prod([math.factorial(c) for c in counts])
        for a in arrs:
            b = a
            for i in combo:
                b = deriv_array(b, d, i)
            total = total + mult * b * b
    return total


def sobolev_norm(f, k, p):
    """Sum over orders j <= k of the L^p norm of the j-th derivative tensor."""
    _check_p(p)
    if k < 0:
        raise ValueError("k must be >= 0")
    d = f.grid.d
    arrs = f.components if isinstance(f, PeriodicVectorField) else (f.values,)
    total = 0.0
    for j in range(k + 1):
        mag = np.sqrt(_derivative_tensor_norm2(arrs, d, j))
        total += _lp_of_array(mag, p, d)
    return float(total)


_FD_INTERIOR = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_FD_EDGE0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
_FD_EDGE1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0


def time_derivative_array(a, dt):
    nt = a.shape[0]
    if nt < 5:
        raise TooFewSlices(f"4th-order time stencils need n_t >= 5, got {nt}")
    out = np.empty_like(a)
    out[2:-2] = sum(c * a[j:nt - 4 + j] for j, c in enumerate(_FD_INTERIOR) if c)
    out[0] = sum(c * a[j] for j, c in enumerate(_FD_EDGE0))
    out[1] = sum(c * a[j] for j, c in enumerate(_FD_EDGE1))
    out[-1] = -sum(c * a[nt - 1 - j] for j, c in enumerate(_FD_EDGE0))
    out[-2] = -sum(c * a[nt - 1 - j] for j, c in enumerate(_FD_EDGE1))
    return out / dt


def time_derivative(F):
    dt = F.grid.dt
    if F.is_vector:
        return TimeField(F.grid, tuple(time_derivative_array(c, dt) for c in F.data))
    return TimeField(F.grid, time_derivative_array(F.data, dt))


def spectral_coefficients(f):
    """Normalized DFT coefficients of the full sample array (mean is the zero mode)."""
    return np.fft.fftn(f.full()) / f.grid.n ** f.grid.d
