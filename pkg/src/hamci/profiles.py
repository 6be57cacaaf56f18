"""Smooth compactly supported profiles, cutoffs and the space-time mollifier."""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.special import expit, gamma as gamma_fn

from .errors import BadRho, EllTooSmallForGrid


def _check_rho(rho):
    if not 0 < rho < 0.25:
        raise BadRho(f"rho={rho} outside (0, 1/4)")


# -------------------------------------------------------------- smooth step

def smoothstep(s, nderiv=0):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1, and its derivatives.

    Written as a logistic of v = 1/s - 1/(1-s), which avoids 0/0 near the ends.
    Returns a tuple (g, g', g'') truncated to nderiv+1 entries.
    """
    s = np.asarray(s, dtype=float)
    inside = (s > 0) & (s < 1)
    si = np.where(inside, s, 0.5)
    with np.errstate(over="ignore", divide="ignore"):
        v = 1.0 / si - 1.0 / (1.0 - si)
        L = expit(-v)
        Lc = expit(v)
    g = np.where(inside, L, np.where(s >= 1, 1.0, 0.0))
    out = [g]
    if nderiv >= 1:
        dv = -1.0 / si ** 2 - 1.0 / (1.0 - si) ** 2
        L1 = -L * Lc
        out.append(np.where(inside, L1 * dv, 0.0))
        if nderiv >= 2:
            d2v = 2.0 / si ** 3 - 2.0 / (1.0 - si) ** 3
            L2 = L * Lc * (1.0 - 2.0 * L)
            out.append(np.where(inside, L2 * dv * dv + L1 * d2v, 0.0))
    return tuple(out)


def step_S(tau, nderiv=0):
    """Non-increasing step, 1 on (-inf,-1/4], 0 on [1/4,inf)."""
    g = smoothstep(0.5 - 2.0 * np.asarray(tau, dtype=float), nderiv)
    return tuple(gk * (-2.0) ** k for k, gk in enumerate(g))


def eval_chi(tau, nderiv=0):
    """Partition-of-unity profile chi(tau) = S(tau-1/2) - S(tau+1/2) (and chi')."""
    tau = np.asarray(tau, dtype=float)
    a = step_S(tau - 0.5, nderiv)
    b = step_S(tau + 0.5, nderiv)
    out = tuple(x - y for x, y in zip(a, b))
    return out[0] if nderiv == 0 else out


def eval_chi0(t, nderiv=0):
    """Time cutoff: 1 on [0,1/3], 0 on [2/3,1]; optionally with derivatives."""
    g = smoothstep(2.0 - 3.0 * np.asarray(t, dtype=float), nderiv)
    out = tuple(gk * (-3.0) ** k for k, gk in enumerate(g))
    return out[0] if nderiv == 0 else out


# -------------------------------------------------------------- bump / phi

def bump(s):
    """exp(-1/(1-s^2)) on |s| < 1, zero outside."""
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1
    si = np.where(inside, s, 0.0)
    return np.where(inside, np.exp(-1.0 / (1.0 - si * si)), 0.0)


def bump_deriv(s):
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1
    si = np.where(inside, s, 0.0)
    q = 1.0 - si * si
    return np.where(inside, np.exp(-1.0 / q) * (-2.0 * si / (q * q)), 0.0)


@functools.lru_cache(maxsize=None)
def radial_bump_mass(m):
    """Integral over the unit ball of R^m of bump(|y|)."""
    area = 2.0 * math.pi ** (m / 2) / gamma_fn(m / 2)
    val, _ = quad(lambda r: math.exp(-1.0 / (1.0 - r * r)) * r ** (m - 1), 0.0, 1.0,
                  epsabs=1e-15, epsrel=1e-14, limit=200)
    return area * val


def eval_phi(x, rho):
    """Normalized radial bump on B_rho in R^m; x has shape (..., m)."""
    _check_rho(rho)
    x = np.asarray(x, dtype=float)
    m = x.shape[-1]
    r = np.sqrt((x * x).sum(-1))
    return bump(r / rho) / (radial_bump_mass(m) * rho ** m)


def phi_radial(r, rho, m):
    """phi as a function of |x| (avoids building coordinate stacks)."""
    return bump(r / rho) / (radial_bump_mass(m) * rho ** m)


def phi_radial_deriv(r, rho, m):
    return bump_deriv(r / rho) / (radial_bump_mass(m) * rho ** (m + 1))


# -------------------------------------------------------------- psi

def eta(r, rho, nderiv=0):
    """Radial cutoff, 1 on [0,rho], 0 on [2rho,inf)."""
    g = smoothstep((2.0 * rho - np.asarray(r, dtype=float)) / rho, nderiv)
    return tuple(gk * (-1.0 / rho) ** k for k, gk in enumerate(g))


def eval_psi(x, rho):
    """psi(x) = x_1 eta(|x|); equals x_1 on B_rho, vanishes outside B_{2rho}."""
    _check_rho(rho)
    x = np.asarray(x, dtype=float)
    r = np.sqrt((x * x).sum(-1))
    return x[..., 0] * eta(r, rho)[0]


def psi_parts(ys, rho, order=1):
    """psi, its gradient and (order 2) Hessian from a list of coordinate arrays.

    ``ys`` are broadcastable arrays for y_1..y_m.  The gradient is a list of m
    arrays, the Hessian a dict keyed by (i, j) with i <= j.
    """
    m = len(ys)
    r2 = sum(y * y for y in ys)
    r = np.sqrt(r2)
    e = eta(r, rho, nderiv=order)
    psi = ys[0] * e[0]
    out = {"psi": psi}
    if order >= 1:
        rs = np.where(r > 0, r, 1.0)
        de_r = np.where(r > 0, e[1] / rs, 0.0)  # eta'(r)/r, zero near the origin
        out["grad"] = [(e[0] if i == 0 else 0.0) + ys[0] * de_r * ys[i] for i in range(m)]
        if order >= 2:
            # d/dy_j (eta'(r) y_i / r) = (eta'' - eta'/r) y_i y_j / r^2 + eta'/r delta_ij
            c2 = np.where(r > 0, (e[2] - e[1] / rs) / (rs * rs), 0.0)
            hess = {}
            for i in range(m):
                for j in range(i, m):
                    val = ys[0] * (c2 * ys[i] * ys[j] + (de_r if i == j else 0.0))
                    if i == 0:
                        val = val + de_r * ys[j]
                    if j == 0:
                        val = val + de_r * ys[i]
                    hess[(i, j)] = val
            out["hess"] = hess
    return out


# -------------------------------------------------------------- mollifier

@dataclass(eq=False)
class MollifierKernel:
    """Product kernel ell^{-(d+1)} Phi(t/ell) Phi_d(x/ell), discretely unit mass.

    ``weights`` is the spatial kernel times dx^d (sums to one); ``time_weights``
    and ``dtime_weights`` hold K(m dt) dt and K'(m dt) dt for the offsets
    ``time_offsets``.
    """
    ell: float
    grid: object
    weights: np.ndarray
    time_offsets: np.ndarray
    time_weights: np.ndarray
    dtime_weights: np.ndarray
    _hat_cache: dict = field(default_factory=dict)

    def _hat(self, active):
        key = tuple(active)
        if key not in self._hat_cache:
            d = self.grid.d
            drop = tuple(i for i in range(d) if i not in active)
            w = self.weights.sum(axis=drop, keepdims=True) if drop else self.weights
            axes = list(active)
            self._hat_cache[key] = np.fft.rfftn(w, axes=axes)
        return self._hat_cache[key]

    def apply_space(self, a):
        """Periodic convolution over the last d axes of a (reduced axes allowed)."""
        d = self.grid.d
        off = a.ndim - d
        active = [i for i in range(d) if a.shape[off + i] > 1]
        if not active:
            return a.copy()
        axes = [off + i for i in active]
        khat = self._hat(active)
        khat = khat.reshape((1,) * off + khat.shape)
        ahat = np.fft.rfftn(a, axes=axes)
        return np.fft.irfftn(ahat * khat, s=[a.shape[ax] for ax in axes], axes=axes)

    def apply_time(self, a, weights=None, extend="clamp"):
        """Discrete convolution along axis 0 with constant or zero extension."""
        w = self.time_weights if weights is None else weights
        nt = a.shape[0]
        out = np.zeros(a.shape, dtype=float)
        for m, wm in zip(self.time_offsets, w):
            if wm == 0.0:
                continue
            idx = np.arange(nt) - m
            if extend == "clamp":
                out += wm * a[np.clip(idx, 0, nt - 1)]
            else:
                ok = (idx >= 0) & (idx < nt)
                out[ok] += wm * a[idx[ok]]
        return out

    def apply(self, a, extend="clamp"):
        return self.apply_space(self.apply_time(a, extend=extend))

    def apply_dt(self, a):
        """Time derivative of the space-time mollification (derivative on the kernel)."""
        return self.apply_space(self.apply_time(a, self.dtime_weights))


def mollifier_kernel(ell, grid):
    if not (ell > 2.0 / grid.n and ell > 2.0 * grid.dt):
        raise EllTooSmallForGrid(
            f"ell={ell:.4g} needs > 2 spacings (dx={grid.dx:.4g}, dt={grid.dt:.4g})")
    if ell >= 0.5:
        raise EllTooSmallForGrid(f"ell={ell} wraps the unit torus")
    d, n = grid.d, grid.n
    r2 = 0.0
    for i in range(d):
        x = grid.axis_coords(i)
        x = np.minimum(x, 1.0 - x)
        r2 = r2 + x * x
    K = bump(np.sqrt(r2) / ell)
    K = K / K.sum()
    M = int(np.ceil(ell / grid.dt))
    offs = np.arange(-M, M + 1)
    s = offs * grid.dt / ell
    kt = bump(s)
    c = 1.0 / kt.sum()
    return MollifierKernel(ell, grid, K, offs, kt * c, bump_deriv(s) * c / ell)
