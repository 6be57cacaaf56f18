"""Autonomous building blocks Theta, H and X = J grad H.

Each block depends only on the d-1 coordinates transverse to its direction, so
samples are stored with a size-1 axis along xi.  Theta and the chain-rule field
X are evaluated in closed form, which keeps their supports exactly compact on
the grid.  The spectral Hamiltonian field J grad_h H is kept alongside as the
cross-check.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import profiles
from .errors import GridUnderResolved
from .field import (GridSpec, PeriodicScalarField, PeriodicVectorField, J_components,
                    deriv_array, symplectic_gradient)


def dual(p):
    return p / (p - 1.0)


def _wrap(u):
    return (u + 0.5) % 1.0 - 0.5


def transverse_coords(ds, idx, n, lam=1):
    """Wrapped block coordinates y_k = xi_k . (lam x - v) as broadcastable arrays.

    Returns a list of (axis, sign, y) for the frame slots xi_perp, xi_1, ...
    """
    d = ds.d
    v = [float(c) for c in ds.offsets[idx]]
    out = []
    for ax, sgn in ds.frame_axes(idx):
        shp = [1] * d
        shp[ax] = n
        x = np.arange(n) / n
        y = sgn * _wrap(lam * x - v[ax])
        out.append((ax, sgn, y.reshape(shp)))
    return out


@dataclass(eq=False)
class BlockSample:
    """Reduced samples of one block at concentration mu, frequency lam."""
    idx: int
    theta: np.ndarray       # sigma = 1
    ham: np.ndarray         # H(lam x) (no 1/lam factor)
    X: tuple                # chain-rule X(lam x), d arrays
    theta_norm_factor: float


def sample_block(ds, idx, mu, p, n, lam=1, normalize="discrete"):
    """Closed-form samples of Theta_{xi,mu,1}(lam x), H_{xi,mu}(lam x), X(lam x).

    With ``normalize="discrete"`` the Theta samples are rescaled so that their
    grid mean equals the continuum value mu^{-(d-1)/p'}; this makes the
    rectangle-rule identity  mean(X Theta) = xi  hold to roundoff.
    """
    d, rho = ds.d, ds.rho
    m = d - 1
    pp = dual(p)
    coords = transverse_coords(ds, idx, n, lam)
    ys = [mu * y for _, _, y in coords]
    r = np.sqrt(sum(y * y for y in ys))
    phi = profiles.phi_radial(r, rho, m)
    theta = mu ** (m / p) * phi
    factor = 1.0
    if normalize == "discrete":
        mean = theta.mean()
        if mean <= 0:
            raise GridUnderResolved(
                f"block {idx}: no grid point inside the Theta support (radius {rho / (mu * lam):.3g}, dx {1 / n:.3g})")
        factor = mu ** (-m / pp) / mean
        theta = theta * factor
    parts = profiles.psi_parts(ys, rho, order=1)
    amp = mu ** (m / pp)
    ham = amp / mu * parts["psi"]
    grad = [np.zeros((1,) * d) for _ in range(d)]
    for (ax, sgn, _), g in zip(coords, parts["grad"]):
        grad[ax] = grad[ax] + sgn * amp * np.asarray(g)
    full_shape = tuple(1 if k == ds.axis(idx)[0] else n for k in range(d))
    grad = [np.broadcast_to(g, full_shape) if g.ndim and g.size > 1 else g for g in grad]
    X = J_components(tuple(np.ascontiguousarray(g) for g in grad))
    return BlockSample(idx, theta, ham, X, factor)


@dataclass(eq=False)
class BlockFamily:
    ds: object
    mu: float
    sigma: float
    p: float
    grid: GridSpec
    blocks: list = field(default_factory=list)

    @property
    def p_prime(self):
        return dual(self.p)

    def Theta(self, i):
        return PeriodicScalarField(self.grid, self.sigma * self.blocks[i].theta)

    def Ham(self, i):
        return PeriodicScalarField(self.grid, self.blocks[i].ham)

    def X(self, i):
        """Chain-rule field, exactly compactly supported on the grid."""
        return PeriodicVectorField(self.grid, self.blocks[i].X)

    def X_spectral(self, i):
        """J grad_h H with the spectral gradient; divergence free by construction."""
        return symplectic_gradient(self.Ham(i))


def build_block_family(ds, mu, sigma, p, grid):
    if mu < ds.mu0:
        raise ValueError(f"mu={mu} below mu0={ds.mu0:.4g}")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    pts = grid.n * ds.rho / mu
    if pts < 2:
        raise GridUnderResolved(f"Theta radius covers {pts:.2f} < 2 grid points")
    if pts < 8:
        warnings.warn(f"Theta radius covers only {pts:.2f} grid points (8 recommended)", stacklevel=2)
    bf = BlockFamily(ds, mu, sigma, p, grid)
    for i in range(len(ds)):
        bf.blocks.append(sample_block(ds, i, mu, p, grid.n))
    return bf


def mean_product(a, b, d):
    """Grid mean of a*b for reduced arrays without forming the full product."""
    n = max(max(a.shape), max(b.shape))
    fac = 1.0
    for ax in range(d):
        sa, sb = a.shape[ax], b.shape[ax]
        if sa == 1 and sb == 1:
            continue
        if sa == 1:
            b = b.sum(axis=ax, keepdims=True)
            fac /= n
        elif sb == 1:
            a = a.sum(axis=ax, keepdims=True)
            fac /= n
    return float((a * b).mean() * fac)


def _rel_div(comps, d):
    div = sum(deriv_array(c, d, i) for i, c in enumerate(comps))
    scale = sum(np.abs(deriv_array(c, d, i)).max() for i, c in enumerate(comps))
    if np.isscalar(div) or scale == 0:
        return 0.0
    return float(np.abs(div).max() / scale)


def verify_block_lemma(bf):
    """Residuals of the block identities, one entry per direction plus overlaps.

    div X and the mean of X are evaluated on the spectral Hamiltonian field;
    div(X Theta), mean(X Theta) and the overlaps on the chain-rule field.
    """
    ds, d = bf.ds, bf.ds.d
    rep = {"per_xi": [], "overlaps": {}, "mu": bf.mu}
    mags_X = []
    mags_T = []
    for i, blk in enumerate(bf.blocks):
        xi = ds.as_array()[i]
        Xs = bf.X_spectral(i).components
        Xc = blk.X
        th = bf.sigma * blk.theta
        xnorm = max(np.abs(c).max() for c in Xs)
        XT = tuple(c * th for c in Xc)
        avg = np.array([mean_product(c, th, d) for c in Xc])
        cross = max(np.abs(np.broadcast_to(a, np.broadcast_shapes(a.shape, b.shape))
                           - np.broadcast_to(b, np.broadcast_shapes(a.shape, b.shape))).max()
                    for a, b in zip(Xc, Xs))
        magX = np.sqrt(sum(np.broadcast_to(c, th.shape) ** 2 for c in Xc))
        # support radii checks on the transverse distance
        coords = transverse_coords(ds, i, bf.grid.n)
        r = np.sqrt(sum(y * y for _, _, y in coords))
        th_out = float(np.abs(th[r >= ds.rho / bf.mu]).max(initial=0.0))
        x_out = float(magX[r >= 2 * ds.rho / bf.mu].max(initial=0.0))
        rep["per_xi"].append({
            "xi": xi,
            "div_X": _rel_div(Xs, d),
            "mean_X": float(max(abs(c.mean()) for c in Xs) / xnorm),
            "div_XTheta": _rel_div(XT, d),
            "avg_XTheta_err": float(np.linalg.norm(avg - bf.sigma * xi) / bf.sigma),
            "X_vs_spectral": float(cross / xnorm),
            "div_X_chain": _rel_div(Xc, d),
            "theta_outside": th_out,
            "X_outside": x_out,
        })
        mags_X.append(magX)
        mags_T.append(np.abs(th))
    for i in range(len(ds)):
        for j in range(len(ds)):
            if i == j:
                continue
            xt = mean_product(mags_X[i], mags_T[j], d)
            xx = mean_product(mags_X[i], mags_X[j], d) if i < j else None
            rep["overlaps"][(i, j)] = (xt, xx)
    return rep


def block_report_passes(rep, tol_div=1e-10, tol_mean=1e-12, tol_xt=1e-6):
    ok = True
    for e in rep["per_xi"]:
        ok &= e["div_X"] <= tol_div and e["mean_X"] <= tol_mean
        ok &= e["div_XTheta"] <= tol_xt and e["avg_XTheta_err"] <= tol_xt
        ok &= e["theta_outside"] == 0.0 and e["X_outside"] == 0.0
    for xt, xx in rep["overlaps"].values():
        ok &= xt == 0.0 and (xx is None or xx == 0.0)
    return bool(ok)


# ---------------------------------------------------------------- scaling

def predicted_exponent(kind, k, s, p, d):
    pp = dual(p)
    inv_s = 0.0 if s == np.inf else 1.0 / s
    if kind == "Theta":
        return k + (d - 1) * (1.0 / p - inv_s)
    if kind == "X":
        return k + (d - 1) * (1.0 / pp - inv_s)
    if kind == "H":
        return k - 1 + (d - 1) * (1.0 / pp - inv_s)
    raise ValueError(kind)


def _transverse_box(rho, mu, n, m):
    h = 1.0 / n
    half = int(np.ceil(2 * rho / mu * n)) + 2
    y = np.arange(-half, half + 1) * h
    ys = []
    for k in range(m):
        shp = [1] * m
        shp[k] = y.size
        ys.append(y.reshape(shp))
    return ys, h


def block_norm(kind, k, s, mu, p, rho, d, n, sigma=1.0):
    """||D^k kind||_{L^s} of one block on the transverse torus T^{d-1}, n per axis."""
    m = d - 1
    if rho / mu * n < 2:
        raise GridUnderResolved(f"mu={mu}: Theta radius below two grid points at n={n}")
    ys, h = _transverse_box(rho, mu, n, m)
    z = [mu * y for y in ys]
    pp = dual(p)
    if kind == "Theta":
        r = np.sqrt(sum(y * y for y in z))
        if k == 0:
            f = sigma * mu ** (m / p) * profiles.phi_radial(r, rho, m)
        elif k == 1:
            f = sigma * mu ** (m / p) * mu * np.abs(profiles.phi_radial_deriv(r, rho, m))
        else:
            raise ValueError("k must be 0 or 1")
    else:
        parts = profiles.psi_parts(z, rho, order=2)
        amp = mu ** (m / pp)
        if kind == "H" and k == 0:
            f = amp / mu * np.abs(parts["psi"])
        elif (kind == "H" and k == 1) or (kind == "X" and k == 0):
            f = amp * np.sqrt(sum(np.asarray(g) ** 2 for g in parts["grad"]))
        elif kind == "X" and k == 1:
            tot = 0.0
            for (a, b), v in parts["hess"].items():
                tot = tot + (1.0 if a == b else 2.0) * v * v
            f = amp * mu * np.sqrt(tot)
        else:
            raise ValueError(f"unsupported {kind}, k={k}")
    f = np.broadcast_to(f, tuple(y.size for y in ys))
    if s == np.inf:
        return float(np.abs(f).max())
    return float((np.sum(np.abs(f) ** s) * h ** m) ** (1.0 / s))


def measure_scaling(ds, sigma, p, s, k, mu_list, n=512):
    """Least-squares log-log slopes of the block norms against mu."""
    mu_list = np.asarray(mu_list, dtype=float)
    if mu_list.size < 3:
        raise ValueError("need at least three concentrations")
    ratios = mu_list[1:] / mu_list[:-1]
    if not np.allclose(ratios, ratios[0]):
        raise ValueError("mu_list must be a geometric progression")
    out = {}
    for kind in ("Theta", "X", "H"):
        norms = np.array([block_norm(kind, k, s, mu, p, ds.rho, ds.d, n, sigma) for mu in mu_list])
        slope = np.polyfit(np.log(mu_list), np.log(norms), 1)[0]
        out[kind] = {"slope": float(slope), "predicted": predicted_exponent(kind, k, s, p, ds.d),
                     "norms": norms}
    return out
