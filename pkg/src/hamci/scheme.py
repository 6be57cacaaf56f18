"""One stage of the convex-integration iteration and its starting triples.

A state carries rho, its time derivative rho_t, the autonomous Hamiltonian H,
the velocity u and the error R.  rho_t and u are carried rather than
recomputed: rho_t is known in closed form at every stage (mollifier
derivative plus the chain rule through the shell coefficients), and u is the
sum of mollified velocities and closed-form block fields, which keeps the
block supports exactly compact on the grid.  The spectral field J grad H is
compared against u in the diagnostics.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import profiles
from .antidiv import _improved_core
from .blocks import sample_block
from .errors import (AliasedLambda, ExponentHypothesisViolated, BadExponent, GridUnderResolved,
                     ProfileConstraintViolated)
from .field import (PeriodicScalarField, PeriodicVectorField, TimeField, J_components,
                    deriv_array, grad_inv_laplacian_array, lp_norm, sobolev_norm,
                    time_derivative_array)

_SHELL_FLOOR = 12


# ---------------------------------------------------------------- schedule

def _frac(x):
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(repr(float(x)))


def exponent_hypothesis(p, r, d):
    p, r = _frac(p), _frac(r)
    return 1 / p + 1 / r > 1 + Fraction(1, d - 1)


def gamma_exponent(p, r, d):
    p, r = _frac(p), _frac(r)
    pp = p / (p - 1)
    m = min(Fraction(d - 1) / p, Fraction(d - 1) / pp, -1 - (d - 1) * (1 / pp - 1 / r))
    return (1 + 1 / p) / m


def _pow(base, e):
    try:
        v = float(base) ** float(e)
    except OverflowError:
        return math.inf
    return v


@dataclass(frozen=True)
class ParamSchedule:
    p: object
    p_prime: object
    r: object
    d: int
    a: object
    b: object
    beta: object
    alpha: object
    gamma: object
    mode: str

    def lam(self, q):
        return _pow(self.a, _pow(self.b, q))

    def lam_int(self, q):
        v = self.lam(q)
        if not math.isfinite(v) or abs(v - round(v)) > 1e-9 * max(v, 1.0):
            raise ValueError(f"lambda_{q} = {v} is not a representable integer frequency")
        return int(round(v))

    def delta(self, q):
        lam = self.lam(q)
        return 0.0 if math.isinf(lam) else lam ** (-2.0 * float(self.beta))

    def ell(self, q):
        lam = self.lam(q)
        return 0.0 if math.isinf(lam) else lam ** (-1.0 - float(self.alpha))

    def mu(self, q):
        """Concentration of the blocks added at stage q (mu_q = lambda_q^gamma)."""
        return _pow(self.lam(q), self.gamma)

    def kappa(self, q):
        dl = self.delta(q + 2)
        return math.inf if dl == 0 else 20.0 / dl

    def as_dict(self, stages=3):
        out = {k: (str(v) if isinstance(v, Fraction) else v) for k, v in self.__dict__.items()}
        for q in range(stages):
            out[f"lambda_{q}"] = self.lam(q)
            out[f"delta_{q}"] = self.delta(q)
            out[f"ell_{q}"] = self.ell(q)
            out[f"mu_{q}"] = self.mu(q)
            out[f"kappa_{q}"] = self.kappa(q)
        return out


def make_schedule(p, r, d, a, mode="paper", overrides=None, a0=1):
    """Exponent constants and frequency ladder.

    Paper mode derives gamma, alpha, b, beta exactly (Fractions).  Tame mode
    takes b, alpha, gamma from ``overrides`` (beta defaults to 1/(2b(b+1))).
    """
    overrides = dict(overrides or {})
    if _frac(p) <= 1:
        raise BadExponent(f"p={p} must exceed 1")
    if not exponent_hypothesis(p, r, d):
        raise ExponentHypothesisViolated(
            f"1/p + 1/r = {1 / _frac(p) + 1 / _frac(r)} is not > 1 + 1/(d-1) = {1 + Fraction(1, d - 1)}")
    if a < a0:
        raise ValueError(f"a={a} below a0={a0}")
    pf, rf = _frac(p), _frac(r)
    ppf = pf / (pf - 1)
    gam = gamma_exponent(pf, rf, d)
    if mode == "paper":
        alpha = 4 + gam * (d + 1)
        b = max(pf, ppf) * (3 * (1 + alpha) * (d + 2) + 2)
        beta = 1 / (2 * b * (b + 1))
        sched = ParamSchedule(pf, ppf, rf, d, a, b, beta, alpha, gam, mode)
        big = [q for q in (1, 2) if math.isinf(sched.lam(q))]
        if big:
            warnings.warn(f"lambda_{big[0]} = a^(b^{big[0]}) overflows 64-bit floats", stacklevel=2)
        return sched
    if mode != "tame":
        raise ValueError(f"unknown mode {mode!r}")
    missing = [k for k in ("b", "alpha", "gamma") if k not in overrides]
    if missing:
        raise ValueError(f"tame mode needs {', '.join(missing)}")
    b = float(overrides["b"])
    beta = float(overrides.get("beta", 1.0 / (2 * b * (b + 1))))
    vals = {"b": b, "beta": beta, "alpha": float(overrides["alpha"]), "gamma": float(overrides["gamma"])}
    for k, v in vals.items():
        if not v > 0:
            raise ValueError(f"{k} must be positive")
    return ParamSchedule(float(pf), float(ppf), float(rf), d, a, vals["b"], vals["beta"],
                         vals["alpha"], vals["gamma"], mode)


# ---------------------------------------------------------------- state

@dataclass(frozen=True, eq=False)
class IterationState:
    q: int
    rho: TimeField
    rho_t: TimeField
    H: PeriodicScalarField
    u: PeriodicVectorField
    R: TimeField
    diagnostics: tuple = ()
    info: dict = field(default_factory=dict)

    @property
    def grid(self):
        return self.rho.grid


def _is_zero(a):
    return not np.any(a)


def _div_time(comps, d):
    """Spatial divergence of a vector of arrays with a leading time axis."""
    return sum(deriv_array(c, d, i) for i, c in enumerate(comps))


def nyquist_free(a, d):
    """Remove every Fourier mode with a Nyquist index along some spatial axis.

    The odd spectral derivative vanishes on those modes, so they cannot be
    balanced by any divergence; the identity is checked on the rest.
    """
    off = a.ndim - d
    axes = [off + i for i in range(d) if a.shape[off + i] > 1]
    if not axes:
        return a
    ahat = np.fft.rfftn(a, axes=axes)
    for ax in axes:
        n = a.shape[ax]
        idx = [slice(None)] * a.ndim
        idx[ax] = n // 2
        ahat[tuple(idx)] = 0.0
    return np.fft.irfftn(ahat, s=[a.shape[ax] for ax in axes], axes=axes)


def residual(state, use_fd=False):
    """Size of d_t rho + div(rho u) + div R per time slice.

    Returns a dict with ``abs`` (max over t of the L1 norm of the residual
    with Nyquist modes removed), ``rel`` (abs divided by
    (1 + ||rho||_C1)(1 + ||u||_C0)), ``full_abs`` (no Nyquist removal) and
    ``terms`` (abs over the largest L1 norm of a single term).
    """
    g = state.grid
    d = g.d
    rt = time_derivative_array(state.rho.data, g.dt) if use_fd else state.rho_t.data
    u = state.u.components
    R = state.R.data
    worst = full_worst = term_max = 0.0
    c1 = 0.0
    for j in range(g.n_t):
        r = state.rho.data[j]
        flux = [r * ui for ui in u]
        div_f = sum(deriv_array(f, d, i) for i, f in enumerate(flux))
        div_R = sum(deriv_array(c[j], d, i) for i, c in enumerate(R))
        res = np.asarray(rt[j] + div_f + div_R, dtype=float)
        full_worst = max(full_worst, float(np.mean(np.abs(res))))
        worst = max(worst, float(np.mean(np.abs(nyquist_free(res, d)))))
        for t in (rt[j], div_f, div_R):
            term_max = max(term_max, float(np.mean(np.abs(t))))
        grad = np.sqrt(sum(deriv_array(r, d, i) ** 2 for i in range(d)))
        c1 = max(c1, float(np.abs(r).max() + np.max(grad)))
    c1 += float(np.abs(rt).max())
    c0 = float(np.sqrt(sum(np.asarray(c) ** 2 for c in u)).max()) if u else 0.0
    return {"abs": worst, "rel": worst / ((1 + c1) * (1 + c0)), "full_abs": full_worst,
            "terms": worst / term_max if term_max > 0 else 0.0}


# ---------------------------------------------------------------- mollification

@dataclass(frozen=True, eq=False)
class Mollified:
    rho: np.ndarray
    rho_t: np.ndarray
    H: np.ndarray
    u: tuple
    R: tuple
    R_t: tuple
    commutator: TimeField
    kernel: object
    ell: float


def mollify_state(s, ell):
    """Space-time mollification of rho and R, spatial mollification of H and u.

    Time extension past [0, 1] is by constants (rho, R, rho u), and rho_t is
    extended by zero, which is its consistent counterpart.
    """
    g = s.grid
    K = profiles.mollifier_kernel(ell, g)
    rho = K.apply(s.rho.data)
    rho_t = K.apply(s.rho_t.data, extend="zero")
    R = tuple(K.apply(c) for c in s.R.data)
    R_t = tuple(K.apply_dt(c) for c in s.R.data)
    H = K.apply_space(s.H.values)
    u = tuple(K.apply_space(c) for c in s.u.components)
    if all(_is_zero(c) for c in s.u.components):
        comm = tuple(np.zeros((g.n_t,) + (1,) * g.d) for _ in range(g.d))
    else:
        comm = tuple(K.apply(s.rho.data * c[None]) - rho * ul[None]
                     for c, ul in zip(s.u.components, u))
    return Mollified(rho, rho_t, H, u, R, R_t, TimeField(g, comm), K, ell)


# ---------------------------------------------------------------- perturbation

@dataclass(eq=False)
class PerturbationBundle:
    theta_p: TimeField
    theta_p_t: np.ndarray
    theta_c: np.ndarray          # one value per time slice
    theta_c_t: np.ndarray
    h: PeriodicScalarField
    w: PeriodicVectorField
    n_range: tuple
    lam: int
    mu: float
    kappa: float
    coeffs: list                 # S * a_xi per direction (no 2^q)
    shell_sum: np.ndarray        # S = sum_n chi(kappa|R|-n) n/kappa
    Rhat: tuple
    blocks: list


def shell_weights(mag, kappa, mag_t=None):
    """S = sum_{n>=12} chi(kappa m - n) n/kappa, its time derivative and the active n.

    Only the two integers within 3/4 of kappa*m can contribute, so the sum
    is evaluated locally instead of over the whole shell ladder.
    """
    s = kappa * mag
    top = np.floor(s + 0.75)
    S = np.zeros_like(s)
    S_t = np.zeros_like(s) if mag_t is not None else None
    active = []
    for k in (top - 1, top):
        ok = k >= _SHELL_FLOOR
        c, dc = profiles.eval_chi(s - k, 1)
        c = np.where(ok, c, 0.0)
        S += c * k / kappa
        if mag_t is not None:
            S_t += np.where(ok, dc, 0.0) * k * mag_t
        if np.any(c > 0):
            active.append((int(k[c > 0].min()), int(k[c > 0].max())))
    n_range = (min(a for a, _ in active), max(b for _, b in active)) if active else None
    return S, S_t, n_range


def assemble_perturbation(mol, schedule, ds, q, grid):
    d, n = grid.d, grid.n
    lam = schedule.lam_int(q + 1)
    mu = schedule.mu(q + 1)
    kappa = schedule.kappa(q)
    if lam * mu > n / 2:
        raise AliasedLambda(f"lambda*mu = {lam * mu:.4g} exceeds Nyquist {n // 2}")
    p = float(schedule.p)
    blocks = [sample_block(ds, i, mu, p, n, lam) for i in range(len(ds))]
    R, R_t = mol.R, mol.R_t
    shp = np.broadcast_shapes(*(c.shape for c in R))
    R = tuple(np.broadcast_to(c, shp) for c in R)
    R_t = tuple(np.broadcast_to(c, shp) for c in R_t)
    mag = np.sqrt(sum(c * c for c in R))
    safe = np.where(mag > 0, mag, 1.0)
    dot = sum(a * b for a, b in zip(R, R_t))
    mag_t = np.where(mag > 0, dot / safe, 0.0)
    S, S_t, n_range = shell_weights(mag, kappa, mag_t)
    Rhat = tuple(np.where(mag > 0, c / safe, 0.0) for c in R)
    Rhat_t = tuple(np.where(mag > 0, ct / safe - c * dot / safe ** 3, 0.0) for c, ct in zip(R, R_t))
    two_q = 2.0 ** q
    coeffs, coeffs_t = [], []
    for i in range(len(ds)):
        ax, sgn = ds.axis(i)
        a = 0.5 * (1.0 + sgn * Rhat[ax])
        coeffs.append(S * a)
        coeffs_t.append(S_t * a + S * 0.5 * sgn * Rhat_t[ax])
    th = sum(two_q * c * b.theta[None] for c, b in zip(coeffs, blocks))
    th_t = sum(two_q * c * b.theta[None] for c, b in zip(coeffs_t, blocks))
    full = (grid.n_t,) + grid.shape
    th = np.ascontiguousarray(np.broadcast_to(th, np.broadcast_shapes(th.shape, (grid.n_t,) + (1,) * d)))
    th_t = np.broadcast_to(th_t, th.shape)
    axes = tuple(range(1, d + 1))
    theta_c = -th.mean(axis=axes)
    theta_c_t = -th_t.mean(axis=axes)
    h = sum(b.ham for b in blocks) / (two_q * lam)
    w = tuple(sum(b.X[i] for b in blocks) / two_q for i in range(d))
    del full
    return PerturbationBundle(TimeField(grid, th), np.asarray(th_t), theta_c, theta_c_t,
                              PeriodicScalarField(grid, h), PeriodicVectorField(grid, w),
                              n_range, lam, mu, kappa, coeffs, S, Rhat, blocks)


def _bcast_t(x, d):
    return np.asarray(x).reshape((-1,) + (1,) * d)


def assemble_reynolds(state, mol, bundle, ds):
    """New error: minus the sum of the quadratic, shell, time, linear and commutator parts.

    Returns (R_new TimeField, parts) where ``parts`` holds the L1 norm (max
    over time) of each contribution.
    """
    g = state.grid
    d = g.d
    w = bundle.w.components
    # oscillatory factors G_xi = Theta X - xi, per nonzero component
    osc = []
    for i, blk in enumerate(bundle.blocks):
        xi = ds.as_array()[i]
        comps = []
        for k in range(d):
            gk = blk.theta * blk.X[k] - xi[k]
            if np.any(gk):
                comps.append((k, gk))
        osc.append(comps)
    names = ("quadr", "shell", "time", "theta_u", "rho_w", "thetac_w", "comm")
    norms = dict.fromkeys(names, 0.0)
    out = [np.empty((g.n_t,) + g.shape) for _ in range(d)]
    for j in range(g.n_t):
        parts = {}
        quad = [0.0] * d
        for i in range(len(ds)):
            Cj = bundle.coeffs[i][j]
            for k, gk in osc[i]:
                f = deriv_array(Cj, d, k)
                if _is_zero(f):
                    continue
                comps, _ = _improved_core(f, gk, d)
                quad = [a + b for a, b in zip(quad, comps)]
        parts["quadr"] = quad
        parts["shell"] = [bundle.shell_sum[j] * rh[j] - rc[j] for rh, rc in zip(bundle.Rhat, mol.R)]
        dth = bundle.theta_p_t[j] + bundle.theta_c_t[j]
        parts["time"] = grad_inv_laplacian_array(np.asarray(dth), d)
        thj = bundle.theta_p.data[j]
        parts["theta_u"] = [thj * uc for uc in mol.u]
        parts["rho_w"] = [mol.rho[j] * wc for wc in w]
        parts["thetac_w"] = [bundle.theta_c[j] * wc for wc in w]
        parts["comm"] = [c[j] for c in mol.commutator.data]
        for k in range(d):
            out[k][j] = -sum(np.broadcast_to(parts[nm][k], g.shape) for nm in names)
        for nm in names:
            mag = np.sqrt(sum(np.broadcast_to(c, g.shape) ** 2 for c in parts[nm]))
            norms[nm] = max(norms[nm], float(mag.mean()))
    return TimeField(g, tuple(out)), norms


# ---------------------------------------------------------------- iterate

def _window_end(state, tol=0.0):
    """Largest t0 with rho = 1 and R = 0 on [0, t0] (None when there is none)."""
    g = state.grid
    t0 = None
    for j in range(g.n_t):
        flat = np.all(np.abs(state.rho.data[j] - 1.0) <= tol)
        calm = all(np.all(np.abs(c[j]) <= tol) for c in state.R.data)
        if not (flat and calm):
            break
        t0 = g.times()[j]
    return t0


def iterate(state, schedule, ds):
    """Stage q -> q+1: mollify, perturb, assemble the new error, record diagnostics."""
    g = state.grid
    d = g.d
    q = state.q
    ell = schedule.ell(q)
    mol = mollify_state(state, ell)
    bundle = assemble_perturbation(mol, schedule, ds, q, g)
    R1, parts = assemble_reynolds(state, mol, bundle, ds)
    th = bundle.theta_p.data
    rho1 = mol.rho + th + _bcast_t(bundle.theta_c, d)
    rho_t1 = mol.rho_t + bundle.theta_p_t + _bcast_t(bundle.theta_c_t, d)
    H1 = mol.H + bundle.h.values
    u1 = tuple(a + b for a, b in zip(mol.u, bundle.w.components))
    new = IterationState(q + 1, TimeField(g, rho1), TimeField(g, np.ascontiguousarray(rho_t1)),
                         PeriodicScalarField(g, H1), PeriodicVectorField(g, u1), R1,
                         state.diagnostics, dict(state.info))
    diag = stage_diagnostics(state, new, mol, bundle, schedule, parts)
    return IterationState(new.q, new.rho, new.rho_t, new.H, new.u, new.R,
                          state.diagnostics + (diag,), new.info)


def stage_diagnostics(old, new, mol, bundle, schedule, parts):
    g = old.grid
    d = g.d
    q = old.q
    r = float(schedule.r)
    pp = float(schedule.p_prime)
    drho = new.rho.data - old.rho.data
    dH = PeriodicScalarField(g, np.broadcast_to(new.H.values - old.H.values, g.shape).copy())
    flux = 0.0
    for j in range(g.n_t):
        diff = [new.rho.data[j] * a - old.rho.data[j] * b for a, b in zip(new.u.components, old.u.components)]
        flux = max(flux, float(np.sqrt(sum(np.broadcast_to(c, g.shape) ** 2 for c in diff)).mean()))
    res = residual(new)
    res_fd = residual(new, use_fd=True) if g.n_t >= 5 else {"rel": float("nan")}
    t0 = _window_end(old)
    ell = mol.ell
    window = float("nan")
    R_window = float("nan")
    if t0 is not None:
        sel = g.times() <= t0 - ell + 1e-12
        if np.any(sel):
            window = float(np.abs(new.rho.data[sel] - 1.0).max())
            R_window = float(max(np.abs(c[sel]).max() for c in new.R.data))
    # spectral cross-check of the carried velocity
    JgH = J_components(tuple(deriv_array(new.H.values, d, i) for i in range(d)))
    num = max(float(np.abs(np.broadcast_to(a, g.shape) - np.broadcast_to(b, g.shape)).max())
              for a, b in zip(new.u.components, JgH))
    den = max(float(np.abs(c).max()) for c in new.u.components) or 1.0
    h = bundle.h.values
    Jgh = J_components(tuple(deriv_array(h, d, i) for i in range(d)))
    wnum = max(float(np.abs(np.broadcast_to(a, g.shape) - np.broadcast_to(b, g.shape)).max())
               for a, b in zip(bundle.w.components, Jgh))
    wden = max(float(np.abs(c).max()) for c in bundle.w.components) or 1.0
    axes = tuple(range(1, d + 1))
    mass = float(np.abs(new.rho.data.mean(axis=axes) - old.rho.data.mean(axis=axes)).max())
    mean0 = float(np.abs(bundle.theta_p.data.mean(axis=axes) + bundle.theta_c).max())
    W = sobolev_norm(dH, 2, r) + sobolev_norm(dH, 1, pp)
    delta1 = schedule.delta(q + 1)
    Rl_max = float(np.sqrt(sum(c * c for c in mol.R)).max())
    return {
        "stage": q + 1,
        "L1_R": lp_norm(new.R, 1),
        "L1_drho": float(np.abs(drho).mean(axis=axes).max()),
        "W2r_dH": W,
        "Linf_dH": float(np.abs(dH.values).max()),
        "L1_dflux": flux,
        "inf_drho": float(drho.min()),
        "cutoff_window": window,
        "residual": res["rel"],
        "residual_abs": res["abs"],
        "residual_full": res["full_abs"],
        "residual_fd": res_fd["rel"],
        "L1_R_prev": lp_norm(old.R, 1),
        "R_window": R_window,
        "mass_err": mass,
        "mean_zero": mean0,
        "theta_p_min": float(bundle.theta_p.data.min()),
        "theta_c_max": float(np.abs(bundle.theta_c).max()),
        "u_vs_JgradH": num / den,
        "w_vs_Jgradh": wnum / wden,
        "n_range": bundle.n_range,
        "shell_bound": int(math.ceil(bundle.kappa * Rl_max)) + 1,
        "lambda": bundle.lam, "mu": bundle.mu, "kappa": bundle.kappa, "ell": ell,
        "delta_next": delta1,
        "ratio_drho_delta": float(np.abs(drho).mean(axis=axes).max()) / delta1 if delta1 else float("nan"),
        "ratio_R_delta": lp_norm(new.R, 1) / schedule.delta(q + 2) if schedule.delta(q + 2) else float("nan"),
        "ratio_dH_2q": W * 2.0 ** q,
        "ratio_dH_lam": W * schedule.lam(q),
        "parts": parts,
    }


# ---------------------------------------------------------------- starting triples

def _chi0_parts(grid):
    t = grid.times()
    c, dc, _ = profiles.eval_chi0(t, 2)
    return c, dc


def initial_triple_tce(schedule, grid, lam=None):
    """rho = chi0 + (1 + sin(2 pi lam x1)/4)(1 - chi0), H = 0, R along e1."""
    d = grid.d
    lam = int(round(20 * float(schedule.a))) if lam is None else int(lam)
    if lam >= grid.n // 2:
        raise GridUnderResolved(f"mode {lam} is not below Nyquist {grid.n // 2}")
    c, dc = _chi0_parts(grid)
    x = grid.axis_coords(0)
    s = np.sin(2 * np.pi * lam * x)
    co = np.cos(2 * np.pi * lam * x)
    ct = _bcast_t(c, d)
    dct = _bcast_t(dc, d)
    rho = ct + (1 + s[None] / 4) * (1 - ct)
    rho_t = -dct * s[None] / 4
    zero = np.zeros((grid.n_t,) + (1,) * d)
    R = (-dct * co[None] / (4 * lam * 2 * np.pi),) + (zero,) * (d - 1)
    return IterationState(0, TimeField(grid, rho), TimeField(grid, rho_t),
                          PeriodicScalarField(grid, np.zeros((1,) * d)),
                          PeriodicVectorField.zeros(grid), TimeField(grid, R),
                          info={"initializer": "tce", "lambda0": lam})


def _plateau(s, lo, hi, width):
    g1 = profiles.smoothstep((s - lo) / width)[0]
    g2 = profiles.smoothstep((hi - s) / width)[0]
    return g1 * g2


def hamil_profiles(Delta, s):
    """psi_bar = Delta + c (plateau on (1/2,1)), H_bar = c' (plateau on (0,1/2)), unnormalized."""
    return _plateau(s, 0.52, 0.98, 0.2), _plateau(s, 0.02, 0.48, 0.2)


def initial_triple_hamil(schedule, grid, Delta=None, lam=None, tail_tol=1e-3):
    """Starting triple whose density sits at Delta on the support of H at t = 1."""
    d = grid.d
    lam = int(round(20 * float(schedule.a))) if lam is None else int(lam)
    if Delta is None:
        if schedule.mode == "tame":
            raise ProfileConstraintViolated("tame mode needs a user-supplied Delta")
        Delta = sum(schedule.delta(q + 1) for q in range(64))
    if not 0 < Delta <= 1.0 / 16:
        raise ProfileConstraintViolated(f"Delta={Delta} outside (0, 1/16]")
    x = grid.axis_coords(0)
    s = (lam * x) % 1.0
    bp, bh = hamil_profiles(Delta, s)
    if bp.mean() <= 0 or bh.mean() <= 0:
        raise GridUnderResolved("profiles not sampled at this resolution")
    psi = Delta + (1 - Delta) * bp / bp.mean()
    Hb = bh / bh.mean()
    # box constraints, checked on a fine reference sampling of one period
    ref = np.linspace(0, 1, 20001)
    rp, rh = hamil_profiles(Delta, ref)
    psi_ref = Delta + (1 - Delta) * rp / bp.mean()
    H_ref = rh / bh.mean()
    low = ref <= 0.5
    if (psi_ref.min() < Delta - 1e-15 or np.abs(psi_ref[low] - Delta).max() > 0
            or psi_ref.max() > 4 or H_ref.max() > 4 or H_ref.min() < 0
            or np.any(H_ref[(ref <= 0) | (ref >= 0.5)] != 0)):
        raise ProfileConstraintViolated("psi_bar or H_bar violates its box constraints")
    for arr in (psi, Hb):
        hat = np.abs(np.fft.rfft(arr.ravel()))
        if hat[grid.n // 4:].max() > tail_tol * hat[0]:
            raise GridUnderResolved(f"lambda0={lam} profile spectrum not decayed at n={grid.n}")
    c, dc = _chi0_parts(grid)
    ct, dct = _bcast_t(c, d), _bcast_t(dc, d)
    rho = ct + psi[None] * (1 - ct)
    rho_t = dct * (1 - psi[None])
    pot = grad_inv_laplacian_array(psi - 1.0, d)
    R = tuple(dct * v[None] for v in pot)
    H = PeriodicScalarField(grid, Hb)
    u = PeriodicVectorField(grid, J_components(tuple(deriv_array(Hb, d, i) for i in range(d))))
    return IterationState(0, TimeField(grid, rho), TimeField(grid, rho_t), H, u, TimeField(grid, R),
                          info={"initializer": "hamil", "lambda0": lam, "Delta": Delta})
