"""Integral curves of u = J grad H, particle pushforward and the energy-gap report.

H is evaluated off-grid by its trigonometric interpolant, which is the
exact periodic interpolation of the samples.  Sparse spectra are summed mode
by mode; dense ones are contracted one axis at a time.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NegativeDensity, StepTooLarge, WrongInitializer
from .field import TimeField, J_components, deriv_array


class TrigInterpolant:
    """Evaluate a grid field and its gradient at arbitrary points of T^d."""

    def __init__(self, values, d, sparse_limit=4096):
        a = np.asarray(values, dtype=float)
        self.d = d
        self.n_axis = a.shape
        hat = np.fft.fftn(a) / a.size
        # split the Nyquist coefficient so the interpolant is real and symmetric
        for ax, n in enumerate(a.shape):
            if n > 1 and n % 2 == 0:
                hat = self._split_nyquist(hat, ax, n)
        self.hat = hat
        self.fax = [self._freq_axis(k) for k in range(d)]
        idx = np.nonzero(np.abs(hat) > 1e-15 * max(np.abs(hat).max(), 1e-300))
        self.sparse = idx[0].size <= sparse_limit
        if self.sparse:
            self.modes = np.stack([self.fax[k][idx[k]] for k in range(d)], axis=1)
            self.coef = hat[idx]

    @staticmethod
    def _split_nyquist(hat, ax, n):
        """Place half of the Nyquist coefficient at +n/2 (appended) and half at -n/2."""
        shp = list(hat.shape)
        shp[ax] = n + 1
        out = np.zeros(shp, dtype=complex)
        sl = [slice(None)] * hat.ndim
        src = [slice(None)] * hat.ndim
        sl[ax] = slice(0, n)
        out[tuple(sl)] = hat
        nyq = [slice(None)] * hat.ndim
        nyq[ax] = n // 2
        half = hat[tuple(nyq)] / 2
        out[tuple(nyq)] = half
        src[ax] = n
        out[tuple(src)] = half
        return out

    def _freq_axis(self, k):
        m = self.hat.shape[k]
        n = self.n_axis[k]
        if n == 1:
            return np.zeros(1)
        f = np.fft.fftfreq(n, d=1.0 / n)
        if m == n + 1:
            f = np.concatenate([f, [n // 2]])
        return f

    def __call__(self, x, grad=False):
        """Values (P,) and, with grad=True, gradients (P, d) at points x (P, d)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.sparse:
            return self._sparse_eval(x, grad)
        return self._dense_eval(x, grad)

    def _sparse_eval(self, x, grad):
        ph = np.exp(2j * np.pi * (x @ self.modes.T))
        val = (ph @ self.coef).real
        if not grad:
            return val
        g = np.stack([(ph @ (self.coef * 2j * np.pi * self.modes[:, k])).real for k in range(self.d)], axis=1)
        return val, g

    def _dense_eval(self, x, grad):
        d = self.d
        stacks = [self.hat]
        if grad:
            for k in range(d):
                f = self.fax[k]
                shp = [1] * d
                shp[k] = f.size
                stacks.append(self.hat * (2j * np.pi * f).reshape(shp))
        S = np.stack(stacks)                          # (m, n1, ..., nd)
        P = x.shape[0]
        E = [np.exp(2j * np.pi * np.outer(x[:, k], self.fax[k])) for k in range(d)]
        # contract the last axis for all points at once, then the rest pointwise
        T = np.tensordot(S, E[-1], axes=([d], [1]))   # (m, n1..n_{d-1}, P)
        T = np.moveaxis(T, -1, 1)                     # (m, P, n1..n_{d-1})
        for k in range(d - 2, -1, -1):
            T = np.einsum("mp...k,pk->mp...", T, E[k])
        out = T.real
        if not grad:
            return out[0]
        return out[0], out[1:].T


@dataclass(frozen=True, eq=False)
class CurveEnsemble:
    starts: np.ndarray
    step: float
    times: np.ndarray
    paths: np.ndarray               # (P, n_steps+1, d), wrapped to [0,1)
    hamiltonian_trace: np.ndarray   # (P, n_steps+1)


def _velocity_max(H):
    d = H.grid.d
    g = [deriv_array(H.values, d, i) for i in range(d)]
    u = J_components(tuple(g))
    return float(np.sqrt(sum(np.broadcast_to(c, H.grid.shape) ** 2 for c in u)).max())


def max_step(H):
    vmax = _velocity_max(H)
    return np.inf if vmax == 0 else 1.0 / (4.0 * vmax * H.grid.n)


def integrate_curves(H, starts, h, t_end, interp=None):
    """Classical RK4 on gamma' = J grad H(gamma)."""
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    if starts.size == 0:
        raise ValueError("no starting points")
    d = H.grid.d
    if d % 2:
        raise ValueError("J needs an even dimension")
    if not (0 < h < np.inf) or not np.isfinite(t_end):
        raise ValueError("step and end time must be positive and finite")
    hmax = max_step(H)
    if h > hmax * (1 + 1e-12):
        raise StepTooLarge(f"h={h:.3g} exceeds 1/(4 |J grad H|_inf n) = {hmax:.3g}")
    # round the step down so that it divides t_end
    steps = max(int(np.ceil(t_end / h - 1e-9)), 1) if t_end > 0 else 0
    h = t_end / steps if steps else h
    f = interp or TrigInterpolant(np.broadcast_to(H.values, H.grid.shape), d)
    half = d // 2

    def vel(x):
        _, g = f(x, grad=True)
        return np.concatenate([g[:, half:], -g[:, :half]], axis=1)

    x = starts.copy()
    paths = np.empty((x.shape[0], steps + 1, d))
    trace = np.empty((x.shape[0], steps + 1))
    paths[:, 0] = x % 1.0
    trace[:, 0] = f(x % 1.0)
    for s in range(steps):
        k1 = vel(x)
        k2 = vel(x + 0.5 * h * k1)
        k3 = vel(x + 0.5 * h * k2)
        k4 = vel(x + h * k3)
        x = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        x = x % 1.0
        paths[:, s + 1] = x
        trace[:, s + 1] = f(x)
    return CurveEnsemble(starts % 1.0, h, np.arange(steps + 1) * h, paths, trace)


def hamiltonian_drift(ens):
    return float(np.abs(ens.hamiltonian_trace - ens.hamiltonian_trace[:, :1]).max())


# ---------------------------------------------------------------- pushforward

def solve_transport(rho0, H, t_end, n_steps, n_t=2):
    """Spectral RK4 for d_t rho + div(rho J grad H) = 0, sampled at n_t times."""
    g = rho0.grid
    d = g.d
    u = J_components(tuple(deriv_array(H.values, d, i) for i in range(d)))
    u = [np.broadcast_to(c, g.shape) for c in u]
    dt = t_end / n_steps

    def rhs(r):
        return -sum(deriv_array(r * c, d, i) for i, c in enumerate(u))

    r = np.broadcast_to(rho0.values, g.shape).astype(float).copy()
    marks = {int(round(j * n_steps / (n_t - 1))): j for j in range(n_t)}
    out = [None] * n_t
    out[0] = r.copy()
    for s in range(1, n_steps + 1):
        k1 = rhs(r)
        k2 = rhs(r + 0.5 * dt * k1)
        k3 = rhs(r + 0.5 * dt * k2)
        k4 = rhs(r + dt * k3)
        r = r + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if s in marks:
            out[marks[s]] = r.copy()
    return out


def sample_density(values, d, n_particles, rng, batch=65536):
    """Rejection sampling from the trigonometric interpolant of a density."""
    f = TrigInterpolant(values, d)
    top = float(np.max(values))
    # the interpolant can overshoot the samples; pad the envelope and check
    bound = 1.25 * top
    out = []
    got = 0
    while got < n_particles:
        x = rng.random((batch, d))
        v = f(x)
        if v.max() > bound:
            raise ValueError("rejection envelope exceeded by the interpolant")
        keep = rng.random(batch) * bound < v
        out.append(x[keep])
        got += int(keep.sum())
    return np.concatenate(out)[:n_particles]


def _marginal_hat(values, d, axis):
    a = np.asarray(values, dtype=float)
    other = tuple(k for k in range(d) if k != axis)
    marg = a.mean(axis=other) if other else a
    n = marg.size
    hat = np.fft.fft(marg) / n
    k = np.fft.fftfreq(n, d=1.0 / n)
    if n % 2 == 0:
        # split the Nyquist term evenly between +n/2 and -n/2
        hat = np.concatenate([hat, [hat[n // 2] / 2]])
        hat[n // 2] /= 2
        k = np.concatenate([k, [n // 2]])
    return hat, k


def _bin_marginal(values, d, axis, bins):
    """Exact integrals of the interpolant's axis-marginal over equal bins."""
    hat, k = _marginal_hat(values, d, axis)
    edges = np.arange(bins + 1) / bins
    out = np.empty(bins)
    nz = k != 0
    for b in range(bins):
        lo, hi = edges[b], edges[b + 1]
        prim = np.full(k.shape, hi - lo, dtype=complex)
        w = 2j * np.pi * k[nz]
        prim[nz] = (np.exp(w * hi) - np.exp(w * lo)) / w
        out[b] = float((hat * prim).real.sum())
    return out / out.sum()


def _marginal_moments(values, d, axis):
    """Exact mean and variance of the normalized axis-marginal on [0, 1)."""
    hat, k = _marginal_hat(values, d, axis)
    nz = k != 0
    iw = np.zeros(k.shape, dtype=complex)
    iw[nz] = 1.0 / (2j * np.pi * k[nz])
    m1 = np.where(nz, -iw, 0.5)
    m2 = np.where(nz, -iw + np.where(nz, 2.0 / (2 * np.pi * np.where(nz, k, 1)) ** 2, 0.0), 1.0 / 3)
    mass = float(hat[~nz].real.sum())
    mean = float((hat * m1).real.sum()) / mass
    second = float((hat * m2).real.sum()) / mass
    return mean, second - mean * mean


@dataclass(frozen=True)
class PushforwardReport:
    t: float
    n_particles: int
    tv_per_axis: tuple
    tv_max: float
    mean_err: float
    var_err: float
    mc_scale: float


def pushforward_check(rho, H, n_particles, t, h=None, seed=0, rho_t=None):
    """Advect samples of rho(0) and compare their binned marginals with rho(t).

    ``rho`` is either a TimeField (the slice nearest to t is used) or the
    initial PeriodicScalarField together with ``rho_t`` for the target.
    """
    g = H.grid
    d = g.d
    if isinstance(rho, TimeField):
        r0 = np.broadcast_to(rho.data[0], g.shape)
        j = int(round(t / g.dt))
        rt = np.broadcast_to(rho.data[j], g.shape)
    else:
        r0 = np.broadcast_to(rho.values, g.shape)
        rt = np.broadcast_to(rho_t.values, g.shape)
    if r0.min() < 0:
        raise NegativeDensity(f"min rho(0) = {r0.min():.3e}")
    rng = np.random.default_rng(seed)
    pts = sample_density(r0, d, n_particles, rng)
    if h is None:
        hmax = max_step(H)
        steps = max(1, int(np.ceil(t / min(hmax, t))))
        h = t / steps
    ens_end = pts
    if t > 0 and _velocity_max(H) > 0:
        ens = integrate_curves(H, pts, h, t)
        ens_end = ens.paths[:, -1]
    bins = max(g.n // 4, 1)
    tvs = []
    for ax in range(d):
        hist = np.histogram(ens_end[:, ax], bins=bins, range=(0.0, 1.0))[0] / n_particles
        ref = _bin_marginal(rt, d, ax, bins)
        tvs.append(0.5 * float(np.abs(hist - ref).sum()))
    ref = [_marginal_moments(rt, d, ax) for ax in range(d)]
    mean_err = max(abs(float(ens_end[:, ax].mean()) - ref[ax][0]) for ax in range(d))
    var_err = max(abs(float(ens_end[:, ax].var()) - ref[ax][1]) for ax in range(d))
    return PushforwardReport(t, n_particles, tuple(tvs), max(tvs),
                             mean_err, var_err,
                             float(3.0 / np.sqrt(n_particles)))


# ---------------------------------------------------------------- energy gap

def hamiltonian_decay_report(states):
    """Per stage: int H rho(0), int H rho(1), their gap, and the threshold check."""
    rows = []
    for s in states:
        if s.info.get("initializer") != "hamil":
            raise WrongInitializer("state was not built from the energy-gap starting triple")
        a0 = float(np.mean(s.H.values * s.rho.data[0]))
        a1 = float(np.mean(s.H.values * s.rho.data[-1]))
        lam0 = s.info["lambda0"]
        Delta = s.info["Delta"]
        rows.append({"stage": s.q, "int_H_rho0": a0, "int_H_rho1": a1, "gap": a0 - a1,
                     "threshold": 2.0 / lam0 + 8 * Delta,
                     "threshold_ok": 1.0 > 2.0 / lam0 + 8 * Delta,
                     "gap_ok": a0 - a1 > 2.0 / lam0 + 8 * Delta,
                     "gap_minus_1_plus_Delta": (a0 - a1) - (1 - Delta)})
    return rows
