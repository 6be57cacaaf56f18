"""Direction set, decomposition coefficients, frames and cylinder placement.

The set is the signed coordinate basis {+-e_i}.  Coefficients are affine,
a_{+-e_i}(R) = (1 +- R_i)/2, so the decomposition is exact and non-negative.
"""
from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import NotUnitVector, OddDimension, PlacementFailed, BadRho


def _basis(d, i, sign=1):
    return tuple(Fraction(sign) if k == i else Fraction(0) for k in range(d))


def _axis_sign(vec):
    """(axis, sign) of a signed basis vector."""
    for k, c in enumerate(vec):
        if c != 0:
            return k, int(c)
    raise ValueError("zero vector")


def J_exact(v):
    d = len(v)
    h = d // 2
    return tuple(v[h:]) + tuple(-c for c in v[:h])


@dataclass(frozen=True)
class DirectionSet:
    d: int
    directions: tuple
    frames: tuple
    n_star: int
    offsets: tuple
    rho: float
    mu0: float
    min_separation: float

    def __len__(self):
        return len(self.directions)

    def axis(self, idx):
        return _axis_sign(self.directions[idx])

    def frame_axes(self, idx):
        """(axis, sign) for xi_perp, xi_1, ..., xi_{d-2} of direction idx."""
        return [_axis_sign(v) for v in self.frames[idx][1:]]

    def as_array(self):
        return np.array([[float(c) for c in v] for v in self.directions])

    def index(self, xi):
        key = tuple(Fraction(c) for c in xi)
        return self.directions.index(key)


def make_frames(d):
    h = d // 2
    dirs, frames = [], []
    for i in range(d):
        for sign in (1, -1):
            xi = _basis(d, i, sign)
            # J e_{h+k} = e_k and J(-e_k) = e_{h+k}, so these satisfy J xi_perp = xi
            perp = _basis(d, h + i, sign) if i < h else _basis(d, i - h, -sign)
            rest = [_basis(d, k) for k in range(d) if k not in (i, _axis_sign(perp)[0])]
            dirs.append(xi)
            frames.append((xi, perp, *rest))
    return tuple(dirs), tuple(frames)


def _pdist(a, b):
    """Periodic distance of coordinates on the unit circle."""
    t = abs(a - b) % 1.0
    return min(t, 1.0 - t)


def axis_distance(d, ax1, off1, ax2, off2):
    """Distance between periodized lines v1 + R e_ax1 and v2 + R e_ax2 on T^d."""
    s = 0.0
    for k in range(d):
        if k in (ax1, ax2):
            continue
        s += _pdist(float(off1[k]), float(off2[k])) ** 2
    return s ** 0.5


def _best_on(d, ax, placed, steps, m):
    free = [k for k in range(d) if k != ax]
    js = np.array(list(itertools.product(steps, repeat=len(free))), dtype=int)
    cand = np.zeros((js.shape[0], d))
    cand[:, free] = js / m
    sep = np.full(js.shape[0], np.inf)
    for a2, o2 in placed:
        keep = [k for k in range(d) if k not in (ax, a2)]
        diff = np.abs(cand[:, keep] - np.array([float(o2[k]) for k in keep])) % 1.0
        diff = np.minimum(diff, 1.0 - diff)
        sep = np.minimum(sep, np.sqrt((diff ** 2).sum(1)))
    best = int(np.argmax(sep))
    off = [Fraction(0)] * d
    for k, j in zip(free, js[best]):
        off[k] = Fraction(int(j), m)
    return sep[best], tuple(off)


def _search_offsets(d, axes):
    """Greedy max-min placement on the lattice {j/(4d)}^d, deterministic order.

    Each axis first tries the quarter sublattice and falls back to the full
    lattice only if no positive separation is found there.  Candidates are
    scanned lexicographically; the first maximizer wins.
    """
    m = 4 * d
    placed = []
    for ax in axes:
        sep, off = _best_on(d, ax, placed, range(0, m, d), m)
        if sep <= 0:
            sep, off = _best_on(d, ax, placed, range(m), m)
        if sep <= 0:
            raise PlacementFailed(f"no positive separation for axis {ax}")
        placed.append((ax, off))
    return tuple(o for _, o in placed)


@functools.lru_cache(maxsize=None)
def build_direction_set(d, rho=0.125):
    if d % 2:
        raise OddDimension(f"d={d} is odd")
    if not 0 < rho < 0.25:
        raise BadRho(f"rho={rho} outside (0, 1/4)")
    dirs, frames = make_frames(d)
    axes = [_axis_sign(x)[0] for x in dirs]
    offsets = _search_offsets(d, axes)
    sep = min(
        axis_distance(d, axes[i], offsets[i], axes[j], offsets[j])
        for i in range(len(dirs)) for j in range(i + 1, len(dirs))
    )
    return DirectionSet(d, dirs, frames, 1, offsets, rho, 4 * rho / sep, sep)


def frame_checks(ds):
    """Exact Gram matrices and J xi_perp - xi per direction."""
    out = []
    for fr in ds.frames:
        gram = [[sum(a * b for a, b in zip(u, v)) for v in fr] for u in fr]
        ident = all(gram[i][j] == (1 if i == j else 0) for i in range(len(fr)) for j in range(len(fr)))
        jres = tuple(a - b for a, b in zip(J_exact(fr[1]), fr[0]))
        out.append({"orthonormal": ident, "J_residual": jres, "J_ok": all(c == 0 for c in jres)})
    return out


def decompose(R, ds=None, tol=1e-9):
    """Coefficient map {xi: a_xi(R)} for a unit vector R."""
    R = np.asarray(R, dtype=float)
    nr = np.linalg.norm(R)
    if abs(nr - 1.0) > tol:
        raise NotUnitVector(f"|R| = {nr}")
    d = R.size
    dirs = ds.directions if ds is not None else make_frames(d)[0]
    out = {}
    for xi in dirs:
        ax, s = _axis_sign(xi)
        out[xi] = 0.5 * (1.0 + s * R[ax])
    return out


def coefficient_array(Rhat, ds):
    """Vectorized a_xi for unit-vector samples Rhat (shape (d, ...)); returns list per xi."""
    out = []
    for xi in ds.directions:
        ax, s = _axis_sign(xi)
        out.append(0.5 * (1.0 + s * Rhat[ax]))
    return out


def reconstruct(coeffs):
    d = len(next(iter(coeffs)))
    v = np.zeros(d)
    for xi, a in coeffs.items():
        v += a * np.array([float(c) for c in xi])
    return v


@dataclass
class DisjointReport:
    mu: float
    margins: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(m > 0 for m in self.margins.values())

    def min_margin(self):
        return min(self.margins.values()) if self.margins else np.inf


def verify_disjoint_supports(ds, mu):
    """Sample each cylinder axis at 4*d*mu points per unit length and compare.

    A pair passes when the sampled axis distance exceeds the sum of the two
    support radii 2*rho/mu.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    m = max(int(np.ceil(4 * ds.d * mu)), 1)
    s = np.arange(m) / m
    rep = DisjointReport(mu)
    pts = []
    for idx in range(len(ds)):
        ax, _ = ds.axis(idx)
        base = np.array([float(c) for c in ds.offsets[idx]])
        p = np.tile(base, (m, 1))
        p[:, ax] = (base[ax] + s) % 1.0
        pts.append(p)
    for i in range(len(ds)):
        for j in range(i + 1, len(ds)):
            diff = np.abs(pts[i][:, None, :] - pts[j][None, :, :]) % 1.0
            diff = np.minimum(diff, 1.0 - diff)
            dist = np.sqrt((diff ** 2).sum(-1)).min()
            rep.margins[(i, j)] = dist - 4 * ds.rho / mu
    return rep
