"""Run configuration, PFLD1 snapshots and the diagnostics CSV.

Config files hold one ``key = value`` pair per line; ``#`` starts a comment.
``tolerances`` takes comma-separated ``name=value`` pairs.

Diagnostics columns, in order:
stage, L1_R, L1_drho, W2r_dH, Linf_dH, L1_dflux, inf_drho, cutoff_window, residual
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (ExponentHypothesisViolated, FormatError, IoError, ParseError,
                     ValidationError)
from .field import GridSpec, PeriodicScalarField, PeriodicVectorField, TimeField
from .scheme import exponent_hypothesis, make_schedule

DIAG_COLUMNS = ("stage", "L1_R", "L1_drho", "W2r_dH", "Linf_dH", "L1_dflux", "inf_drho",
                "cutoff_window", "residual")

DEFAULT_TOLERANCES = {
    "residual": 1e-6, "mass": 1e-10, "mean_zero": 1e-12, "velocity": 1e-10, "window": 1e-10,
}

_INT_KEYS = {"d", "n", "n_t", "seed", "lambda0"}
_FLOAT_KEYS = {"t_end", "p", "r", "a", "a0", "b", "alpha", "beta", "gamma", "rho_profile", "Delta"}
_STR_KEYS = {"mode", "initializer", "output"}
_KNOWN = _INT_KEYS | _FLOAT_KEYS | _STR_KEYS | {"tolerances"}
_REQUIRED = ("d", "n", "p", "r", "mode", "a")


@dataclass(frozen=True)
class RunConfig:
    grid: GridSpec
    p: float
    r: float
    mode: str
    a: float
    overrides: dict
    rho: float = 0.125
    Delta: float | None = None
    lambda0: int | None = None
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    output: str = "out"
    seed: int = 0
    initializer: str = "tce"
    a0: float = 1.0

    def schedule(self):
        return make_schedule(self.p, self.r, self.grid.d, self.a, self.mode, self.overrides, self.a0)

    def as_dict(self):
        g = self.grid
        return {"d": g.d, "n": g.n, "n_t": g.n_t, "t_end": g.t_end, "p": self.p, "r": self.r,
                "mode": self.mode, "a": self.a, **self.overrides, "rho_profile": self.rho,
                "Delta": self.Delta, "lambda0": self.lambda0, "tolerances": self.tolerances,
                "output": self.output, "seed": self.seed, "initializer": self.initializer, "a0": self.a0}


def _parse_value(key, raw, lineno):
    try:
        if key in _INT_KEYS:
            v = float(raw)
            if v != int(v):
                raise ValueError
            return int(v)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key == "tolerances":
            out = {}
            for part in raw.split(","):
                part = part.strip()
                if not part:
                    continue
                name, _, val = part.partition("=")
                if not _:
                    raise ValueError
                out[name.strip()] = float(val)
            return out
        return raw
    except ValueError:
        raise ParseError(f"line {lineno}: bad value for {key!r}: {raw!r}") from None


def parse_config(text):
    """Parse and validate a key-value config; unknown keys are rejected."""
    vals = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"line {lineno}: expected key = value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _KNOWN:
            raise ParseError(f"line {lineno}: unknown key {key!r}")
        if key in vals:
            raise ParseError(f"line {lineno}: duplicate key {key!r}")
        vals[key] = _parse_value(key, raw, lineno)
    missing = [k for k in _REQUIRED if k not in vals]
    if missing:
        raise ValidationError(f"missing keys: {', '.join(missing)}")
    d = vals["d"]
    try:
        grid = GridSpec(d, vals["n"], vals.get("n_t", 16), vals.get("t_end", 1.0))
    except ValueError as e:
        raise ValidationError(str(e)) from None
    if d % 2:
        raise ValidationError(f"d={d} must be even (symplectic structure)")
    if vals["mode"] not in ("paper", "tame"):
        raise ValidationError(f"mode must be paper or tame, got {vals['mode']!r}")
    p, r = vals["p"], vals["r"]
    if not p > 1 or not r >= 1:
        raise ValidationError(f"need p > 1 and r >= 1 (p={p}, r={r})")
    if not exponent_hypothesis(p, r, d):
        raise ValidationError(
            f"exponent hypothesis 1/p + 1/r > 1 + 1/(d-1) fails: {1 / p + 1 / r:.6g} <= {1 + 1 / (d - 1):.6g}")
    overrides = {k: vals[k] for k in ("b", "alpha", "beta", "gamma") if k in vals}
    if vals["mode"] == "tame":
        need = [k for k in ("b", "alpha", "gamma") if k not in overrides]
        if need:
            raise ValidationError(f"tame mode needs {', '.join(need)}")
    for k, v in overrides.items():
        if not v > 0:
            raise ValidationError(f"{k} must be positive")
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(vals.get("tolerances", {}))
    bad = [k for k, v in tol.items() if not v > 0]
    if bad:
        raise ValidationError(f"tolerances must be positive: {', '.join(bad)}")
    rho = vals.get("rho_profile", 0.125)
    if not 0 < rho < 0.25:
        raise ValidationError(f"rho_profile={rho} outside (0, 1/4)")
    init = vals.get("initializer", "tce")
    if init not in ("tce", "hamil"):
        raise ValidationError(f"initializer must be tce or hamil, got {init!r}")
    cfg = RunConfig(grid, p, r, vals["mode"], vals["a"], overrides, rho, vals.get("Delta"),
                    vals.get("lambda0"), tol, vals.get("output", "out"), vals.get("seed", 0), init,
                    vals.get("a0", 1.0))
    try:
        cfg.schedule()
    except ExponentHypothesisViolated as e:
        raise ValidationError(str(e)) from None
    except ValueError as e:
        raise ValidationError(str(e)) from None
    return cfg


def load_config(path):
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as e:
        raise IoError(str(e)) from None


# ---------------------------------------------------------------- PFLD1

_MAGIC = "PFLD1"


def _x1_fastest(a, d):
    """Reorder the last d axes so that x_1 varies fastest in C order."""
    lead = a.ndim - d
    return np.transpose(a, tuple(range(lead)) + tuple(range(a.ndim - 1, lead - 1, -1)))


def write_snapshot(obj, path):
    if isinstance(obj, TimeField):
        g = obj.grid
        arrays = obj.arrays()
        nt = g.n_t
    elif isinstance(obj, PeriodicVectorField):
        g = obj.grid
        arrays = obj.components
        nt = 0
    elif isinstance(obj, PeriodicScalarField):
        g = obj.grid
        arrays = (obj.values,)
        nt = 0
    else:
        raise TypeError(f"cannot snapshot {type(obj).__name__}")
    d, n = g.d, g.n
    comps = len(arrays)
    header = f"{_MAGIC} d={d} n={n} comps={comps} nt={nt}\n"
    try:
        with open(path, "wb") as fh:
            fh.write(header.encode("ascii"))
            steps = range(nt) if nt else [None]
            for j in steps:
                for a in arrays:
                    s = a[j] if j is not None else a
                    full = np.broadcast_to(s, g.shape)
                    fh.write(np.ascontiguousarray(_x1_fastest(full, d), dtype="<f8").tobytes())
    except OSError as e:
        raise IoError(str(e)) from None


def _parse_header(line):
    parts = line.split()
    if not parts or parts[0] != _MAGIC:
        raise FormatError("missing PFLD1 magic")
    kv = {}
    for p in parts[1:]:
        k, sep, v = p.partition("=")
        if not sep:
            raise FormatError(f"bad header token {p!r}")
        try:
            kv[k] = int(v)
        except ValueError:
            raise FormatError(f"non-integer header value {p!r}") from None
    if set(kv) != {"d", "n", "comps", "nt"}:
        raise FormatError(f"header keys {sorted(kv)} != ['comps', 'd', 'n', 'nt']")
    return kv


def read_snapshot(path, t_end=1.0):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as e:
        raise IoError(str(e)) from None
    nl = raw.find(b"\n")
    if nl < 0 or nl > 256:
        raise FormatError("header line not found")
    try:
        kv = _parse_header(raw[:nl].decode("ascii"))
    except UnicodeDecodeError:
        raise FormatError("header is not ASCII") from None
    d, n, comps, nt = kv["d"], kv["n"], kv["comps"], kv["nt"]
    try:
        grid = GridSpec(d, n, max(nt, 2), t_end)
    except ValueError as e:
        raise FormatError(str(e)) from None
    count = max(nt, 1) * comps * n ** d
    payload = raw[nl + 1:]
    if len(payload) != 8 * count:
        raise FormatError(f"payload has {len(payload)} bytes, header implies {8 * count}")
    flat = np.frombuffer(payload, dtype="<f8").astype(float)
    rev = (n,) * d
    data = flat.reshape((max(nt, 1), comps) + rev)
    # undo the x_1-fastest ordering
    data = np.transpose(data, (0, 1) + tuple(range(data.ndim - 1, 1, -1)))
    data = np.ascontiguousarray(data)
    if nt:
        if comps == 1:
            return TimeField(grid, data[:, 0])
        return TimeField(grid, tuple(data[:, c] for c in range(comps)))
    if comps == 1:
        return PeriodicScalarField(grid, data[0, 0])
    return PeriodicVectorField(grid, tuple(data[0, c] for c in range(comps)))


# ---------------------------------------------------------------- diagnostics

def _fmt(v):
    if v is None:
        return "nan"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "nan" if math.isnan(v) else repr(v)


def emit_diagnostics(ledger, path, seed=None):
    """Write one CSV row per ledger entry with the fixed column order."""
    rows = list(ledger)
    if not rows:
        raise ValueError("empty diagnostics ledger")
    try:
        with open(path, "w", newline="") as fh:
            if seed is not None:
                fh.write(f"# seed={seed}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(DIAG_COLUMNS)
            for r in rows:
                w.writerow([_fmt(r.get(c)) for c in DIAG_COLUMNS])
    except OSError as e:
        raise IoError(str(e)) from None


def read_diagnostics(path):
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rdr = csv.reader(lines)
    header = next(rdr)
    return header, [row for row in rdr]


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, float) and (math.isinf(v) or math.isnan(v)):
        return str(v)
    if isinstance(v, (int, float, str, bool)) or v is None:
        return v
    return str(v)


def write_resolved_schedule(cfg, path, stages=3):
    """Dump the config and every derived schedule constant as JSON."""
    out = {"config": cfg.as_dict(), "schedule": cfg.schedule().as_dict(stages)}
    try:
        with open(path, "w") as fh:
            json.dump(_jsonable(out), fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as e:
        raise IoError(str(e)) from None


def ensure_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise IoError(str(e)) from None
