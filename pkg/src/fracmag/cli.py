"""Command-line entry point.

Usage::

    fracmag <verb> [--config FILE] [--out PATH] [--format csv|json] key=value ...

Configuration files hold flat ``key=value`` lines (``#`` starts a comment);
``key=value`` arguments on the command line override them.  Unknown keys are
rejected.  Every output carries a provenance header with the tool version and
the fully resolved configuration, and is written atomically.

Exit codes: 0 success, 2 parse or domain error, 3 capability or capacity
error, 4 numerical non-convergence.  Failures print an error JSON on stderr.

Value syntax
------------
potential : ``zero``, ``linear:d``, ``linear:a,b,c`` (diagonal matrix),
    ``radial:c`` (constant profile ``A = c x``) or ``file:PATH``
field : ``gaussian[:a]`` (``exp(-a|x|^2)``, default ``a=0.5``),
    ``constant[:c]`` or ``file:PATH``
grid : ``cart:n:L`` or ``radial:n:R``
points : ``x,y,z;x,y,z;...`` or ``file:PATH`` (CSV with header ``x,y,z``)
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import __version__
from .bbm import bbm_sweep
from .energy import (CapacityError, ChoquardParams, PairQuadratureSpec, discrete_form)
from .field import (CartesianGrid, ConstantField, ExtrapolationError, GaussianField,
                    LinearPotential, RadialGrid, RadialPotential, SampledField, StencilError,
                    ZeroPotential, read_field_csv, read_potential_csv, write_field_csv)
from .io import read_csv_table, write_csv_rows, write_json
from .kernel import FracParams, kernel_mass
from .operator import CapabilityError, QuadratureSpec, TruncationError, apply_regularized
from .quadrature import QuadratureError
from .solver import MinimizeConfig, NonConvergenceError, minimize_choquard, minimize_power
from .specfun import bessel_k

__all__ = ["ConfigError", "RunConfig", "parse_config", "run", "main", "VERBS"]

EXIT_OK, EXIT_PARSE, EXIT_CAPACITY, EXIT_NONCONV = 0, 2, 3, 4


class ConfigError(ValueError):
    """Malformed or incomplete configuration."""


# ---------------------------------------------------------------------------
# value parsers


def _float(v: str) -> float:
    return float(v)


def _int(v: str) -> int:
    return int(v)


def _bool(v: str) -> bool:
    t = v.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _floats(v: str) -> list[float]:
    out = [float(t) for t in v.split(",") if t.strip()]
    if not out:
        raise ValueError("empty list")
    return out


def _optional_float(v: str) -> float | None:
    return None if v.strip().lower() in ("", "none") else float(v)


def _text(v: str) -> str:
    return v.strip()


def parse_potential(spec: str):
    kind, _, arg = spec.partition(":")
    if kind == "zero" and not arg:
        return ZeroPotential()
    if kind == "linear":
        d = _floats(arg)
        if len(d) == 1:
            d = d * 3
        if len(d) != 3:
            raise ValueError("linear potential takes 1 or 3 diagonal entries")
        return LinearPotential(np.diag(d))
    if kind == "radial":
        return RadialPotential.constant(float(arg))
    if kind == "file":
        return read_potential_csv(_existing(arg))
    raise ValueError(f"unknown potential spec {spec!r}")


def parse_grid(spec: str):
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid spec must be cart:n:L or radial:n:R, got {spec!r}")
    n, size = int(parts[1]), float(parts[2])
    if parts[0] == "cart":
        return CartesianGrid(n, size)
    if parts[0] == "radial":
        return RadialGrid(n, size)
    raise ValueError(f"unknown grid kind {parts[0]!r}")


def parse_field(spec: str, grid=None) -> SampledField:
    """Named analytic field sampled on ``grid``, or a field CSV."""
    kind, _, arg = spec.partition(":")
    if kind == "file":
        return read_field_csv(_existing(arg))
    if kind == "gaussian":
        f = GaussianField(float(arg) if arg else 0.5)
    elif kind == "constant":
        f = ConstantField(complex(arg) if arg else 1.0)
    else:
        raise ValueError(f"unknown field spec {spec!r}")
    if grid is None:
        raise ValueError("analytic fields need a grid")
    return SampledField.from_analytic(grid, f)


def parse_points(spec: str) -> np.ndarray:
    if spec.startswith("file:"):
        header, data = read_csv_table(_existing(spec[5:]))
        if header[:3] != ["x", "y", "z"]:
            raise ValueError("points file needs header x,y,z")
        return data[:, :3]
    pts = [[float(t) for t in chunk.split(",")] for chunk in spec.split(";") if chunk.strip()]
    arr = np.asarray(pts, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3 or len(arr) == 0:
        raise ValueError("points must be x,y,z triples separated by ';'")
    return arr


def _existing(path: str) -> str:
    if not os.path.isfile(path):
        raise ConfigError(f"input file not found: {path}")
    return path


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    """Resolved run: verb, parsed parameters, output path and format."""

    verb: str
    params: dict
    raw: dict
    out_path: str
    format: str

    def provenance(self) -> list[str]:
        lines = [f"fracmag {__version__}", f"verb={self.verb}", f"format={self.format}"]
        lines += [f"{k}={self.raw[k]}" for k in sorted(self.raw)]
        return lines


@dataclass(frozen=True)
class _Verb:
    keys: dict
    formats: tuple
    action: Callable = field(repr=False)


def _read_config_file(path: str) -> dict:
    out = {}
    with open(_existing(path)) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            k, sep, v = line.partition("=")
            if not sep or not k.strip():
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            out[k.strip()] = v.strip()
    return out


def parse_config(verb: str, config_path: str | None, overrides: list[str],
                 out_path: str | None = None, fmt: str | None = None) -> RunConfig:
    """Merge the config file and overrides, validate keys and parse values.

    Raises
    ------
    ConfigError
        Unknown verb or key, bad value, or an empty configuration.
    """
    if verb not in VERBS:
        raise ConfigError(f"unknown verb {verb!r}; expected one of {sorted(VERBS)}")
    spec = VERBS[verb]
    raw = _read_config_file(config_path) if config_path else {}
    for item in overrides:
        k, sep, v = item.partition("=")
        if not sep or not k.strip():
            raise ConfigError(f"override {item!r} is not key=value")
        raw[k.strip()] = v.strip()
    if not raw:
        raise ConfigError("empty configuration: give a config file or key=value overrides")
    unknown = sorted(set(raw) - set(spec.keys))
    if unknown:
        raise ConfigError(f"unknown keys for {verb}: {unknown}; allowed: {sorted(spec.keys)}")
    resolved = {k: raw.get(k, default) for k, (_, default) in spec.keys.items()}
    params = {}
    for k, v in resolved.items():
        conv = spec.keys[k][0]
        try:
            params[k] = conv(v)
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value for {k}: {v!r} ({exc})") from exc
    fmt = fmt or spec.formats[0]
    if fmt not in spec.formats:
        raise ConfigError(f"{verb} supports formats {list(spec.formats)}, got {fmt!r}")
    out_path = out_path or f"{verb}.{fmt}"
    return RunConfig(verb, params, resolved, out_path, fmt)


# ---------------------------------------------------------------------------
# writers


def _write_table(cfg: RunConfig, header: list[str], rows) -> None:
    rows = [list(r) for r in rows]
    if cfg.format == "csv":
        write_csv_rows(cfg.out_path, header, rows, cfg.provenance())
    else:
        write_json(cfg.out_path, {"provenance": cfg.provenance(), "columns": header,
                                  "rows": [dict(zip(header, r)) for r in rows]})


def _summary_path(path: str) -> str:
    root, ext = os.path.splitext(path)
    return (root if ext.lower() == ".csv" else path) + ".json"


# ---------------------------------------------------------------------------
# verbs


def _specfun_table(cfg: RunConfig) -> None:
    P = cfg.params
    rows = []
    for nu in P["nu"]:
        ev = bessel_k(nu, np.asarray(P["zeta"]), rtol=P["rtol"])
        for z, k, e in zip(np.atleast_1d(ev.zeta), np.atleast_1d(ev.value),
                           np.atleast_1d(ev.est_rel_err)):
            rows.append((nu, float(z), float(k), float(e)))
    _write_table(cfg, ["nu", "zeta", "k", "est_rel_err"], rows)


def _kernel_check(cfg: RunConfig) -> None:
    rows = []
    for s in cfg.params["s"]:
        for m in cfg.params["m"]:
            p = FracParams(s, m)
            mass = kernel_mass(p)
            target = s * m ** (2.0 * s - 2.0)
            rows.append((s, m, mass, target, abs(mass - target)))
    _write_table(cfg, ["s", "m", "kernel_mass", "target", "abs_err"], rows)


def _fracparams(P) -> FracParams:
    return FracParams(P["s"], P["m"])


def _apply_op(cfg: RunConfig) -> None:
    P = cfg.params
    p = _fracparams(P)
    A = parse_potential(P["potential"])
    u = parse_field(P["field"], parse_grid(P["grid"]))
    u = u.analytic if u.analytic is not None else u
    q = QuadratureSpec(n_radial=P["n_radial"], n_angular=P["n_angular"], r_sub=P["r_sub"],
                       r_far=P["r_far"])
    rows = []
    for x in parse_points(P["points"]):
        ov = apply_regularized(p, A, u, x, q)
        v = complex(ov.value)
        rows.append((*map(float, x), v.real, v.imag, float(ov.est_err)))
    _write_table(cfg, ["x", "y", "z", "re", "im", "est_err"], rows)


def _pairq(P) -> PairQuadratureSpec:
    return PairQuadratureSpec(sigma_factor=P["sigma_factor"], correction=P["correction"],
                              lattice_radius=P["lattice_radius"],
                              stencil_half_width=P["stencil_half_width"])


def _energy(cfg: RunConfig) -> None:
    P = cfg.params
    p = _fracparams(P)
    A = parse_potential(P["potential"])
    u = parse_field(P["field"], parse_grid(P["grid"]))
    rep = discrete_form(p, A, u.grid, _pairq(P), P["domain_radius"]).report(u.values)
    d = rep.as_dict()
    if cfg.format == "json":
        write_json(cfg.out_path, {"provenance": cfg.provenance(), **d})
    else:
        keys = sorted(d)
        write_csv_rows(cfg.out_path, keys, [[d[k] for k in keys]], cfg.provenance())


def _bbm_sweep(cfg: RunConfig) -> None:
    P = cfg.params
    A = parse_potential(P["potential"])
    u = parse_field(P["field"], parse_grid(P["grid"]))
    res = bbm_sweep(A, u, P["s"], P["m"], _pairq(P), P["domain_radius"])
    _write_table(cfg, ["s", "seminorm_energy", "local_energy", "rel_gap"], res.rows())


def _groundstate(cfg: RunConfig) -> None:
    P = cfg.params
    p = _fracparams(P)
    A = parse_potential(P["potential"])
    grid = parse_grid(P["grid"])
    mc = MinimizeConfig(grid, p_exp=P["p"], max_iters=P["max_iters"],
                        tol_energy=P["tol_energy"], tol_residual=P["tol_residual"],
                        seed=P["seed"], constraint=P["constraint"],
                        init_width=P["init_width"], allow_critical=P["allow_critical"])
    if P["alpha"] is None:
        lo, hi = 2.0, p.crit_exp
        ok = lo < P["p"] < hi or (P["allow_critical"] and abs(P["p"] - hi) <= 1e-12 * hi)
        if not ok:
            raise ConfigError(f"p={P['p']} outside the admissible range ({lo}, {hi:.6g}) "
                              f"for s={p.s}")
        gs = minimize_power(p, A, mc)
    else:
        cp = ChoquardParams(P["alpha"], P["p"], P["riesz_mode"])
        lo, hi = cp.admissible_range(p.s)
        if not lo < P["p"] < hi:
            raise ConfigError(f"p={P['p']} outside the admissible range ({lo:.6g}, {hi:.6g}) "
                              f"for s={p.s}, alpha={cp.alpha}")
        gs = minimize_choquard(p, A, cp, mc)
    prov = cfg.provenance()
    write_field_csv(cfg.out_path, gs.u, prov)
    write_json(_summary_path(cfg.out_path), {"provenance": prov, **gs.summary()})


_COMMON = {
    "s": (_float, "0.5"),
    "m": (_float, "1"),
    "potential": (_text, "zero"),
}
_PAIR = {
    "sigma_factor": (_float, "2"),
    "correction": (_bool, "true"),
    "lattice_radius": (_optional_float, "none"),
    "stencil_half_width": (_int, "8"),
    "domain_radius": (_optional_float, "none"),
}

VERBS: dict[str, _Verb] = {
    "specfun-table": _Verb({"nu": (_floats, "0.5,1.5,2.5"), "zeta": (_floats, "0.1,1,5,20"),
                            "rtol": (_float, "1e-12")}, ("csv", "json"), _specfun_table),
    "kernel-check": _Verb({"s": (_floats, "0.5"), "m": (_floats, "1")}, ("csv", "json"),
                          _kernel_check),
    "apply-op": _Verb({**_COMMON, "field": (_text, "gaussian"), "grid": (_text, "cart:17:6"),
                       "points": (_text, "0,0,0"), "n_radial": (_int, "16"),
                       "n_angular": (_int, "50"), "r_sub": (_float, "0.5"),
                       "r_far": (_optional_float, "none")}, ("csv", "json"), _apply_op),
    "energy": _Verb({**_COMMON, **_PAIR, "field": (_text, "gaussian"),
                     "grid": (_text, "cart:17:6")}, ("json", "csv"), _energy),
    "bbm-sweep": _Verb({**_COMMON, **_PAIR, "s": (_floats, "0.7,0.9,0.99"),
                        "field": (_text, "gaussian"), "grid": (_text, "cart:17:6")},
                       ("csv", "json"), _bbm_sweep),
    "groundstate": _Verb({**_COMMON, "p": (_float, "2.5"), "alpha": (_optional_float, "none"),
                          "riesz_mode": (_text, "standard"), "grid": (_text, "radial:40:8"),
                          "max_iters": (_int, "500"), "tol_residual": (_float, "1e-8"),
                          "tol_energy": (_float, "0"), "seed": (_int, "0"),
                          "constraint": (_float, "1"), "init_width": (_float, "1"),
                          "allow_critical": (_bool, "false")}, ("csv",), _groundstate),
}


# ---------------------------------------------------------------------------
# dispatch


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, (CapacityError, CapabilityError, ExtrapolationError, StencilError)):
        return EXIT_CAPACITY
    if isinstance(exc, (NonConvergenceError, QuadratureError, TruncationError)):
        return EXIT_NONCONV
    return EXIT_PARSE


def run(cfg: RunConfig) -> int:
    """Execute a parsed run; exceptions propagate to the caller."""
    VERBS[cfg.verb].action(cfg)
    return EXIT_OK


def _fail(exc: BaseException, code: int) -> int:
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="fracmag", description=__doc__.split("\n\n")[0],
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("verb", help=", ".join(VERBS))
    ap.add_argument("--config", help="flat key=value config file")
    ap.add_argument("--out", help="output path (default <verb>.<format>)")
    ap.add_argument("--format", choices=("csv", "json"))
    ap.add_argument("overrides", nargs="*", help="key=value overrides")
    args = ap.parse_intermixed_args(argv)
    try:
        cfg = parse_config(args.verb, args.config, args.overrides, args.out, args.format)
        return run(cfg)
    except (ValueError, OSError, RuntimeError) as exc:
        return _fail(exc, _exit_code(exc))


if __name__ == "__main__":
    sys.exit(main())
