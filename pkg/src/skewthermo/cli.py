"""``skewthermo`` command line: pressure curves, dimensions, Doeblin–Lenstra and beta-map runs.

Every run is described by a JSON config; command-line flags override config
values. Outputs embed the package version and a hash of the effective
config (the worker count is excluded, since it never changes results).

Exit codes: 0 success, 2 config error, 3 numeric failure, 4 resource cap.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from .dimension import (
    MassDeficitError,
    bowen_parameter,
    beta_fiber_dimension,
    beta_global_dimension,
    conditional_fiber_sample,
    global_dimension,
    hd_equilibrium_fiber,
    hd_hat_mu_s,
    local_dimension_estimate,
)
from .diophantine import (
    dl_experiment,
    mu_s_chain,
    mu_s_digit_sampler,
    orbit_integrals,
    theta_pair_scaling,
)
from .io import config_hash, csv_text, dumps
from .shift import ConfigError, DomainError, load_subshift_config
from .systems import (
    GOLDEN,
    BetaSystem,
    GaussIFS,
    InversionError,
    OrbitTerminated,
    beta_induced_map,
    beta_orbit,
    gls_natural_extension_step,
    gls_partition_from_beta,
    load_system,
)
from .thermo import ConvergenceError, ReducibleError, pressure_geometric, pressure_spectral

CACHE_ENV = "SKEWTHERMO_CACHE_DIR"
NUMERIC_ERRORS = (ConvergenceError, InversionError, ReducibleError, MassDeficitError, OrbitTerminated,
                  DomainError, ArithmeticError)
log = logging.getLogger("skewthermo")


class ResourceCap(RuntimeError):
    """A requested size exceeds the built-in limits."""


def _cap(ok, msg):
    if not ok:
        raise ResourceCap(msg)


# ---------------------------------------------------------------------------
# config schema

_REQUIRED = object()


def _number(v, key):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{key} must be a finite number")
    return float(v)


def _positive_int(v, key):
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise ConfigError(f"{key} must be a positive integer")
    return v


def _int(v, key):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{key} must be an integer")
    return v


def _numbers(v, key):
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{key} must be a nonempty list of numbers")
    return [_number(x, key) for x in v]


def _ints(v, key):
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{key} must be a nonempty list of integers")
    return [_positive_int(x, key) for x in v]


def _object(v, key):
    if not isinstance(v, dict):
        raise ConfigError(f"{key} must be an object")
    return v


def _beta_value(v, key):
    if v == "golden":
        return GOLDEN
    b = _number(v, key)
    if b <= 1:
        raise ConfigError(f"{key} must exceed 1")
    return b


SCHEMAS = {
    "pressure": {
        "system": (_object, None),
        "potential": (_object, None),
        "subshift": (_object, None),
        "t": (_numbers, None),
        "schedule": (_ints, None),
        "nodes": (_positive_int, 32),
    },
    "dimension bowen": {"system": (_object, _REQUIRED), "tol": (_number, 1e-12), "nodes": (_positive_int, 32)},
    "dimension equilibrium": {
        "system": (_object, _REQUIRED),
        "s": (_number, _REQUIRED),
        "h": (_number, 1e-4),
        "nodes": (_positive_int, 32),
    },
    "dimension global": {
        "system": (_object, _REQUIRED),
        "s": (_number, _REQUIRED),
        "h": (_number, 1e-4),
        "nodes": (_positive_int, 32),
        "orbit": (_object, None),
    },
    "dimension beta": {
        "beta": (_beta_value, _REQUIRED),
        "frequencies": (_numbers, _REQUIRED),
        "h": (_number, _REQUIRED),
    },
    "dimension empirical": {"sample": (_object, _REQUIRED), "seed": (_int, 0), "min_count": (_positive_int, 8)},
    "doeblin-lenstra classical": {
        "seeds": (_positive_int, 100),
        "n": (_positive_int, 1_000_000),
        "seed": (_int, 0),
        "t": (_numbers, None),
    },
    "doeblin-lenstra mu_s": {
        "s": (_number, _REQUIRED),
        "k": (_positive_int, 3),
        "truncation": (_positive_int, 200),
        "n": (_positive_int, 1_000_000),
        "seed": (_int, 0),
        "radii": (_numbers, None),
        "pairs": (_positive_int, 16),
        "nodes": (_positive_int, 32),
    },
    "beta": {
        "beta": (_beta_value, _REQUIRED),
        "grid": (_positive_int, None),
        "points": (_positive_int, None),
        "seed": (_int, 0),
        "intervals": (_positive_int, 400),
        "orbit": (_object, None),
    },
}

_ORBIT_KEYS = {"n": (_positive_int, 1_000_000), "seed": (_int, 0), "k": (_positive_int, 3),
               "truncation": (_positive_int, 200)}
_SAMPLE_KEYS = {
    "uniform": {"points": (_positive_int, 10_000)},
    "cantor": {"points": (_positive_int, 10_000), "depth": (_positive_int, 40)},
    "gauss-fiber": {"points": (_positive_int, 10_000), "s": (_number, _REQUIRED),
                    "truncation": (_positive_int, 200), "forward": (_positive_int, 1),
                    "depth": (_positive_int, 40)},
    "file": {"path": (None, _REQUIRED)},
}


def _validate(doc, schema, where):
    unknown = set(doc) - set(schema)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    out = {}
    for key, (check, default) in schema.items():
        if key in doc and doc[key] is not None:
            out[key] = check(doc[key], f"{where}.{key}") if check else doc[key]
        elif default is _REQUIRED:
            raise ConfigError(f"missing required key {where}.{key}")
        elif default is not None:
            out[key] = default
    return out


def _validate_orbit(orbit):
    return _validate(orbit, _ORBIT_KEYS, "orbit")


def _validate_sample(sample):
    kind = sample.get("kind")
    if kind not in _SAMPLE_KEYS:
        raise ConfigError(f"sample.kind must be one of {sorted(_SAMPLE_KEYS)}")
    body = {k: v for k, v in sample.items() if k != "kind"}
    out = _validate(body, _SAMPLE_KEYS[kind], "sample")
    out["kind"] = kind
    return out


# ---------------------------------------------------------------------------
# runners; each returns (primary text or JSON-able object, summary or None)


def _header(meta):
    return f"# skewthermo {meta['version']}\n# config_hash {meta['config_hash']}\n"


def run_pressure(cfg, meta, workers):
    has_system, has_sub = "system" in cfg, "subshift" in cfg
    if has_system == has_sub:
        raise ConfigError("pressure needs exactly one of 'system' or 'subshift'")
    rows = []
    if has_system:
        if "potential" not in cfg:
            raise ConfigError("missing required key config.potential")
        pot = _validate(cfg["potential"], {"kind": (None, _REQUIRED), "t": (_numbers, _REQUIRED)}, "potential")
        if pot["kind"] != "geometric":
            raise ConfigError("system potentials must have kind 'geometric'")
        if "t" in cfg:
            raise ConfigError("give the t grid in potential.t for system pressure")
        ifs = load_system(cfg["system"])
        schedule = cfg.get("schedule")
        if schedule is not None:
            if not hasattr(ifs, "truncate") or ifs.theta is None:
                raise ConfigError("a truncation schedule needs a countable system (gauss or mp)")
            if any(b <= a for a, b in zip(schedule, schedule[1:])):
                raise ConfigError("schedule must be strictly increasing")
            _cap(max(schedule) <= 100_000, "truncations above 100000 branches are not supported")
            systems = [ifs.truncate(n) for n in schedule]
        else:
            systems = [ifs]
        for t in pot["t"]:
            for sys_ in systems:
                est = pressure_geometric(sys_, t, nodes=cfg["nodes"])
                rows.append((t, est.value, est.truncation, est.tail_bound))
    else:
        if "potential" in cfg or "schedule" in cfg:
            raise ConfigError("subshift pressure takes its potential inside 'subshift'")
        sub, pot = load_subshift_config(cfg["subshift"])
        if pot is None:
            raise ConfigError("missing required key subshift.potential")
        _cap(len(sub) ** max(pot.kstep or 1, 1) <= 10_000_000, "transfer matrix too large")
        for t in cfg.get("t", [1.0]):
            est = pressure_spectral(sub, pot.scaled(t))
            rows.append((t, est.value, est.truncation, est.tail_bound))
    return _header(meta) + csv_text(["t", "P", "truncation", "tail_bound"], rows), None


def run_bowen(cfg, meta, workers):
    ifs = load_system(cfg["system"])
    return bowen_parameter(ifs, tol=cfg["tol"], nodes=cfg["nodes"]).to_dict(), None


def run_equilibrium(cfg, meta, workers):
    ifs = load_system(cfg["system"])
    return hd_equilibrium_fiber(cfg["s"], ifs, h=cfg["h"], nodes=cfg["nodes"]).to_dict(), None


def run_global(cfg, meta, workers):
    ifs = load_system(cfg["system"])
    fiber = hd_equilibrium_fiber(cfg["s"], ifs, h=cfg["h"], nodes=cfg["nodes"])
    # for the natural extension the base measure is the same equilibrium state
    report = {"global": global_dimension(fiber, fiber).to_dict()}
    if "orbit" in cfg:
        orbit = _validate_orbit(cfg["orbit"])
        _cap(orbit["n"] <= 100_000_000, "orbit length above 1e8 digits")
        _cap(orbit["truncation"] ** orbit["k"] <= 50_000_000, "chain with more than 5e7 transitions")
        stream = mu_s_digit_sampler(cfg["s"], orbit["k"], orbit["truncation"], orbit["seed"],
                                    orbit["n"] + 64, cache_dir=os.environ.get(CACHE_ENV))
        same = hd_equilibrium_fiber(cfg["s"], GaussIFS(orbit["truncation"]), h=cfg["h"], nodes=cfg["nodes"])
        hat = hd_hat_mu_s(cfg["s"], orbit_integrals(stream, orbit["n"]), same)
        hat.inputs["mass_deficit"] = stream.mass_deficit
        report["orbit_formula"] = hat.to_dict()
    return report, None


def run_beta_dimension(cfg, meta, workers):
    sys_ = BetaSystem(cfg["beta"])
    try:
        fiber = beta_fiber_dimension(cfg["frequencies"], sys_, cfg["h"])
        glob = beta_global_dimension(cfg["frequencies"], sys_, cfg["h"])
    except MassDeficitError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return {"fiber": fiber.to_dict(), "global": glob.to_dict()}, None


def run_empirical(cfg, meta, workers):
    sample = _validate_sample(cfg["sample"])
    rng = np.random.default_rng(cfg["seed"])
    extra = {}
    if sample["kind"] == "file":
        try:
            pts = np.loadtxt(sample["path"], dtype=float, ndmin=1)
        except OSError as exc:
            raise ConfigError(f"cannot read sample file: {exc}") from exc
    else:
        _cap(sample["points"] <= 10_000_000, "more than 1e7 sample points")
        if sample["kind"] == "uniform":
            pts = rng.random(sample["points"])
        elif sample["kind"] == "cantor":
            depth = sample["depth"]
            addr = rng.integers(0, 2, (sample["points"], depth))
            pts = (2 * addr * 3.0 ** -np.arange(1, depth + 1)).sum(axis=1)
        else:
            _cap(sample["truncation"] <= 5000, "fiber chains above 5000 digits")
            mu = mu_s_chain(sample["s"], 2, sample["truncation"], os.environ.get(CACHE_ENV))
            pts = conditional_fiber_sample(mu, sample["points"], rng, sample["forward"], sample["depth"])
            ref = hd_equilibrium_fiber(sample["s"], GaussIFS(sample["truncation"]))
            extra["reference"] = ref.to_dict()
    report = local_dimension_estimate(pts, min_count=cfg["min_count"]).to_dict()
    report.update(extra)
    return report, None


def run_dl_classical(cfg, meta, workers):
    _cap(cfg["seeds"] * cfg["n"] <= 10_000_000_000, "more than 1e10 pooled digits")
    ts = cfg.get("t")
    if ts is not None and any(not 0 <= t <= 1 for t in ts):
        raise ConfigError("t values must lie in [0, 1]")
    kwargs = {} if ts is None else {"ts": ts}
    res = dl_experiment(cfg["seeds"], cfg["n"], cfg["seed"], workers=workers, **kwargs)
    table = _header(meta) + csv_text(["t", "F_emp", "F_exact", "deviation"], res.rows())
    summary = {
        "max_deviation": res.max_deviation,
        "total": res.total,
        "redraws": res.redraws,
        "seed": cfg["seed"],
        "seeds": cfg["seeds"],
        "n": cfg["n"],
        "seed_rule": "seed i uses numpy SeedSequence(seed).spawn(seeds)[i]",
        "table": [{"t": t, "F_emp": e, "F_exact": x} for t, e, x, _ in res.rows()],
    }
    return table, summary


def run_dl_mu_s(cfg, meta, workers):
    s = cfg["s"]
    if s <= 0.5:
        raise ConfigError("s must exceed 1/2 (the potential is not summable otherwise)")
    _cap(cfg["n"] <= 100_000_000, "orbit length above 1e8 digits")
    _cap(cfg["truncation"] ** cfg["k"] <= 50_000_000, "chain with more than 5e7 transitions")
    radii = cfg.get("radii", [2.0 ** -j for j in range(3, 9)])
    if any(r <= 0 for r in radii):
        raise ConfigError("radii must be positive")
    stream = mu_s_digit_sampler(s, cfg["k"], cfg["truncation"], cfg["seed"], cfg["n"] + 64,
                                cache_dir=os.environ.get(CACHE_ENV))
    scaling = theta_pair_scaling(stream, cfg["n"], radii, pairs=cfg["pairs"], seed=cfg["seed"])
    fiber = hd_equilibrium_fiber(s, GaussIFS(cfg["truncation"]), nodes=cfg["nodes"])
    hat = hd_hat_mu_s(s, orbit_integrals(stream, cfg["n"]), fiber)
    rows = []
    for i, p in enumerate(scaling.points):
        for r, f, lo, hi in zip(p.radii, p.frequencies, p.lower, p.upper):
            rows.append((i, p.z, p.z_prime, r, f, lo, hi, p.slope))
    table = _header(meta) + csv_text(
        ["pair", "z", "z_prime", "r", "frequency", "lower", "upper", "fitted_slope"], rows)
    summary = {
        "slope": scaling.slope,
        "slope_stderr": scaling.stderr,
        "sandwiched": scaling.sandwiched,
        "hd_hat": hat.to_dict(),
        "mass_deficit": stream.mass_deficit,
        "seed": cfg["seed"],
        "notices": [msg for p in scaling.points for msg in p.notices],
    }
    return table, summary


def run_beta(cfg, meta, workers):
    sys_ = BetaSystem(cfg["beta"])
    if ("grid" in cfg) == ("points" in cfg):
        raise ConfigError("beta needs exactly one of 'grid' or 'points'")
    if "grid" in cfg:
        _cap(cfg["grid"] <= 2000, "grids above 2000 x 2000")
        g = (np.arange(cfg["grid"]) + 0.5) / cfg["grid"]
        x, y = (a.ravel() for a in np.meshgrid(g, g, indexing="ij"))
    else:
        _cap(cfg["points"] <= 1_000_000, "more than 1e6 points")
        rng = np.random.default_rng(cfg["seed"])
        x, y = rng.random(cfg["points"]), rng.random(cfg["points"])
    count = min(cfg["intervals"], len(sys_.partition(cfg["intervals"])))
    gls = gls_partition_from_beta(sys_, count)
    e = gls.locate(x)
    inside = e >= 0
    xg = np.full(len(x), np.nan)
    yg = np.full(len(x), np.nan)
    if inside.any():
        xg[inside], yg[inside] = gls_natural_extension_step(gls, x[inside], y[inside])
    rows, worst, mismatches = [], 0.0, 0
    hist = {}
    kk = gls.meta["k"]
    label = np.empty(len(gls), dtype=np.int64)
    label[gls.order] = np.arange(1, len(gls) + 1)  # interval number n, in partition order
    for i in range(len(x)):
        xi, yi, steps = beta_induced_map(sys_, float(x[i]), float(y[i]))
        if inside[i]:
            res = max(abs(xi - xg[i]), abs(yi - yg[i]))
            worst = max(worst, res)
            want = int(kk[e[i]]) + 1
            mismatches += steps != want
            n_i = int(label[e[i]])
            key = str(n_i)
            hist.setdefault(key, {"k_plus_1": want, "return_times": {}})
            rt = hist[key]["return_times"]
            rt[str(steps)] = rt.get(str(steps), 0) + 1
            rows.append((i, x[i], y[i], xi, yi, xg[i], yg[i], res, steps, n_i, want))
        else:
            rows.append((i, x[i], y[i], xi, yi, math.nan, math.nan, math.nan, steps, 0, 0))
    text = _header(meta) + csv_text(
        ["i", "x", "y", "x_induced", "y_induced", "x_gls", "y_gls", "residual", "return_time", "interval",
         "k_plus_1"], rows)
    summary = {
        "beta": cfg["beta"],
        "points": len(x),
        "outside_partition": int((~inside).sum()),
        "max_residual": worst,
        "return_time_mismatches": int(mismatches),
        "histogram": hist,
        "expansion_of_one": list(sys_.expansion.digits[:16]),
        "finite": sys_.finite,
    }
    if "orbit" in cfg:
        o = _validate(cfg["orbit"], {"x": (_number, _REQUIRED), "y": (_number, _REQUIRED),
                                     "n": (_positive_int, 20), "level": (_int, 0)}, "orbit")
        try:
            dump = beta_orbit(sys_, o["x"], o["y"], o["n"], o["level"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        summary["orbit"] = [{"k": k, "x": xk, "y": yk, "level": lv} for k, xk, yk, lv in dump]
    return text, summary


RUNNERS = {
    "pressure": run_pressure,
    "dimension bowen": run_bowen,
    "dimension equilibrium": run_equilibrium,
    "dimension global": run_global,
    "dimension beta": run_beta_dimension,
    "dimension empirical": run_empirical,
    "doeblin-lenstra classical": run_dl_classical,
    "doeblin-lenstra mu_s": run_dl_mu_s,
    "beta": run_beta,
}

# flag name -> (config key, type) per command
FLAGS = {
    "pressure": {"nodes": int},
    "dimension bowen": {"tol": float, "nodes": int},
    "dimension equilibrium": {"s": float, "h": float, "nodes": int},
    "dimension global": {"s": float, "h": float, "nodes": int},
    "dimension beta": {"h": float},
    "dimension empirical": {"seed": int, "min_count": int},
    "doeblin-lenstra classical": {"seeds": int, "n": int, "seed": int},
    "doeblin-lenstra mu_s": {"s": float, "k": int, "truncation": int, "n": int, "seed": int, "pairs": int},
    "beta": {"beta": float, "grid": int, "points": int, "seed": int, "intervals": int},
}


# ---------------------------------------------------------------------------
# driver


def build_parser():
    parser = argparse.ArgumentParser(prog="skewthermo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"skewthermo {__version__}")
    top = parser.add_subparsers(dest="command", required=True)

    def leaf(sub, name, command, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file (flags override its values)")
        p.add_argument("--out", help="primary output path (default: stdout)")
        p.add_argument("--summary", help="JSON summary path for commands that write one")
        p.add_argument("--workers", type=int, default=None, help="worker threads (default: logical cores)")
        p.add_argument("--quiet", action="store_true", help="no progress messages on stderr")
        for flag, typ in FLAGS[command].items():
            p.add_argument("--" + flag.replace("_", "-"), dest=flag, type=typ, default=None)
        p.set_defaults(run=command)
        return p

    leaf(top, "pressure", "pressure", "pressure curve as CSV (t, P, truncation, tail_bound)")
    dim = top.add_parser("dimension", help="dimension reports as JSON").add_subparsers(dest="sub", required=True)
    leaf(dim, "bowen", "dimension bowen", "Bowen parameter of an IFS")
    leaf(dim, "equilibrium", "dimension equilibrium", "h/chi of the equilibrium state at s")
    leaf(dim, "global", "dimension global", "fiber plus base dimension of the natural extension")
    leaf(dim, "beta", "dimension beta", "beta-map fiber and global dimension from frequencies")
    leaf(dim, "empirical", "dimension empirical", "local-dimension slope of a sample")
    dl = top.add_parser("doeblin-lenstra", help="approximation-coefficient statistics").add_subparsers(
        dest="sub", required=True)
    leaf(dl, "classical", "doeblin-lenstra classical", "empirical CDF of Theta_n against F(t)")
    leaf(dl, "mu_s", "doeblin-lenstra mu_s", "Theta-pair scaling under mu_s digit streams")
    leaf(top, "beta", "beta", "induced-map identity check for a beta-transformation")
    return parser


def _load_config(args, command):
    cfg = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
    declared = cfg.pop("command", None)
    if declared is not None and declared != command:
        raise ConfigError(f"config is for command {declared!r}, not {command!r}")
    for flag in FLAGS[command]:
        value = getattr(args, flag)
        if value is not None:
            cfg[flag] = value
    return _validate(cfg, SCHEMAS[command], "config")


def _write(path, text):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    command = args.run
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="skewthermo: %(message)s", stream=sys.stderr)
    try:
        cfg = _load_config(args, command)
        meta = {"version": __version__, "config_hash": config_hash({"command": command, **cfg}),
                "command": command}
        log.info("%s (config %s)", command, meta["config_hash"])
        primary, summary = RUNNERS[command](cfg, meta, args.workers)
    except ConfigError as exc:
        print(f"skewthermo: config error: {exc}", file=sys.stderr)
        return 2
    except ResourceCap as exc:
        print(f"skewthermo: resource cap: {exc}", file=sys.stderr)
        return 4
    except MemoryError:
        print("skewthermo: resource cap: out of memory", file=sys.stderr)
        return 4
    except NUMERIC_ERRORS as exc:
        print(f"skewthermo: numeric failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"skewthermo: config error: {exc}", file=sys.stderr)
        return 2
    if isinstance(primary, str):
        _write(args.out, primary)
    else:
        _write(args.out, dumps({**meta, "config": cfg, "result": primary}))
    if summary is not None:
        text = dumps({**meta, "config": cfg, "summary": summary})
        if args.summary:
            _write(args.summary, text)
        elif args.out:
            _write(args.out + ".json", text)
        else:
            sys.stderr.write(text)
    log.info("done")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
