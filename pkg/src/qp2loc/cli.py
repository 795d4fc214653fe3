"""Batch runner: ``qp2loc <command> --config file.toml --seed 42 --out dir/ --threads N``.

Every run writes its tables as CSV, a ``result.json``, optional SVG plots and
a ``manifest.json`` holding the normalized config, its SHA-256 and the
library version.  Wall time goes to the log on stderr only, so CSV and JSON
outputs are byte-identical between runs with the same config and seed.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import itertools
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, svg
from .arithmetic import ThinBand, frac_part, lattice_points_in_band, resolve_omega
from .green import ResonantEnergyError, Resolvent, badset_measure_on_line, classify, multiscale_sweep
from .interaction import from_dict as interaction_from_dict
from .levelset import find_level_segment, fit_alpha, sublevel_measure
from .localization import (annulus_points, annulus_scan, decay_profile, double_resonance_scan,
                           eigensolve, mid_spectrum_states, poisson_check)
from .operator import assemble, make_region, region_from_dict, square
from .potential import FourierPotential, SegmentParams, classify_symmetry, preset

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("qp2loc")

MAX_SOLVES = 1_000_000


class ConfigError(ValueError):
    pass


@dataclass
class Output:
    tables: dict = field(default_factory=dict)  # name -> (header, rows)
    result: dict = field(default_factory=dict)
    svgs: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)


# ------------------------------------------------------------ parameters

SYSTEM = {"lambda": 20.0, "omega": "golden", "theta": [0.1, 0.2], "potential": "cos",
          "interaction": {"type": "zero"}, "N": 10}


def _system(lam=None, **over):
    # "lambda" is a keyword, so defaults pass it as lam
    d = dict(SYSTEM)
    if lam is not None:
        d["lambda"] = lam
    d.update(over)
    return d


def _potential(spec) -> FourierPotential:
    if isinstance(spec, str):
        return preset(spec)
    if isinstance(spec, dict):
        return FourierPotential.from_json(spec)
    raise ConfigError("potential must be a preset name or a table of modes")


def _region(p):
    if "region" in p:
        return region_from_dict(p["region"])
    return square(int(p["N"]))


def _hamiltonian(p, region=None):
    U = interaction_from_dict(p["interaction"])
    return assemble(_region(p) if region is None else region, float(p["lambda"]), p["omega"],
                    tuple(p["theta"]), _potential(p["potential"]), U)


# -------------------------------------------------------------- commands


def run_symmetry(p, seed):
    rep = classify_symmetry(_potential(p["potential"]), tol=float(p["tol"]))
    res = {"kind": rep.kind.value, "theta_sym": rep.theta_sym}
    table = (["kind", "theta_sym", "residual_I", "residual_II"],
             [[rep.kind.value, rep.theta_sym, rep.residual_I, rep.residual_II]])
    return Output({"symmetry": table}, res, summary=dict(res))


def run_levelset(p, seed):
    v = _potential(p["potential"])
    seg = SegmentParams(float(p["a"]), float(p["b"]))
    rows = []
    for d in p["deltas"]:
        r = sublevel_measure(v, seg, float(p["E"]), float(d), int(p["resolution"]), float(p["offset"]))
        rows.append([r.delta, r.measure])
    alpha = fit_alpha(v, seg, float(p["E"]), p["deltas"], int(p["resolution"])) if len(p["deltas"]) >= 2 else math.nan
    found = find_level_segment(v, float(p["E"]))
    res = {"alpha": alpha, "segment": None if found is None else
           {"a": found.params.a, "b": found.params.b, "residual": found.residual, "source": found.source}}
    return Output({"levelset": (["delta", "measure"], rows)}, res,
                  summary={"alpha": alpha, "has_segment": found is not None})


def run_green_scan(p, seed):
    gamma, b = float(p["gamma"]), float(p["b"])
    if p["mode"] == "line":
        m = badset_measure_on_line(p["p0"], p["p1"], _region(p), float(p["E"]), gamma, b,
                                   int(p["n_samples"]), float(p["lambda"]), p["omega"],
                                   _potential(p["potential"]), interaction_from_dict(p["interaction"]),
                                   seed=seed, all_translations=bool(p["all_translations"]))
        keys = ["measure", "ci_low", "ci_high", "n_bad", "n_samples", "length"]
        vals = {k: getattr(m, k) for k in keys}
        return Output({"badset": (keys, [[vals[k] for k in keys]])}, vals,
                      summary={k: vals[k] for k in ("measure", "ci_low", "ci_high")})
    if p["mode"] != "energies":
        raise ConfigError(f"mode must be 'energies' or 'line', not {p['mode']!r}")
    H = _hamiltonian(p)
    R = Resolvent(H)
    lead = [H.region.sigma, H.theta[0], H.theta[1]]
    rows, n_bad = [], 0
    for E in np.linspace(float(p["E_min"]), float(p["E_max"]), int(p["n_E"])):
        try:
            r = classify(H, float(E), gamma, b, bool(p["all_translations"]), float(p["relax"]), resolvent=R)
            rows.append(lead + [float(E), r.norm, r.hs_norm, r.gamma_fit, r.good_norm, r.good_decay, r.good, False])
            n_bad += not r.good
        except ResonantEnergyError:
            rows.append(lead + [float(E), math.inf, math.inf, math.nan, False, False, False, True])
            n_bad += 1
    header = ["scale", "theta1", "theta2", "E", "norm", "hs_norm", "gamma_fit", "good_norm", "good_decay", "good", "resonant"]
    frac = n_bad / len(rows) if rows else math.nan
    res = {"n_energies": len(rows), "bad_fraction": frac}
    return Output({"green_scan": (header, rows)}, res, summary=dict(res))


def _band(p) -> ThinBand:
    kind = p["band"]
    if kind == "full_square":
        return ThinBand.full_square()
    if kind == "empty":
        return ThinBand.empty()
    if kind == "parabolic":
        return ThinBand.parabolic(float(p["width"]), float(p["shift"]), float(p["curvature"]),
                                  tuple(p["interval"]))
    raise ConfigError(f"unknown band {kind!r}; use full_square, empty or parabolic")


def run_arith_count(p, seed, threads=1):
    bc = lattice_points_in_band(_band(p), p["omega"], int(p["N"]), float(p["delta_dio"]), threads=threads)
    res = {"count": bc.count, "N": bc.N, "eta": bc.eta, "envelope": bc.envelope}
    omega = resolve_omega(p["omega"])
    rows = [[int(a), int(c), float(frac_part(a, omega)), float(frac_part(c, omega))] for a, c in bc.points]
    return Output({"points": (["k1", "k2", "theta1", "theta2"], rows)}, res, summary={"count": bc.count})


def run_spectrum(p, seed):
    H = _hamiltonian(p)
    ep = eigensolve(H, tuple(p["window"]) if p["window"] else None)
    p4 = np.sum(ep.vectors ** 4, axis=0)
    rows = [[i, float(e), float(q)] for i, (e, q) in enumerate(zip(ep.values, p4))]
    res = {"n": len(ep), "min": float(ep.values.min()) if len(ep) else math.nan,
           "max": float(ep.values.max()) if len(ep) else math.nan}
    return Output({"spectrum": (["index", "eigenvalue", "ipr"], rows)}, res, summary=dict(res))


def run_decay(p, seed):
    H = _hamiltonian(p)
    ep = mid_spectrum_states(H, int(p["n_states"]), float(p["mu"]))
    rows, rates = [], []
    for i, (E, psi) in enumerate(ep):
        d = decay_profile(psi, H.region, E)
        rows.append([i, d.eigenvalue, d.center[0], d.center[1], d.rate, d.r2, d.ipr, d.fit])
        if d.fit:
            rates.append(d.rate)
    med = float(np.median(rates)) if rates else math.nan
    res = {"n_states": len(ep), "n_fit": len(rates), "median_rate": med}
    svgs = {}
    if len(ep):
        (a1, a2), (b1, b2) = H.region.bounds
        img = np.full((b2 - a2 + 1, b1 - a1 + 1), np.nan)
        s = H.region.sites
        psi = ep.vectors[:, len(ep) // 2]
        with np.errstate(divide="ignore"):
            img[s[:, 1] - a2, s[:, 0] - a1] = np.log10(np.maximum(np.abs(psi), 1e-300))
        svgs["decay_heatmap"] = svg.heatmap(img, title=f"log10|psi|, E={ep.values[len(ep) // 2]:.6g}")
    header = ["index", "eigenvalue", "center1", "center2", "rate", "r2", "ipr", "fit"]
    return Output({"decay": (header, rows)}, res, svgs, summary=dict(res))


def run_poisson(p, seed):
    H = _hamiltonian(p)
    (a1, a2), (b1, b2) = H.region.bounds
    if min(b1 - a1, b2 - a2) < 4:
        raise ConfigError("poisson needs a box of side >= 5")
    ep = eigensolve(H)
    rng = np.random.default_rng(seed)
    rows = []
    for k in range(int(p["n_pairs"])):
        j = int(rng.integers(len(ep)))
        x = np.sort(rng.integers(a1 + 1, b1, size=2))
        y = np.sort(rng.integers(a2 + 1, b2, size=2))
        sub = make_region(((x[0], x[1]), (y[0], y[1])))
        m = sub.sites[rng.integers(len(sub))]
        try:
            r = poisson_check(H, ep.vectors[:, j], float(ep.values[j]), sub, m)
        except ResonantEnergyError:
            r = math.nan
        rows.append([k, float(ep.values[j]), int(m[0]), int(m[1]), int(x[0]), int(x[1]), int(y[0]), int(y[1]), r])
    resid = [r[-1] for r in rows if math.isfinite(r[-1])]
    res = {"n_pairs": len(rows), "n_skipped": len(rows) - len(resid),
           "max_residual": max(resid) if resid else math.nan}
    header = ["pair", "E", "m1", "m2", "x_lo", "x_hi", "y_lo", "y_hi", "residual"]
    return Output({"poisson": (header, rows)}, res, summary=dict(res))


def run_double_resonance(p, seed):
    sc = double_resonance_scan(p["omega"], float(p["lambda"]), tuple(p["theta"]), _potential(p["potential"]),
                               interaction_from_dict(p["interaction"]), int(p["N"]), int(p["M"]),
                               float(p["K_lo"]), float(p["K_hi"]), float(p["gamma"]), float(p["b"]),
                               float(p["relax"]))
    rows = [[k1, k2, float(sc.energies[hit]) if hit >= 0 else None, m_good, n_good]
            for k1, k2, hit, m_good, n_good in sc.records]
    res = {"n_scanned": len(sc.scanned), "n_bad": len(sc.bad_pairs), "bad_fraction": sc.bad_fraction,
           "n_energies": len(sc.energies)}
    header = ["k1", "k2", "Ej", "Mbox_good", "Nbox_good"]
    return Output({"double_resonance": (header, rows)}, res, summary=dict(res))


def run_annulus(p, seed):
    r = annulus_scan(float(p["lambda"]), p["omega"], tuple(p["theta"]), _potential(p["potential"]),
                     interaction_from_dict(p["interaction"]), float(p["E"]), int(p["N"]), float(p["r0"]),
                     float(p["gamma"]), float(p["b"]), float(p["relax"]))
    res = {"R": r.R, "R_min": r.candidates[0], "R_max": r.candidates[1], "width": r.width, "n_boxes": r.n_boxes}
    return Output({"annulus": (list(res), [list(res.values())])}, res, summary={"R": r.R, "n_boxes": r.n_boxes})


def run_multiscale(p, seed):
    rows = multiscale_sweep(float(p["lambda"]), p["omega"], _potential(p["potential"]),
                            interaction_from_dict(p["interaction"]), float(p["E"]), tuple(p["ladder"]),
                            float(p["gamma"]), float(p["b"]), int(p["n_boxes"]), tuple(p["theta"]),
                            int(p["spread"]), seed)
    table = [[r.N, r.bad_fraction, r.gamma_fit, r.n_boxes] for r in rows]
    last = rows[-1]
    res = {"scales": [r.N for r in rows], "bad_fraction": last.bad_fraction, "gamma_fit": last.gamma_fit}
    plot = svg.polyline([r.N for r in rows], {"gamma_fit": [r.gamma_fit for r in rows],
                                              "bad_fraction": [r.bad_fraction for r in rows]},
                        title="multiscale sweep")
    return Output({"multiscale": (["N", "bad_fraction", "gamma_fit", "n_boxes"], table)}, res,
                  {"multiscale": plot}, summary={"bad_fraction": last.bad_fraction, "gamma_fit": last.gamma_fit})


@dataclass(frozen=True)
class Command:
    run: object
    defaults: dict
    cost: object  # parameters -> projected number of solves
    summary: object  # summary column names, or parameters -> names

    def summary_keys(self, params) -> tuple:
        return tuple(self.summary(params)) if callable(self.summary) else self.summary


def _annulus_cost(p):
    w = p["N"] ** (p["r0"] / 4)
    return int((2 * (p["N"] ** p["r0"] + w) + 1) ** 2)


COMMANDS = {
    "symmetry": Command(run_symmetry, {"potential": "sin", "tol": 1e-9}, lambda p: 1,
                        ("kind", "theta_sym")),
    "levelset": Command(run_levelset, {"potential": "sin", "E": 0.001, "a": 1.0, "b": 0.51, "offset": 0.0,
                                       "deltas": [1e-6, 1e-5, 1e-4, 1e-3, 1e-2], "resolution": 4096},
                        lambda p: len(p["deltas"]), ("alpha", "has_segment")),
    "green-scan": Command(run_green_scan, _system(N=5, mode="energies", E_min=-10.0, E_max=10.0, n_E=21,
                                                  E=0.37, p0=[0.0, 0.2], p1=[1.0, 0.2], n_samples=1000,
                                                  gamma=1.0, b=0.9, relax=1.0, all_translations=False),
                          lambda p: p["n_samples"] if p["mode"] == "line" else p["n_E"],
                          lambda p: (("measure", "ci_low", "ci_high") if p["mode"] == "line"
                                     else ("n_energies", "bad_fraction"))),
    "arith-count": Command(run_arith_count, {"omega": "golden", "N": 5, "band": "full_square", "width": 1e-3,
                                             "shift": 0.0, "curvature": 1.0, "interval": [0.0, 1.0],
                                             "delta_dio": 0.01},
                           lambda p: 1, ("count",)),
    "spectrum": Command(run_spectrum, _system(window=[]), lambda p: 1, ("n", "min", "max")),
    "decay": Command(run_decay, _system(N=20, n_states=20, mu=0.5), lambda p: p["n_states"],
                     ("n_states", "n_fit", "median_rate")),
    "poisson": Command(run_poisson, _system(N=8, n_pairs=20), lambda p: p["n_pairs"] + 1,
                       ("n_pairs", "n_skipped", "max_residual")),
    "double-resonance": Command(run_double_resonance,
                                _system(lam=50.0, theta=[0.0, 0.0], N=6, M=2, K_lo=20.0, K_hi=22.0,
                                        gamma=1.0, b=0.9, relax=100.0),
                                lambda p: 2 * len(annulus_points(p["K_lo"], p["K_hi"])),
                                ("n_scanned", "n_bad", "bad_fraction", "n_energies")),
    "annulus": Command(run_annulus, _system(lam=50.0, N=6, E=10.3, r0=2.0, gamma=1.0, b=0.9, relax=100.0),
                       _annulus_cost, ("R", "n_boxes")),
    "multiscale": Command(run_multiscale, _system(lam=50.0, E=0.0, ladder=[8, 16, 32], gamma=1.0, b=0.9,
                                                  n_boxes=8, theta=[0.0, 0.0], spread=1000),
                          lambda p: len(p["ladder"]) * p["n_boxes"], ("bad_fraction", "gamma_fit")),
}
OPTIONAL = {"region"}
TOP_KEYS = {"command", "seed", "output_dir", "parameters", "grid"}


# ----------------------------------------------------------------- config


def load_config(path) -> dict:
    """TOML, or JSON when the file ends in ``.json``."""
    path = Path(path)
    raw = path.read_bytes()
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(raw)
        else:
            data = tomllib.loads(raw.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a table")
    return data


def _check_type(key, value, default):
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, (int, float)):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        if ok and isinstance(default, int) and not float(value).is_integer():
            ok = False
    elif isinstance(default, list):
        ok = isinstance(value, list)
    elif key == "potential":
        ok = isinstance(value, (str, dict))
    else:
        ok = isinstance(value, type(default))
    if not ok:
        raise ConfigError(f"parameter {key!r} has the wrong type: {value!r}")


def normalize(config: dict, command: str | None = None, seed: int | None = None) -> dict:
    """Validate against the schema and fill in defaults; unknown keys are errors."""
    extra = set(config) - TOP_KEYS
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    cmd = config.get("command", command)
    if command is not None and cmd != command:
        raise ConfigError(f"config is for {cmd!r}, not {command!r}")
    if cmd not in COMMANDS:
        raise ConfigError(f"unknown command {cmd!r}; known: {sorted(COMMANDS)}")
    spec = COMMANDS[cmd]
    params = copy.deepcopy(spec.defaults)
    given = config.get("parameters", {})
    if not isinstance(given, dict):
        raise ConfigError("parameters must be a table")
    for k, v in given.items():
        if k in OPTIONAL:
            params[k] = v
            continue
        if k not in spec.defaults:
            raise ConfigError(f"unknown parameter {k!r} for {cmd}; known: {sorted(spec.defaults)}")
        _check_type(k, v, spec.defaults[k])
        params[k] = v
    s = config.get("seed", 0) if seed is None else seed
    if isinstance(s, bool) or not isinstance(s, int):
        raise ConfigError("seed must be an integer")
    grid = config.get("grid", {})
    if not isinstance(grid, dict):
        raise ConfigError("grid must be a table of lists")
    for k, vals in grid.items():
        if k not in spec.defaults:
            raise ConfigError(f"unknown grid parameter {k!r} for {cmd}")
        if not isinstance(vals, list):
            raise ConfigError(f"grid values for {k!r} must be a list")
        for v in vals:
            _check_type(k, v, spec.defaults[k])
    return {"command": cmd, "seed": int(s), "parameters": params, "grid": grid}


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(_dumps(cfg).encode()).hexdigest()


# ----------------------------------------------------------------- output


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)  # "inf", "-inf", "nan"
    return x


def _dumps(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(x) for x in r])
    return buf.getvalue()


def _sha(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def write_outputs(out_dir: Path, cfg: dict, out: Output) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {}
    for name, (header, rows) in out.tables.items():
        files[f"{name}.csv"] = csv_text(header, rows)
    files["result.json"] = _dumps(out.result)
    digests = {k: _sha(v) for k, v in sorted(files.items())}
    for name, text in out.svgs.items():
        files[f"{name}.svg"] = text
    manifest = {"command": cfg["command"], "config": cfg, "config_sha256": config_hash(cfg),
                "version": __version__, "outputs": digests, "svg": sorted(f"{n}.svg" for n in out.svgs)}
    files["manifest.json"] = _dumps(manifest)
    for name, text in files.items():
        with open(out_dir / name, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    return manifest


def run(cfg: dict, threads: int = 1) -> Output:
    spec = COMMANDS[cfg["command"]]
    if cfg["command"] == "arith-count":
        return spec.run(cfg["parameters"], cfg["seed"], threads)
    return spec.run(cfg["parameters"], cfg["seed"])


# ------------------------------------------------------------------ sweep


def _grid_points(grid: dict):
    keys = list(grid)
    return keys, [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def _sweep_point(args):
    cfg, point = args
    c = copy.deepcopy(cfg)
    c["parameters"].update(point)
    return run(c).summary


def sweep(cfg: dict, threads: int = 1) -> Output:
    """Cartesian product over ``cfg["grid"]``; one summary row per point, in grid order.

    Every point uses the same seed.  Refuses when the projected solve count
    exceeds the budget.
    """
    spec = COMMANDS[cfg["command"]]
    keys, points = _grid_points(cfg["grid"])
    projected = 0
    for pt in points:
        params = dict(cfg["parameters"])
        params.update(pt)
        projected += int(spec.cost(params))
    if projected > MAX_SOLVES:
        raise ConfigError(f"sweep refused: projected {projected} solves exceeds the budget of {MAX_SOLVES}")
    skeys = []
    for pt in points or [{}]:
        for k in spec.summary_keys(dict(cfg["parameters"], **pt)):
            if k not in skeys:
                skeys.append(k)
    header = keys + skeys
    if threads > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            summaries = list(pool.map(_sweep_point, [(cfg, pt) for pt in points]))
    else:
        summaries = [_sweep_point((cfg, pt)) for pt in points]
    rows = []
    for pt, s in zip(points, summaries):
        rows.append([json.dumps(pt[k]) if isinstance(pt[k], (list, dict)) else pt[k] for k in keys]
                    + [s.get(k) for k in skeys])
    res = {"n_points": len(points), "projected_solves": projected}
    return Output({"sweep": (header, rows)}, res, summary=res)


# -------------------------------------------------------------------- main


def _threads(arg):
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("QP2LOC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"QP2LOC_THREADS must be an integer, not {env!r}") from None
    return 1


def _error(exc, code):
    body = {"error": type(exc).__name__, "message": str(exc)}
    if getattr(exc, "reason", None):
        body["reason"] = exc.reason
    sys.stderr.write(json.dumps(body, sort_keys=True) + "\n")
    return code


def build_parser():
    ap = argparse.ArgumentParser(prog="qp2loc", description="Localization experiments on Z^2.")
    ap.add_argument("command", choices=sorted(COMMANDS) + ["sweep"])
    ap.add_argument("--config", help="TOML or JSON experiment config")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--out", default=None, help="output directory (default: output_dir or ./qp2loc-out)")
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logging.captureWarnings(True)
    try:
        raw = load_config(args.config) if args.config else {}
        if args.command == "sweep":
            if "command" not in raw:
                raise ConfigError("a sweep config needs a 'command' key")
            cfg = normalize(raw, None, args.seed)
        else:
            if raw.get("grid"):
                raise ConfigError("grid is only allowed with the sweep command")
            cfg = normalize(raw, args.command, args.seed)
        if args.command == "sweep":
            cfg = dict(cfg, mode="sweep")
        out_dir = Path(args.out or raw.get("output_dir") or "qp2loc-out")
        threads = _threads(args.threads)
        t0 = time.perf_counter()
        out = sweep(cfg, threads) if args.command == "sweep" else run(cfg, threads)
        write_outputs(out_dir, cfg, out)
        log.info("%s finished in %.3f s -> %s", args.command, time.perf_counter() - t0, out_dir)
        sys.stdout.write(_dumps(out.result))
        return 0
    except (ConfigError, OSError) as exc:
        return _error(exc, 2)
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        return _error(exc, 1)


if __name__ == "__main__":
    sys.exit(main())
