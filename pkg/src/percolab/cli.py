"""Command-line front end.

Every subcommand builds a :class:`RunConfig` from (in increasing priority)
built-in defaults, an optional YAML config file and explicit flags, checks
it, runs, and writes a document of one or more tables.  The resolved config
travels with the output: as a JSON object, or as ``#`` comment lines ahead
of the CSV tables.

Exit status is 0 on success, 2 for invalid input and 1 for failures during
the run; in both error cases a JSON object ``{"error": {...}}`` goes to
stderr.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional

import yaml

from . import conformal, estimate, fit
from .cluster import ContractError
from .lattice import SQUARE, STRIATED_P2, TRIANGULAR, EmptyDomainError, Striated
from .rng import KINDS

FORMATS = ("csv", "json", "pretty")

# subcommand -> parameter defaults (None means "not set")
DEFAULTS: Dict[str, Dict[str, Any]] = {
    "cardy": {"r": None, "z": None},
    "rect-table": {"scale": 0.2, "lattice": SQUARE, "rows": None, "p": None},
    "parallelogram": {"alpha": 0.25, "r": [1.0], "sites": 4e4, "rotation": ["0"], "definition": 1,
                      "p": None},
    "striated": {"scale": 0.05, "dataset": None, "weighting": "uniform", "p2": STRIATED_P2,
                 "band_ratio": 5.0, "rows": None},
    "annulus": {"r1": 100.0, "r2": 1000.0, "p": None},
    "annulus-exponent": {"r1": 64.0, "ratios": [2.0, 4.0, 8.0, 16.0], "p": None},
    "cylinder": {"width": 202, "circumference": 240, "order": ["alpha", "gamma", "beta", "delta"],
                 "p": None},
    "exterior": {"r1": 50.0, "r2": 300.0, "p": None},
    "branched": {"alpha": 0.5, "r": 1.0, "sites": 1e5, "definition": 2, "p": None},
    "torus": {"L": 128, "Ly": None, "p": None},
}
COMMON = {"n": 10_000, "seed": 0, "rng": "default", "workers": 1, "format": "csv", "out": None}


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    subcommand: str
    params: Dict[str, Any] = field(default_factory=dict)
    n: int = COMMON["n"]
    seed: int = COMMON["seed"]
    rng: str = COMMON["rng"]
    workers: int = COMMON["workers"]
    format: str = COMMON["format"]
    out: Optional[str] = None

    def validate(self):
        if self.subcommand not in DEFAULTS:
            raise UsageError(f"unknown subcommand {self.subcommand!r}")
        if not isinstance(self.n, int) or self.n < 1:
            raise UsageError("n must be a positive integer")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise UsageError("seed must be a non-negative integer")
        if self.rng not in KINDS:
            raise UsageError(f"rng must be one of {KINDS}")
        if not isinstance(self.workers, int) or self.workers < 1:
            raise UsageError("workers must be a positive integer")
        if self.format not in FORMATS:
            raise UsageError(f"format must be one of {FORMATS}")
        _CHECKS[self.subcommand](self.params)
        return self

    def to_dict(self) -> dict:
        # output destination is not part of the experiment
        return {"subcommand": self.subcommand, "params": dict(self.params), "n": self.n,
                "seed": self.seed, "rng": self.rng, "workers": self.workers}


# ---------------------------------------------------------------------------
# validation


def _positive(params, *keys):
    for k in keys:
        v = params.get(k)
        if v is not None and not (isinstance(v, (int, float)) and v > 0 and math.isfinite(v)):
            raise UsageError(f"{k} must be a positive number, got {v!r}")


def _prob(params, *keys):
    for k in keys:
        v = params.get(k)
        if v is not None and not (isinstance(v, (int, float)) and 0.0 <= v <= 1.0):
            raise UsageError(f"{k} must lie in [0, 1], got {v!r}")


def _angle(params):
    a = params["alpha"]
    if not (isinstance(a, (int, float)) and 0.0 < a < 1.0):
        raise UsageError("alpha must lie strictly between 0 and 1")


def _definition(params):
    if params.get("definition") not in (1, 2):
        raise UsageError("definition must be 1 or 2")


def _check_cardy(p):
    if (p["r"] is None) == (p["z"] is None):
        raise UsageError("give exactly one of --r and --z")
    _positive(p, "r")
    _prob(p, "z")


def _check_rect(p):
    _positive(p, "scale")
    _prob(p, "p")
    if p["lattice"] not in (SQUARE, TRIANGULAR):
        raise UsageError("lattice must be square or triangular")
    if p["rows"] is not None:
        bad = [i for i in p["rows"] if not (isinstance(i, int) and 0 <= i < len(estimate.RECTANGLE_ROWS))]
        if bad:
            raise UsageError(f"row indices out of range: {bad}")


def _check_par(p):
    _angle(p)
    _definition(p)
    _positive(p, "sites")
    _prob(p, "p")
    if not p["r"]:
        raise UsageError("need at least one ratio")
    for r in p["r"]:
        _positive({"r": r}, "r")
    for rot in p["rotation"]:
        _pi_fraction(rot)


def _check_striated(p):
    _positive(p, "scale", "band_ratio")
    _prob(p, "p2")
    if p["weighting"] not in ("uniform", "ci"):
        raise UsageError("weighting must be uniform or ci")


def _check_annulus(p):
    _positive(p, "r1", "r2")
    _prob(p, "p")
    if p["r2"] <= p["r1"] + 1:
        raise UsageError("need r2 > r1 + 1")


def _check_exponent(p):
    _positive(p, "r1")
    _prob(p, "p")
    if len(p["ratios"]) < 2 or any(not (isinstance(q, (int, float)) and q > 1) for q in p["ratios"]):
        raise UsageError("need at least two ratios, each above 1")


def _check_cyl(p):
    for k in ("width", "circumference"):
        if not (isinstance(p[k], int) and p[k] >= 4):
            raise UsageError(f"{k} must be an integer >= 4")
    if sorted(p["order"]) != ["alpha", "beta", "delta", "gamma"]:
        raise UsageError("order must list alpha, beta, gamma, delta once each")
    _prob(p, "p")


def _check_branched(p):
    _angle(p)
    _definition(p)
    _positive(p, "r", "sites")
    _prob(p, "p")


def _check_torus(p):
    for k in ("L", "Ly"):
        v = p[k]
        if v is not None and not (isinstance(v, int) and v >= 2):
            raise UsageError(f"{k} must be an integer >= 2")
    _prob(p, "p")


_CHECKS = {"cardy": _check_cardy, "rect-table": _check_rect, "parallelogram": _check_par,
           "striated": _check_striated, "annulus": _check_annulus, "annulus-exponent": _check_exponent,
           "cylinder": _check_cyl, "exterior": _check_annulus, "branched": _check_branched,
           "torus": _check_torus}


def _pi_fraction(text) -> float:
    """Angle given as a multiple of pi: ``0``, ``1/12``, ``0.25``."""
    try:
        return float(Fraction(str(text))) * math.pi
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"bad rotation {text!r}; give a multiple of pi such as 1/12") from exc


# ---------------------------------------------------------------------------
# documents


def _table(columns, rows):
    return {"columns": list(columns), "rows": [list(r) for r in rows]}


def _est_row(res: estimate.EstimateResult):
    return [res.name, res.successes, res.trials, res.p_hat, res.ci95]


EST_COLUMNS = ("event", "successes", "trials", "p_hat", "ci95")


def _events_table(results):
    return _table(EST_COLUMNS, [_est_row(r) for r in results.values()])


def run(cfg: RunConfig) -> dict:
    """Execute a validated config and return the output document."""
    tables = _COMMANDS[cfg.subcommand](cfg)
    return {"config": cfg.to_dict(), "tables": tables}


def cmd_cardy(cfg):
    p = cfg.params
    v = conformal.cardy_rect(p["r"]) if p["r"] is not None else conformal.cardy(p["z"])
    return {"cardy": _table(("value",), [[v]])}


def cmd_rect_table(cfg):
    p = cfg.params
    dims = estimate.scaled_rows(p["scale"])
    idx = range(len(dims)) if p["rows"] is None else p["rows"]
    rows = []
    for i in idx:
        w, h = dims[i]
        res = estimate.rectangle_experiment(w, h, cfg.n, p["p"], p["lattice"], cfg.seed, cfg.rng, cfg.workers)
        r = w / h
        rows.append([w, h, r, conformal.cardy_rect(r), res["h"].p_hat, res["v"].p_hat,
                     res["hv"].p_hat, res["h"].ci95])
    return {"rectangles": _table(("width", "height", "r", "pi_h_cft", "pi_h", "pi_v", "pi_hv", "ci95"), rows)}


def cmd_parallelogram(cfg):
    p = cfg.params
    rows = []
    for r in p["r"]:
        h_cft = conformal.cardy_rect(conformal.parallelogram_to_rect(p["alpha"], r))
        d_cft = conformal.cardy_diagonal(p["alpha"], r, p["definition"])
        for rot in p["rotation"]:
            res = estimate.parallelogram_experiment(p["alpha"], r, p["sites"], cfg.n, _pi_fraction(rot),
                                                    p["definition"], p["p"], cfg.seed, cfg.rng, cfg.workers)
            rows.append([p["alpha"], r, str(rot), h_cft, res["h"].p_hat, res["v"].p_hat, res["hv"].p_hat,
                         d_cft, res["d"].p_hat, res["dbar"].p_hat, res["h"].ci95])
    cols = ("alpha", "r", "rotation_over_pi", "pi_h_cft", "pi_h", "pi_v", "pi_hv", "pi_d_cft", "pi_d",
            "pi_dbar", "ci95")
    return {"parallelograms": _table(cols, rows)}


def cmd_striated(cfg):
    p = cfg.params
    tables = {}
    if p["dataset"] is not None:
        with open(p["dataset"]) as fh:
            data = fit.StriatedDataset.from_csv(fh.read())
    else:
        field_ = Striated(p2=p["p2"], ratio=p["band_ratio"])
        dims = estimate.striated_rows(p["scale"])
        if p["rows"] is not None:
            dims = [dims[i] for i in p["rows"]]
        rows = []
        for w, h in dims:
            res = estimate.rectangle_experiment(w, h, cfg.n, field_, SQUARE, cfg.seed, cfg.rng, cfg.workers)
            rows.append([w, h, w / h, res["h"].p_hat, res["v"].p_hat, res["h"].ci95, res["v"].ci95])
        tables["striated"] = _table(("width", "height", "r", "pi_h", "pi_v", "ci95_h", "ci95_v"), rows)
        data = fit.StriatedDataset.from_arrays([x[2] for x in rows], [x[3] for x in rows],
                                               [x[4] for x in rows], [x[5] for x in rows],
                                               [x[6] for x in rows])
    res = fit.fit_shear(data, p["weighting"])
    tables["fit"] = _table(("a", "theta", "theta_over_pi", "residual", "theta_alt", "residual_alt"),
                           [[res.a, res.theta, res.theta / math.pi, res.residual, res.theta_alt,
                             res.residual_alt]])
    return tables


def cmd_annulus(cfg):
    p = cfg.params
    res = estimate.annulus_experiment(p["r1"], p["r2"], cfg.n, p["p"], cfg.seed, cfg.rng, cfg.workers)
    return {"annulus": _events_table(res)}


def cmd_annulus_exponent(cfg):
    p = cfg.params
    pts = estimate.annulus_exponent_points(p["r1"], p["ratios"], cfg.n, p["p"], cfg.seed, cfg.rng,
                                           cfg.workers)
    rows = [[q, r.successes, r.trials, r.p_hat, r.ci95] for q, r in pts]
    expo = fit.fit_annulus_exponent([(q, r.p_hat) for q, r in pts])
    return {"radial": _table(("ratio", "successes", "trials", "p_hat", "ci95"), rows),
            "exponent": _table(("exponent", "predicted"), [[expo, conformal.annulus_exponent_prediction()]])}


def cmd_cylinder(cfg):
    p = cfg.params
    res = estimate.cylinder_experiment(p["width"], p["circumference"], cfg.n, p["order"], p["p"], cfg.seed,
                                       cfg.rng, cfg.workers)
    return {"cylinder": _events_table(res)}


def cmd_exterior(cfg):
    p = cfg.params
    res = estimate.exterior_glued_experiment(p["r1"], p["r2"], cfg.n, p["p"], cfg.seed, cfg.rng, cfg.workers)
    return {"exterior": _events_table(res)}


def cmd_branched(cfg):
    p = cfg.params
    res = estimate.branched_experiment(p["alpha"], p["r"], cfg.n, p["sites"], p["definition"], p["p"],
                                       cfg.seed, cfg.rng, cfg.workers)
    return {"branched": _events_table(res)}


def cmd_torus(cfg):
    p = cfg.params
    tally = estimate.torus_homology_experiment(p["L"], cfg.n, p["p"], cfg.seed, cfg.rng, cfg.workers, p["Ly"])
    return {"torus": _events_table(tally.results())}


_COMMANDS = {"cardy": cmd_cardy, "rect-table": cmd_rect_table, "parallelogram": cmd_parallelogram,
             "striated": cmd_striated, "annulus": cmd_annulus, "annulus-exponent": cmd_annulus_exponent,
             "cylinder": cmd_cylinder, "exterior": cmd_exterior, "branched": cmd_branched,
             "torus": cmd_torus}

# ---------------------------------------------------------------------------
# rendering

_INT_COLS = {"width", "height", "successes", "trials", "circumference"}
_TEXT_COLS = {"event", "rotation_over_pi"}


def _fmt(col, v, subcommand):
    if v is None:
        return ""
    if col in _INT_COLS or col in _TEXT_COLS:
        return str(v)
    if subcommand == "cardy":
        return "0" if v == 0 else f"{v:#.10g}"
    if col in ("a", "theta", "theta_over_pi", "theta_alt", "exponent", "predicted"):
        return f"{v:.6f}"
    if col.startswith("residual"):
        return f"{v:.6e}"
    return f"{v:.4f}"


def render(doc: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(doc, indent=2) + "\n"
    sub = doc["config"]["subcommand"]
    buf = io.StringIO()
    if fmt == "csv":
        buf.write("# config: " + json.dumps(doc["config"], sort_keys=True) + "\n")
        for name, t in doc["tables"].items():
            buf.write(f"# table: {name}\n")
            buf.write(",".join(t["columns"]) + "\n")
            for row in t["rows"]:
                buf.write(",".join(_fmt(c, v, sub) for c, v in zip(t["columns"], row)) + "\n")
        return buf.getvalue()
    if sub == "cardy":
        return _fmt("value", doc["tables"]["cardy"]["rows"][0][0], sub) + "\n"
    cfg = doc["config"]
    buf.write(f"{sub}: n={cfg['n']} seed={cfg['seed']} rng={cfg['rng']} "
              + " ".join(f"{k}={v}" for k, v in cfg["params"].items() if v is not None) + "\n")
    for name, t in doc["tables"].items():
        cells = [[_fmt(c, v, sub) for c, v in zip(t["columns"], row)] for row in t["rows"]]
        widths = [max([len(c)] + [len(r[i]) for r in cells]) for i, c in enumerate(t["columns"])]
        buf.write(f"\n[{name}]\n")
        buf.write("  ".join(c.rjust(w) for c, w in zip(t["columns"], widths)) + "\n")
        for r in cells:
            buf.write("  ".join(x.rjust(w) for x, w in zip(r, widths)) + "\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# argument handling


def _int_list(s):
    return [int(x) for x in s.split(",") if x.strip()]


def _float_list(s):
    return [float(x) for x in s.split(",") if x.strip()]


def _str_list(s):
    return [x.strip() for x in s.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = _Parser(add_help=False, argument_default=S)
    common.add_argument("--n", type=int, help="number of replicas")
    common.add_argument("--seed", type=int)
    common.add_argument("--rng", choices=KINDS)
    common.add_argument("--workers", type=int)
    common.add_argument("--format", choices=FORMATS)
    common.add_argument("--out", help="write here instead of stdout")
    common.add_argument("--config", help="YAML file of defaults; flags take precedence")

    ap = _Parser(prog="percolab", description="Crossing probabilities in critical percolation.")
    sub = ap.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_, argument_default=S)

    c = add("cardy", "exact horizontal crossing probability")
    c.add_argument("--r", type=float, help="rectangle aspect ratio width/height")
    c.add_argument("--z", type=float, help="cross-ratio")

    c = add("rect-table", "rectangles of the reference table on the square lattice")
    c.add_argument("--scale", type=float)
    c.add_argument("--lattice", choices=(SQUARE, TRIANGULAR))
    c.add_argument("--rows", type=_int_list, help="comma-separated row indices (0-based)")
    c.add_argument("--p", type=float)

    c = add("parallelogram", "parallelograms at several ratios and rotations")
    c.add_argument("--alpha", type=float, help="corner angle in units of pi")
    c.add_argument("--r", type=_float_list, help="comma-separated side ratios")
    c.add_argument("--sites", type=float)
    c.add_argument("--rotation", type=_str_list, help="comma-separated multiples of pi, e.g. 0,1/12")
    c.add_argument("--definition", type=int, choices=(1, 2))
    c.add_argument("--p", type=float)

    c = add("striated", "striated-model rectangles and the fitted shear")
    c.add_argument("--scale", type=float)
    c.add_argument("--dataset", help="fit this CSV instead of simulating")
    c.add_argument("--weighting", choices=("uniform", "ci"))
    c.add_argument("--p2", type=float)
    c.add_argument("--band-ratio", dest="band_ratio", type=float)
    c.add_argument("--rows", type=_int_list)

    c = add("annulus", "crossings of an annulus at the inner and outer circles")
    c.add_argument("r1", type=float, nargs="?")
    c.add_argument("r2", type=float, nargs="?")
    c.add_argument("--p", type=float)

    c = add("annulus-exponent", "radial crossings of nested annuli and the fitted exponent")
    c.add_argument("--r1", type=float)
    c.add_argument("--ratios", type=_float_list)
    c.add_argument("--p", type=float)

    c = add("cylinder", "crossings between intervals of one side of a cylinder")
    c.add_argument("width", type=int, nargs="?")
    c.add_argument("circumference", type=int, nargs="?")
    c.add_argument("--order", type=_str_list)
    c.add_argument("--p", type=float)

    c = add("exterior", "annulus glued to a disk along its outer ring")
    c.add_argument("r1", type=float, nargs="?")
    c.add_argument("r2", type=float, nargs="?")
    c.add_argument("--p", type=float)

    c = add("branched", "parallelogram on the branched double cover")
    c.add_argument("--alpha", type=float)
    c.add_argument("--r", type=float)
    c.add_argument("--sites", type=float)
    c.add_argument("--definition", type=int, choices=(1, 2))
    c.add_argument("--p", type=float)

    c = add("torus", "winding subgroups on an L x L torus")
    c.add_argument("L", type=int, nargs="?")
    c.add_argument("--Ly", type=int)
    c.add_argument("--p", type=float)
    return ap


def _load_config(path, subcommand):
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise UsageError("config file must hold a mapping")
    flat = {k: v for k, v in data.items() if not isinstance(v, dict)}
    section = data.get(subcommand, {})
    if not isinstance(section, dict):
        raise UsageError(f"config section {subcommand!r} must be a mapping")
    flat.update(section)
    allowed = set(COMMON) | set(DEFAULTS[subcommand])
    unknown = sorted(set(flat) - allowed)
    if unknown:
        raise UsageError(f"unknown config keys for {subcommand}: {unknown}")
    return flat


def resolve(argv: Optional[List[str]] = None) -> RunConfig:
    """Parse ``argv`` into a validated RunConfig."""
    ns = vars(build_parser().parse_args(argv))
    sub = ns.pop("subcommand")
    merged: Dict[str, Any] = dict(COMMON)
    merged.update(DEFAULTS[sub])
    path = ns.pop("config", None)
    if path is not None:
        merged.update(_load_config(path, sub))
    merged.update({k: v for k, v in ns.items() if v is not None})
    params = {k: merged[k] for k in DEFAULTS[sub]}
    for k in ("r", "rotation", "ratios", "order"):
        if k in params and isinstance(params[k], (int, float, str)) and sub not in ("cardy", "branched"):
            params[k] = [params[k]]
    for k in ("sites",):
        if k in params and params[k] is not None:
            params[k] = float(params[k])
    cfg = RunConfig(sub, params, merged["n"], merged["seed"], merged["rng"], merged["workers"],
                    merged["format"], merged["out"])
    return cfg.validate()


def _fail(kind, exc, code):
    err = {"error": {"type": kind, "exception": type(exc).__name__, "message": str(exc)}}
    sys.stderr.write(json.dumps(err) + "\n")
    return code


def main(argv: Optional[List[str]] = None) -> int:
    try:
        cfg = resolve(argv)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (UsageError, ValueError, TypeError, OSError, yaml.YAMLError) as exc:
        return _fail("usage", exc, 2)
    try:
        text = render(run(cfg), cfg.format)
        if cfg.out:
            with open(cfg.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except (UsageError, EmptyDomainError, ContractError) as exc:
        return _fail("usage", exc, 2)
    except Exception as exc:  # noqa: BLE001 - reported as a structured error
        return _fail("runtime", exc, 1)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
