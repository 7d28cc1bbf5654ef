"""Command-line front end: ``gpexp {capacity,exponent,sweep,simulate,verify}``.

Every run emits a CSV (``#`` header lines carry the config digest), a JSON
mirror when ``--out`` is given, and a run manifest. Passing a manifest back
through ``--config`` replays the run and reproduces the CSV byte for byte.

Exit codes: 0 success, 1 verification failure, 2 config error, 3 budget error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .ga import EmptyFeasibleSetError, GaConfig
from .method_of_types import TypeBudgetError
from .scenarios import PRESETS, InfeasibleError, _budget, build_preset, scenario_from_dict

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3

SUBCOMMANDS = ("capacity", "exponent", "sweep", "simulate", "verify")
DEFAULT_D1_GRID = tuple(round(0.05 * i, 2) for i in range(1, 11))
DEFAULTS = {
    "preset": "public",
    "p_e": 0.5,
    "D1": None,
    "D2": 0.2,
    "L": 2,
    "seed": 0,
    "model": "cdmc",
    "rate": 0.0,
    "rates": [0.0, 0.05, 0.1, 0.15, 0.2, 0.25],
    "n": [10, 14, 18],
    "trials": 1000,
    "epsilon": 0.05,
    "codebook_budget": 2**22,
    "suite": "all",
    "scenario": None,
    "solver": None,
}
# keys that each subcommand reads; anything else in a config file is rejected
KEYS = {
    "capacity": ("preset", "p_e", "D1", "D2", "L", "seed", "scenario", "solver"),
    "exponent": ("preset", "p_e", "D1", "D2", "L", "seed", "model", "rate", "scenario", "solver"),
    "sweep": ("preset", "p_e", "D1", "D2", "L", "seed", "model", "rates", "scenario", "solver"),
    "simulate": ("preset", "p_e", "D1", "D2", "L", "seed", "model", "rate", "n", "trials", "epsilon",
                 "codebook_budget", "scenario"),
    "verify": ("suite", "seed", "solver"),
}


class ConfigError(ValueError):
    pass


@dataclass
class RunManifest:
    subcommand: str
    config: dict
    seed: int
    version: str = __version__
    wall_time: float = 0.0
    outputs: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True)


# ------------------------------------------------------------ parsing


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--preset", choices=PRESETS)
    common.add_argument("--p-e", dest="p_e", type=float, help="Pr[Se = 1] for binary presets")
    common.add_argument("--D2", type=float)
    common.add_argument("--L", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--config", help="YAML/JSON config or run manifest")
    common.add_argument("--out", help="CSV path; the JSON mirror and manifest go next to it")

    p = argparse.ArgumentParser(prog="gpexp", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"gpexp {__version__}")
    sub = p.add_subparsers(dest="subcommand", required=True)

    c = sub.add_parser("capacity", parents=[common], help="C_L over a grid of D1 values")
    c.add_argument("--D1", type=float, nargs="+")

    for name, help_ in (("exponent", "exponent at one rate"), ("sweep", "exponent over a rate grid")):
        e = sub.add_parser(name, parents=[common], help=help_)
        e.add_argument("--D1", type=float)
        e.add_argument("--model", choices=("cdmc", "cam"))
        if name == "exponent":
            e.add_argument("--rate", type=float)
        else:
            e.add_argument("--rates", type=float, nargs="+")

    s = sub.add_parser("simulate", parents=[common], help="Monte-Carlo error probability of the binning code")
    s.add_argument("--D1", type=float)
    s.add_argument("--model", choices=("cdmc", "cam"), help="attack model")
    s.add_argument("--rate", type=float)
    s.add_argument("--n", type=int, nargs="+")
    s.add_argument("--trials", type=int)
    s.add_argument("--epsilon", type=float)

    v = sub.add_parser("verify", help="run property suites")
    v.add_argument("suite", nargs="?", choices=("all", "inequality", "types", "quantization", "lemmas", "ordering"))
    v.add_argument("--seed", type=int)
    v.add_argument("--config")
    v.add_argument("--out")
    return p


def _flag_positions(parser, argv):
    """Map each explicitly given dest to the position of its last occurrence."""
    opts = {}
    for action in parser._subparsers._group_actions[0].choices.values():
        for a in action._actions:
            for s in a.option_strings:
                opts[s] = a.dest
    pos = {}
    for i, tok in enumerate(argv):
        key = tok.split("=", 1)[0]
        if key in opts:
            pos[opts[key]] = i
    return pos


def _load_config(path):
    import yaml

    try:
        with open(path) as fh:
            cfg = yaml.safe_load(fh) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a mapping")
    if "subcommand" in cfg and "config" in cfg:
        cfg = dict(cfg["config"])
    return cfg


def resolve_config(args, argv, parser):
    """Merge defaults, config file and flags.

    Flags given after ``--config`` win over the file; the file wins over
    flags given before it.
    """
    sub = args.subcommand
    keys = KEYS[sub]
    cfg = {k: DEFAULTS[k] for k in keys}
    given = {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}
    if args.config:
        file_cfg = _load_config(args.config)
        unknown = set(file_cfg) - set(keys)
        if unknown:
            raise ConfigError(f"unknown config keys for {sub}: {sorted(unknown)}")
        pos = _flag_positions(parser, argv)
        cpos = pos.get("config", -1)
        cfg.update({k: v for k, v in given.items() if pos.get(k, -1) < cpos})
        cfg.update(file_cfg)
        cfg.update({k: v for k, v in given.items() if pos.get(k, -1) > cpos})
    else:
        cfg.update(given)
    return _normalise(sub, cfg)


def _normalise(sub, cfg):
    out = dict(cfg)
    if "D1" in out:
        if sub == "capacity":
            d1 = out["D1"] if out["D1"] is not None else list(DEFAULT_D1_GRID)
            out["D1"] = [_budget(v) for v in np.atleast_1d(d1).tolist()]
        else:
            d1 = 0.4 if out["D1"] is None else out["D1"]
            if isinstance(d1, (list, tuple)):
                if len(d1) != 1:
                    raise ConfigError(f"{sub} takes a single D1 value")
                d1 = d1[0]
            out["D1"] = _budget(d1)
    if "D2" in out:
        out["D2"] = _budget(out["D2"])
    for k in ("rates", "n"):
        if k in out:
            out[k] = list(np.atleast_1d(out[k]).tolist())
    if "n" in out:
        out["n"] = [int(v) for v in out["n"]]
    for k in ("rate", "p_e", "epsilon"):
        if k in out and out[k] is not None:
            out[k] = float(out[k])
    for k in ("L", "seed", "trials", "codebook_budget"):
        if k in out and out[k] is not None:
            out[k] = int(out[k])
    if out.get("model") is not None and out["model"] not in ("cdmc", "cam"):
        raise ConfigError(f"model must be cdmc or cam, got {out['model']!r}")
    return out


def _digest(cfg):
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


# ------------------------------------------------------------ builders


def _spec(cfg, D1=None):
    D1 = cfg["D1"] if D1 is None else D1
    if cfg.get("scenario"):
        sc = dict(cfg["scenario"])
        sc.setdefault("D1", D1)
        sc.setdefault("D2", cfg["D2"])
        sc.setdefault("L", cfg["L"])
        return scenario_from_dict(sc)
    return build_preset(cfg["preset"], cfg["p_e"], D1, cfg["D2"], cfg["L"])


def _solver(cfg):
    from .exponents import EXPONENT_GA, SolverConfig

    raw = dict(cfg.get("solver") or {})
    ga_raw = raw.pop("ga", {}) or {}
    try:
        ga = replace(EXPONENT_GA, **ga_raw) if ga_raw else EXPONENT_GA
        solver = SolverConfig(ga=ga, **raw)
    except TypeError as exc:
        raise ConfigError(f"bad solver settings: {exc}") from exc
    if not isinstance(solver.ga, GaConfig):
        raise ConfigError("solver.ga must be a mapping")
    return solver.with_seed(cfg["seed"])


def _csv_text(header, columns, rows):
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


# ------------------------------------------------------------ subcommands


def _closed_form(preset, D1, D2):
    from .binary import c_deg, c_priv, g_star

    try:
        if preset == "public":
            return g_star(D1, D2)
        if preset == "private":
            return c_priv(D1, D2)
        if preset == "degenerate":
            return c_deg(D1, D2)
    except ValueError:
        return ""
    return ""


def cmd_capacity(cfg):
    from .exponents import capacity_CL

    solver = _solver(cfg)
    rows = []
    for D1 in cfg["D1"]:
        spec = _spec(cfg, D1)
        res = capacity_CL(spec, solver)
        rows.append((spec.preset, D1, spec.D2, spec.L, res.value, _closed_form(spec.preset, D1, spec.D2)))
    return ("preset", "D1", "D2", "L", "C_L", "closed_form"), rows


def cmd_exponent(cfg):
    from .exponents import ExponentProblem, error_exponent

    spec = _spec(cfg)
    res = error_exponent(ExponentProblem(spec, cfg["model"], cfg["rate"], _solver(cfg)))
    return _exponent_rows(spec, [res], cfg["seed"])


def cmd_sweep(cfg):
    from .exponents import sweep_rates

    spec = _spec(cfg)
    rows, results, cap = sweep_rates(spec, cfg["model"], cfg["rates"], _solver(cfg))
    cols, out = _exponent_rows(spec, results, cfg["seed"])
    return cols + ("C_L",), [r + (cap.value,) for r in out]


def _exponent_rows(spec, results, seed):
    from .exponents import CSV_COLUMNS

    rows = [(float(r.rate), float(r.value), r.model, spec.preset, spec.L, seed) for r in results]
    return CSV_COLUMNS, rows


def cmd_simulate(cfg):
    from .binning import AttackModel, SimConfig, estimate_pe

    spec = _spec(cfg)
    attack = AttackModel.default(spec, cfg["model"])
    rows = []
    for n in cfg["n"]:
        sim = SimConfig(
            spec, n, cfg["rate"], epsilon=cfg["epsilon"], trials=cfg["trials"], seed=cfg["seed"],
            codebook_budget=cfg["codebook_budget"], attack=attack,
        )
        est = estimate_pe(sim)
        rows.append((n, cfg["rate"], est.trials, est.p_e_hat, est.stderr, est.encoding_error_rate, cfg["seed"]))
    return ("n", "R", "trials", "p_e_hat", "stderr", "enc_err_rate", "seed"), rows


def cmd_verify(cfg):
    from .verify import SUITES, run_suite

    names = SUITES if cfg["suite"] == "all" else (cfg["suite"],)
    solver = _solver(cfg) if cfg.get("solver") else None
    reports = [run_suite(name, seed=cfg["seed"], solver=solver) for name in names]
    rows = []
    for rep in reports:
        for label, ok, detail in rep.checks:
            rows.append((rep.name, label, "pass" if ok else "fail", detail))
    return ("suite", "check", "status", "detail"), rows, all(r.passed for r in reports)


COMMANDS = {
    "capacity": cmd_capacity,
    "exponent": cmd_exponent,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}


# ------------------------------------------------------------ entry point


def _paths(out):
    p = Path(out)
    stem = p.with_suffix("") if p.suffix == ".csv" else p
    return p, stem.with_name(stem.name + ".json"), stem.with_name(stem.name + ".manifest.json")


def run(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    from .binning import BudgetError

    t0 = time.perf_counter()
    try:
        cfg = resolve_config(args, argv, parser)
        out = COMMANDS[args.subcommand](cfg)
    except (ConfigError, InfeasibleError, ValueError) as exc:
        print(f"config error: {exc}", file=stderr)
        return EXIT_CONFIG
    except (BudgetError, TypeBudgetError, EmptyFeasibleSetError) as exc:
        print(f"budget error: {exc}", file=stderr)
        return EXIT_BUDGET
    ok = True
    if args.subcommand == "verify":
        columns, rows, ok = out
    else:
        columns, rows = out
    digest = _digest(cfg)
    header = [f"gpexp {__version__}", f"subcommand: {args.subcommand}", f"config-sha256: {digest}"]
    text = _csv_text(header, columns, rows)
    manifest = RunManifest(args.subcommand, cfg, cfg["seed"], wall_time=round(time.perf_counter() - t0, 3))
    if args.out:
        csv_path, json_path, man_path = _paths(args.out)
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        csv_path.write_text(text)
        records = [dict(zip(columns, row)) for row in rows]
        json_path.write_text(json.dumps({"config_sha256": digest, "rows": records}, indent=2, default=str))
        for p in (csv_path, json_path):
            manifest.outputs[str(p)] = hashlib.sha256(p.read_bytes()).hexdigest()
        man_path.write_text(manifest.to_json())
    else:
        stdout.write(text)
        print(manifest.to_json(), file=stderr)
    if args.subcommand == "verify":
        for row in rows:
            print(f"[{row[2].upper()}] {row[0]}: {row[1]}" + (f" ({row[3]})" if row[3] else ""), file=stderr)
    return EXIT_OK if ok else EXIT_VERIFY


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
