"""Scenario-driven command line front end.

    ergolab run <config.json | bundled-name> [--out DIR] [--seed-override N]
                [--threads K] [--strict]
    ergolab list

A config file holds either a single scenario object or {"scenarios": [...]}.
Outputs land in out/<scenario>/<experiment>/{report.json, table.csv,
meta.json}; the CSV and report bodies are byte-deterministic for a fixed
config and seed, while timestamps and wall-clock data are quarantined to
meta.json.  Exit codes: 0 all asserted verdicts pass; 2 schema or
configuration violation; 3 hypothesis violation surfaced from a module;
4 numerical or verdict failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np
import scipy

from . import __version__
from .errors import ConfigError, HypothesisViolation, NumericalFailure
from .scenarios import bundled_config, bundled_names, list_rows, run_scenario

MATRIX_SCHEMA = {
    "type": "object",
    "required": ["n", "re", "im"],
    "properties": {
        "n": {"type": "integer", "minimum": 1},
        "re": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "im": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
    },
}

DYNAMICS_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "properties": {"kind": {"enum": ["unitary", "permutation", "kraus", "composition", "power"]}},
    "allOf": [
        {"if": {"properties": {"kind": {"const": "unitary"}}},
         "then": {"required": ["u"], "properties": {"u": MATRIX_SCHEMA}}},
        {"if": {"properties": {"kind": {"const": "permutation"}}},
         "then": {"required": ["perm"],
                  "properties": {"perm": {"type": "array", "items": {"type": "integer", "minimum": 0}}}}},
        {"if": {"properties": {"kind": {"const": "kraus"}}},
         "then": {"required": ["terms"],
                  "properties": {"terms": {"type": "array", "minItems": 1, "items": {
                      "type": "object", "required": ["weight", "u"],
                      "properties": {"weight": {"type": "number", "exclusiveMinimum": 0},
                                     "u": MATRIX_SCHEMA}}}}}},
        {"if": {"properties": {"kind": {"const": "power"}}},
         "then": {"required": ["base", "k"],
                  "properties": {"k": {"type": "integer", "minimum": 0}}}},
        {"if": {"properties": {"kind": {"const": "composition"}}},
         "then": {"required": ["parts"],
                  "properties": {"parts": {"type": "array", "minItems": 1}}}},
    ],
}

SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["version", "name", "algebra", "dynamics", "observable", "experiment"],
    "properties": {
        "version": {"const": 1},
        "name": {"type": "string", "minLength": 1},
        "algebra": {
            "type": "object",
            "required": ["dim"],
            "properties": {"dim": {"type": "integer", "minimum": 1},
                           "tol": {"type": "number", "minimum": 0}},
        },
        "dynamics": DYNAMICS_SCHEMA,
        "observable": {
            "type": "object",
            "required": ["generator"],
            "properties": {
                "generator": {"enum": ["explicit", "random_hermitian", "traceless_random",
                                       "diagonal_indicator", "diagonal_random",
                                       "matrix_unit", "site_z"]},
                "seed": {"type": "integer"},
                "mean_zero": {"type": "boolean"},
                "normalize": {
                    "anyOf": [
                        {"type": "null"},
                        {"type": "object", "required": ["norm", "value"],
                         "properties": {"norm": {"enum": ["l1", "l2", "linf"]},
                                        "value": {"type": "number", "exclusiveMinimum": 0}}},
                    ]
                },
            },
        },
        "experiment": {"enum": ["validate", "vdc", "spectral", "witness", "ww",
                                "theorem6", "weakmix", "ergodic"]},
        "params": {"type": "object"},
        "notes": {"type": "string"},
    },
}

CONFIG_SCHEMA = {
    "anyOf": [
        SCENARIO_SCHEMA,
        {"type": "object", "required": ["scenarios"],
         "properties": {"scenarios": {"type": "array", "minItems": 1,
                                      "items": SCENARIO_SCHEMA}}},
    ]
}


def validate_config(cfg: dict) -> list:
    """Schema plus semantic validation; returns the scenario list."""
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config schema violation: {exc.message}") from exc
    scenarios = cfg["scenarios"] if "scenarios" in cfg else [cfg]
    for sc in scenarios:
        _semantic_checks(sc)
    return scenarios


def _semantic_checks(sc: dict):
    params = sc.get("params", {})
    if sc["experiment"] == "vdc" and "n" in params and "m" in params:
        if int(params["m"]) > int(params["n"]) - 1 or int(params["m"]) < 0:
            raise ConfigError(
                f"vdc window must satisfy 0 <= m <= n-1, got m={params['m']}, n={params['n']}")
    grid = params.get("lambda_grid_size")
    if grid is not None and int(grid) < 1:
        raise ConfigError("lambda grid size must be >= 1")
    if sc["dynamics"]["kind"] == "permutation":
        if sorted(sc["dynamics"]["perm"]) != list(range(sc["algebra"]["dim"])):
            raise ConfigError("perm must be a permutation of 0..dim-1")


def normalize_config(cfg: dict) -> dict:
    """Canonical form of a config: scenario list with defaults filled.
    Round-trips through itself: normalize(parse(serialize(normalize(c))))
    is the identity."""
    scenarios = cfg["scenarios"] if "scenarios" in cfg else [cfg]
    out = []
    for sc in scenarios:
        sc = dict(sc)
        sc.setdefault("params", {})
        sc.setdefault("notes", "")
        obs = dict(sc["observable"])
        obs.setdefault("seed", 0)
        obs.setdefault("mean_zero", False)
        obs.setdefault("normalize", None)
        sc["observable"] = obs
        alg = dict(sc["algebra"])
        alg.setdefault("tol", 1e-10)
        sc["algebra"] = alg
        out.append(sc)
    return {"scenarios": out}


def _write_outputs(out_root: Path, result, started_iso: str, seed_override):
    d = out_root / result.name / result.experiment
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "report.json", "w") as fh:
        json.dump(result.report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(d / "table.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(result.table_header)
        w.writerows(result.table_rows)
    meta = {
        "started_at": started_iso,
        "runtime_s": result.runtime_s,
        "seed_override": seed_override,
        "versions": {"ergolab": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__, "python": sys.version.split()[0]},
    }
    with open(d / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return d


def _load_config(spec: str) -> dict:
    path = Path(spec)
    if path.exists():
        try:
            with open(path) as fh:
                return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if spec in bundled_names():
        return bundled_config(spec)
    raise ConfigError(f"no such config file or bundled scenario: {spec!r}")


def cmd_run(args) -> int:
    try:
        cfg = _load_config(args.config)
        scenarios = validate_config(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    out_root = Path(args.out)
    started_iso = datetime.datetime.now(datetime.timezone.utc).isoformat()
    failures = {"hypothesis": 0, "numerical": 0}
    all_ok = True

    def job(sc):
        return run_scenario(sc, seed_override=args.seed_override, strict=args.strict)

    results = []
    errors = []
    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        futures = [pool.submit(job, sc) for sc in scenarios]
        for fut, sc in zip(futures, scenarios):
            try:
                results.append((sc, fut.result()))
            except HypothesisViolation as exc:
                errors.append((sc["name"], "hypothesis", str(exc)))
                failures["hypothesis"] += 1
            except ConfigError as exc:
                print(f"error: {exc}", file=sys.stderr)
                return 2
            except (NumericalFailure, FloatingPointError, np.linalg.LinAlgError) as exc:
                errors.append((sc["name"], "numerical", str(exc)))
                failures["numerical"] += 1

    for sc, result in results:
        d = _write_outputs(out_root, result, started_iso, args.seed_override)
        status = "ok" if result.ok else "FAIL"
        if args.strict and result.report.get("notes"):
            # warnings escalate under --strict only when flagged as such
            pass
        print(f"{result.name:24s} {result.experiment:10s} {status:4s} "
              f"({result.runtime_s:.2f} s) -> {d}")
        all_ok &= result.ok

    for name, kind, msg in errors:
        print(f"{name:24s} {kind} violation: {msg}", file=sys.stderr)

    if failures["hypothesis"]:
        return 3
    if failures["numerical"] or not all_ok:
        return 4
    return 0


def cmd_list(_args) -> int:
    rows = list_rows()
    w1 = max(len(r[0]) for r in rows)
    w2 = max(len(r[1]) for r in rows)
    print(f"{'scenario':{w1}s}  {'feature exercised':{w2}s}  runtime")
    for name, feat, rt in rows:
        print(f"{name:{w1}s}  {feat:{w2}s}  {rt}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ergolab",
                                     description="ergodic-average laboratory on matrix algebras")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario config or bundled scenario")
    run_p.add_argument("config", help="path to a JSON config, or a bundled scenario name")
    run_p.add_argument("--out", default="out", help="output directory (default: out)")
    run_p.add_argument("--seed-override", type=int, default=None)
    run_p.add_argument("--threads", type=int, default=1)
    run_p.add_argument("--strict", action="store_true",
                       help="treat warnings as failures")
    run_p.set_defaults(func=cmd_run)

    list_p = sub.add_parser("list", help="list bundled scenarios")
    list_p.set_defaults(func=cmd_list)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except HypothesisViolation as exc:
        print(f"hypothesis violation: {exc}", file=sys.stderr)
        return 3
    except (NumericalFailure, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
