"""Command-line runner: ``codlab run|list|describe|render``.

Exit status: 0 when every claim passes, 2 when any claim fails, 1 on a
usage or configuration error.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys
import warnings
from datetime import datetime, timezone
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, cloud_io, experiments
from .errors import CodlabError, ConfigError, EmptySlice, UnknownExperiment
from .render import render_slice

TOP_KEYS = ("experiment", "params", "sweep", "estimator", "seed", "output", "threads")

_BOX = {"type": "array", "minItems": 2, "maxItems": 2,
        "items": {"anyOf": [{"type": "number"}, {"type": "array", "items": {"type": "number"}}]}}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "experiment": {"type": "string"},
        "params": {"type": "object"},
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "count": {"type": "integer", "minimum": 1},
                "base_sampler": {"enum": ["halton", "low-discrepancy", "random", "uniform-random", "grid"]},
                "fiber_sampler": {"enum": ["halton", "low-discrepancy", "random", "uniform-random", "grid"]},
                "base_counts": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "fiber_counts": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "base_box": _BOX,
                "fiber_box": _BOX,
                "chunk_size": {"type": "integer", "minimum": 1},
                "frame": {"enum": ["orthonormal", "raw"]},
            },
        },
        "estimator": {"type": "object"},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "threads": {"type": "integer", "minimum": 1},
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dir": {"type": "string"},
                "clouds": {"type": "array", "items": {"enum": ["csv", "binary"]}},
                "slice": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "cloud": {"type": "string"},
                        "axes": {"type": "array", "items": {"type": "integer", "minimum": 0},
                                 "minItems": 2, "maxItems": 2},
                        "offsets": {"type": "array", "items": {"type": "number"}},
                        "thickness": {"type": "number", "minimum": 0},
                        "size": {"type": "integer", "minimum": 16},
                    },
                },
            },
        },
    },
}


def default_config(exp_id: str) -> dict:
    exp = experiments.get(exp_id)
    return {"experiment": exp_id, "params": copy.deepcopy(exp.defaults), "sweep": {}, "estimator": {},
            "seed": 0, "threads": _env_threads(), "output": {"dir": f"runs/{exp_id}", "clouds": ["binary"]}}


def _env_threads() -> int:
    raw = os.environ.get("CODLAB_THREADS", "1")
    try:
        t = int(raw)
    except ValueError:
        raise ConfigError(f"CODLAB_THREADS must be an integer, got {raw!r}") from None
    if t < 1:
        raise ConfigError("CODLAB_THREADS must be >= 1")
    return t


def load_config_file(path) -> dict:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return data


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def parse_assignment(text: str) -> tuple[list[str], object]:
    """``a.b=value``; the value is parsed as JSON when possible, else kept as a string.

    Keys whose first segment is not a top-level config key address ``params``.
    """
    if "=" not in text:
        raise ConfigError(f"--set expects key=value, got {text!r}")
    key, raw = text.split("=", 1)
    path = [p for p in key.strip().split(".") if p]
    if not path:
        raise ConfigError(f"--set has an empty key in {text!r}")
    if path[0] not in TOP_KEYS:
        path = ["params"] + path
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return path, value


def apply_assignment(cfg: dict, path: list[str], value) -> None:
    node = cfg
    for p in path[:-1]:
        nxt = node.setdefault(p, {})
        if not isinstance(nxt, dict):
            raise ConfigError(f"--set {'.'.join(path)}: {p} is not an object")
        node = nxt
    node[path[-1]] = value


def _where(err: jsonschema.ValidationError) -> str:
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def validate_config(cfg: dict) -> dict:
    """Validate the full config, including the experiment's own parameter schema."""
    errors = sorted(jsonschema.Draft202012Validator(CONFIG_SCHEMA).iter_errors(cfg), key=lambda e: list(e.path))
    if errors:
        raise ConfigError("; ".join(f"{_where(e)}: {e.message}" for e in errors))
    if "experiment" not in cfg:
        raise ConfigError("<root>: 'experiment' is required")
    exp = experiments.get(cfg["experiment"])
    perrs = sorted(jsonschema.Draft202012Validator(exp.param_schema()).iter_errors(cfg.get("params", {})),
                   key=lambda e: list(e.path))
    if perrs:
        raise ConfigError("; ".join(f"params/{_where(e)}: {e.message}".replace("/<root>", "") for e in perrs))
    return cfg


def resolve_config(exp_id: str | None, config_path=None, sets=(), seed=None, out=None, threads=None) -> dict:
    user = load_config_file(config_path) if config_path else {}
    exp_id = exp_id or user.get("experiment")
    if not exp_id:
        raise ConfigError("no experiment id given")
    if user.get("experiment", exp_id) != exp_id:
        raise ConfigError(f"config file is for {user['experiment']!r}, not {exp_id!r}")
    cfg = _merge(default_config(exp_id), user)
    for s in sets:
        apply_assignment(cfg, *parse_assignment(s))
    if seed is not None:
        cfg["seed"] = seed
    if out is not None:
        cfg.setdefault("output", {})["dir"] = out
    if threads is not None:
        cfg["threads"] = threads
    return validate_config(cfg)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


def numeric_results(cfg: dict, outcome: experiments.Outcome) -> dict:
    """Everything in ``results.json`` except the timestamp."""
    return _jsonable({
        "experiment": cfg["experiment"],
        "config": {k: v for k, v in cfg.items() if k not in ("threads", "output")},
        "seed": cfg["seed"],
        "version": __version__,
        "numpy_version": np.__version__,
        "estimates": outcome.estimates,
        "claims": outcome.checks,
        "passed": outcome.passed,
        "clouds": {name: {"n": c.n, "count": len(c)} for name, c in outcome.clouds.items()},
    })


def run(cfg: dict) -> tuple[dict, Path]:
    outcome = experiments.run_experiment(cfg["experiment"], cfg.get("params"), cfg.get("sweep"),
                                         cfg.get("estimator"), cfg.get("seed", 0), cfg.get("threads", 1))
    out_cfg = cfg.get("output", {})
    outdir = Path(out_cfg.get("dir", f"runs/{cfg['experiment']}"))
    outdir.mkdir(parents=True, exist_ok=True)
    res = numeric_results(cfg, outcome)
    files = {}
    for name, cloud in outcome.clouds.items():
        for fmt in out_cfg.get("clouds", ["binary"]):
            if fmt == "csv":
                files.setdefault(name, []).append(cloud_io.write_csv(cloud, outdir / f"{name}.csv").name)
            else:
                files.setdefault(name, []).append(cloud_io.write_binary(cloud, outdir / f"{name}.cdlb").name)
    for name, fl in files.items():
        res["clouds"][name]["files"] = fl
    sl = out_cfg.get("slice")
    if sl and outcome.clouds:
        name = sl.get("cloud", next(iter(outcome.clouds)))
        if name not in outcome.clouds:
            raise ConfigError(f"output/slice/cloud: no cloud named {name!r}")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", EmptySlice)
            svg = render_slice(outcome.clouds[name], sl.get("axes", [0, 1]), sl.get("offsets"),
                               sl.get("thickness", 0.05), sl.get("size", 512))
        (outdir / "slice.svg").write_text(svg)
        res["slice"] = "slice.svg"
    res["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    (outdir / "results.json").write_text(json.dumps(res, sort_keys=True, indent=2) + "\n")
    return res, outdir


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="codlab", description="Sample and measure unions of tangent, normal "
                                 "and other planes attached to submanifolds.")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment")
    r.add_argument("id", nargs="?")
    r.add_argument("--config")
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    r.add_argument("--seed", type=int)
    r.add_argument("--out")
    r.add_argument("--threads", type=int)
    sub.add_parser("list", help="list experiments")
    d = sub.add_parser("describe", help="parameters and claim of an experiment")
    d.add_argument("id")
    v = sub.add_parser("render", help="SVG slice of a cloud file")
    v.add_argument("cloud")
    v.add_argument("--axes", default="0,1")
    v.add_argument("--offset", default=None, help="comma-separated offsets of the remaining axes")
    v.add_argument("--thickness", type=float, default=0.05)
    v.add_argument("--size", type=int, default=512)
    v.add_argument("--out", required=True)
    return ap


def _floats(text: str | None) -> list[float] | None:
    if text is None or text == "":
        return None
    return [float(t) for t in text.split(",")]


def main(argv=None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 1
    try:
        if args.command == "list":
            for exp in experiments.REGISTRY.values():
                print(f"{exp.id:26s} {exp.summary}")
            return 0
        if args.command == "describe":
            print(json.dumps(experiments.get(args.id).describe(), indent=2, sort_keys=True))
            return 0
        if args.command == "render":
            cloud = cloud_io.read_cloud(args.cloud)
            axes = [int(a) for a in args.axes.split(",")]
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", EmptySlice)
                svg = render_slice(cloud, axes, _floats(args.offset), args.thickness, args.size)
            for w in caught:
                print(f"warning: {w.message}", file=sys.stderr)
            Path(args.out).write_text(svg)
            return 0
        cfg = resolve_config(args.id, args.config, args.set, args.seed, args.out, args.threads)
        res, outdir = run(cfg)
        for c in res["claims"]:
            print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: value={c['value']} threshold={c['threshold']}")
        print(f"results: {outdir / 'results.json'}")
        return 0 if res["passed"] else 2
    except (ConfigError, UnknownExperiment) as e:
        print(f"config error: {e.args[0] if e.args else e}", file=sys.stderr)
        return 1
    except (CodlabError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
