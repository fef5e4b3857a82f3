"""Configuration-driven command line front end.

Commands read a key=value config file, apply flag and positional overrides
(flags win), and write their outputs plus the fully resolved config into the
output directory.  Output file names embed a hash of the resolved config
(excluding the output directory itself), all CSV floats carry 17 significant
digits, and files are written atomically, so rerunning a config reproduces
its outputs byte for byte.

Exit codes are a stable contract: 0 ok, 1 config or I/O trouble,
2 unisolvency failure, 3 conditioning failure, 4 too few study levels,
5 mollifier gate failure.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from pathlib import Path

import numpy as np

from .analysis import (
    InstabilityConfig,
    StudyConfig,
    beta_rate,
    convergence_study,
    instability_study,
)
from .functions import get_function
from .geometry import (
    DEFAULT_FILL_RESOLUTION,
    fill_distance,
    load_points_csv,
    separation,
)
from .mollifier import build_mollifier, moment, verify_moments
from .polybasis import UnisolvencyError, multi_indices
from .spline import ConditioningError, fit, nbc_residual, save_model

ENV_OUT = "SPLINELAB_OUT"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_UNISOLVENCY = 2
EXIT_CONDITIONING = 3
EXIT_LEVELS = 4
EXIT_MOLLIFIER = 5


class ConfigError(ValueError):
    pass


# key -> (type, default); None default means the key is required
_COMMON = {"seed": ("int", 0), "out": ("str", "out")}

SCHEMAS = {
    "fit": {
        **_COMMON,
        "points_csv": ("str", None),
        "values_csv": ("str", ""),
        "function": ("str", ""),
        "d": ("int", None),
        "k": ("int", None),
    },
    "study": {
        **_COMMON,
        "function": ("str", None),
        "d": ("int", None),
        "k": ("int", None),
        "m": ("int", None),
        "p_list": ("plist", (float("inf"), 2.0)),
        "h_schedule": ("floats", None),
        "lp_samples": ("int", 16384),
        "lp_grid": ("int", 1025),
    },
    "mollifier": {
        **_COMMON,
        "d": ("int", None),
        "m": ("int", None),
        "quad_nodes": ("int", 0),
    },
    "instability": {
        **_COMMON,
        "function": ("str", None),
        "d": ("int", None),
        "k": ("int", None),
        "base_h": ("float", None),
        "cluster_factors": ("floats", (1.0, 4.0, 16.0, 64.0, 256.0)),
        "lp_samples": ("int", 16384),
        "lp_grid": ("int", 1025),
    },
    "metrics": {
        **_COMMON,
        "points_csv": ("str", None),
        "resolution": ("int", 0),
    },
}


def _parse_value(kind: str, raw: str, key: str):
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "str":
            return raw
        if kind == "floats":
            return tuple(float(v) for v in raw.split(",") if v.strip())
        if kind == "plist":
            return tuple(
                float("inf") if v.strip() == "inf" else float(v)
                for v in raw.split(",")
                if v.strip()
            )
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {exc}") from exc
    raise ConfigError(f"unknown schema kind {kind}")


def _format_value(kind: str, value) -> str:
    if kind == "int":
        return str(value)
    if kind == "float":
        return format(float(value), ".17g")
    if kind == "str":
        return str(value)
    if kind == "floats":
        return ",".join(format(float(v), ".17g") for v in value)
    if kind == "plist":
        return ",".join(
            "inf" if np.isinf(v) else format(float(v), ".17g") for v in value
        )
    raise ConfigError(f"unknown schema kind {kind}")


def parse_config_file(path: str) -> dict:
    """Read `key = value` lines; '#' starts a comment; duplicate keys are errors."""
    out: dict[str, str] = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = raw.strip()
    return out


def resolve_config(command: str, file_kv: dict, overrides: dict) -> dict:
    """Apply schema defaults, file values, then overrides; unknown keys are fatal."""
    schema = SCHEMAS[command]
    for key in file_kv:
        if key not in schema:
            raise ConfigError(f"unknown config key {key!r} for command {command}")
    for key in overrides:
        if key not in schema:
            raise ConfigError(f"unknown override key {key!r} for command {command}")
    resolved = {}
    for key, (kind, default) in schema.items():
        if key in overrides:
            raw = overrides[key]
            resolved[key] = raw if not isinstance(raw, str) else _parse_value(kind, raw, key)
        elif key in file_kv:
            resolved[key] = _parse_value(kind, file_kv[key], key)
        elif default is not None:
            resolved[key] = default
        else:
            raise ConfigError(f"missing required config key {key!r}")
    return resolved


def canonical_config_text(command: str, resolved: dict) -> str:
    schema = SCHEMAS[command]
    lines = [f"{key} = {_format_value(schema[key][0], resolved[key])}" for key in sorted(resolved)]
    return "\n".join(lines) + "\n"


def config_hash(command: str, resolved: dict) -> str:
    """Short hash of the semantic config (output directory excluded)."""
    semantic = {k: v for k, v in resolved.items() if k != "out"}
    text = command + "\n" + canonical_config_text(command, {**semantic, "out": ""})
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    tmp.write_text(text)
    os.replace(tmp, path)


def _emit(outdir: Path, name: str, text: str) -> Path:
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / name
    _write_atomic(path, text)
    return path


def _fmt17(x) -> str:
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return "nan"
    return format(float(x), ".17g")


def _load_values_csv(path: str, expected: int) -> np.ndarray:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read values {path}: {exc}") from exc
    vals = []
    for lineno, line in enumerate(lines, start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        try:
            vals.append(float(stripped))
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from exc
    if len(vals) != expected:
        raise ConfigError(f"expected {expected} values, got {len(vals)}")
    return np.asarray(vals)


def cmd_fit(resolved: dict) -> int:
    outdir = Path(resolved["out"])
    tag = config_hash("fit", resolved)
    try:
        nodes = load_points_csv(resolved["points_csv"])
    except (OSError, ValueError) as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if bool(resolved["values_csv"]) == bool(resolved["function"]):
        print(
            "error: config: provide exactly one of values_csv or function",
            file=sys.stderr,
        )
        return EXIT_CONFIG
    if resolved["d"] != nodes.domain.d:
        print(
            f"error: config: d={resolved['d']} but points file has d={nodes.domain.d}",
            file=sys.stderr,
        )
        return EXIT_CONFIG
    try:
        if resolved["values_csv"]:
            values = _load_values_csv(resolved["values_csv"], len(nodes))
        else:
            values = get_function(resolved["function"], resolved["d"])(nodes.points)
    except (ConfigError, KeyError) as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        model = fit(nodes, values, resolved["d"], resolved["k"])
    except UnisolvencyError as exc:
        print(f"error: unisolvency: {exc}", file=sys.stderr)
        return EXIT_UNISOLVENCY
    except ConditioningError as exc:
        print(f"error: conditioning: {exc}", file=sys.stderr)
        return EXIT_CONDITIONING

    diag = model.diagnostics
    ell = model.tail.space.dim
    mu_norm = float(np.abs(model.mu).max())
    outdir.mkdir(parents=True, exist_ok=True)
    model_path = outdir / f"model_{tag}.txt"
    save_model(model, model_path)
    csv = "n_nodes,ell,cond,nbc_residual,max_residual,mu_norm\n" + ",".join(
        [
            str(len(nodes)),
            str(ell),
            _fmt17(diag.cond_estimate),
            _fmt17(diag.nbc_residual),
            _fmt17(diag.interp_residual),
            _fmt17(mu_norm),
        ]
    ) + "\n"
    _emit(outdir, f"fit_{tag}.csv", csv)
    _emit(outdir, f"resolved_fit_{tag}.cfg", canonical_config_text("fit", resolved))
    print(f"n_nodes: {len(nodes)}")
    print(f"ell: {ell}")
    print(f"cond: {diag.cond_estimate:.6g}")
    print(f"nbc_residual: {diag.nbc_residual:.6g}")
    print(f"max_residual: {diag.interp_residual:.6g}")
    print(f"mu_norm: {mu_norm:.6g}")
    print(f"model_file: {model_path}")
    return EXIT_OK


def cmd_study(resolved: dict) -> int:
    outdir = Path(resolved["out"])
    tag = config_hash("study", resolved)
    try:
        get_function(resolved["function"], resolved["d"])
    except KeyError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    cfg = StudyConfig(
        function=resolved["function"],
        d=resolved["d"],
        k=resolved["k"],
        m=resolved["m"],
        p_values=tuple(resolved["p_list"]),
        h_schedule=tuple(resolved["h_schedule"]),
        seed=resolved["seed"],
        lp_samples=resolved["lp_samples"],
        lp_grid=resolved["lp_grid"],
    )
    report = convergence_study(cfg)
    _emit(outdir, f"study_{tag}.csv", report.csv_text())
    summary = report.summary_text()
    _emit(outdir, f"study_{tag}_summary.txt", summary)
    _emit(outdir, f"resolved_study_{tag}.cfg", canonical_config_text("study", resolved))
    print(summary, end="")
    ok = sum(1 for lv in report.levels if lv.status == "ok")
    if ok < 3:
        print(f"error: insufficient_levels: only {ok} levels succeeded", file=sys.stderr)
        return EXIT_LEVELS
    return EXIT_OK


def cmd_mollifier(resolved: dict) -> int:
    outdir = Path(resolved["out"])
    tag = config_hash("mollifier", resolved)
    quad = resolved["quad_nodes"] or None
    phi = build_mollifier(resolved["d"], resolved["m"], quad_nodes=quad)
    ok, rows = verify_moments(phi)
    lines = ["alpha,order,value,required,pass"]
    for alpha, val, required in rows:
        tag_a = "_".join(str(a) for a in alpha)
        tol = 1e-8 if sum(alpha) == 0 else 1e-6
        status = "yes" if abs(val - required) <= tol else "no"
        lines.append(
            f"{tag_a},{sum(alpha)},{_fmt17(val)},{_fmt17(required)},{status}"
        )
    # order-m moments are unconstrained; reported for context
    for alpha in multi_indices(resolved["d"], resolved["m"]):
        tag_a = "_".join(str(a) for a in alpha)
        val = moment(phi, alpha, quad_nodes=2 * phi.quad_nodes_per_axis)
        lines.append(f"{tag_a},{resolved['m']},{_fmt17(val)},free,-")
    _emit(outdir, f"mollifier_{tag}.csv", "\n".join(lines) + "\n")
    _emit(
        outdir,
        f"resolved_mollifier_{tag}.cfg",
        canonical_config_text("mollifier", resolved),
    )
    print(f"moment_rows: {len(lines) - 1}")
    print(f"gate: {'pass' if ok else 'fail'}")
    if not ok:
        print("error: mollifier_gate: moment tolerances violated", file=sys.stderr)
        return EXIT_MOLLIFIER
    return EXIT_OK


def cmd_instability(resolved: dict) -> int:
    outdir = Path(resolved["out"])
    tag = config_hash("instability", resolved)
    try:
        get_function(resolved["function"], resolved["d"])
    except KeyError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    cfg = InstabilityConfig(
        function=resolved["function"],
        d=resolved["d"],
        k=resolved["k"],
        base_h=resolved["base_h"],
        cluster_factors=tuple(resolved["cluster_factors"]),
        seed=resolved["seed"],
        lp_samples=resolved["lp_samples"],
        lp_grid=resolved["lp_grid"],
    )
    report = instability_study(cfg)
    _emit(outdir, f"instability_{tag}.csv", report.csv_text())
    _emit(
        outdir,
        f"resolved_instability_{tag}.cfg",
        canonical_config_text("instability", resolved),
    )
    for row in report.rows:
        print(
            f"factor {row.factor:g}: q={row.q:.6g} rho={row.rho:.6g} "
            f"cond={row.cond:.6g} mu_max={row.mu_max:.6g} L1={row.sf_l1:.6g} "
            f"{row.status}"
        )
    return EXIT_OK


def cmd_metrics(resolved: dict) -> int:
    outdir = Path(resolved["out"])
    tag = config_hash("metrics", resolved)
    try:
        nodes = load_points_csv(resolved["points_csv"])
    except (OSError, ValueError) as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    resolution = resolved["resolution"] or DEFAULT_FILL_RESOLUTION[nodes.domain.d]
    h = fill_distance(nodes, resolution)
    q = separation(nodes) if len(nodes) >= 2 else float("nan")
    rho = h / q if len(nodes) >= 2 else float("nan")
    csv = "n_nodes,fill_h,separation_q,mesh_ratio,resolution\n" + ",".join(
        [str(len(nodes)), _fmt17(h), _fmt17(q), _fmt17(rho), str(resolution)]
    ) + "\n"
    _emit(outdir, f"metrics_{tag}.csv", csv)
    _emit(outdir, f"resolved_metrics_{tag}.cfg", canonical_config_text("metrics", resolved))
    print(f"n_nodes: {len(nodes)}")
    print(f"fill_h: {h:.6g}")
    print(f"separation_q: {q:.6g}")
    print(f"mesh_ratio: {rho:.6g}")
    return EXIT_OK


_COMMANDS = {
    "fit": cmd_fit,
    "study": cmd_study,
    "mollifier": cmd_mollifier,
    "instability": cmd_instability,
    "metrics": cmd_metrics,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="splinelab",
        description="surface-spline fitting and convergence laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("overrides", nargs="*", metavar="key=value")
    args = parser.parse_args(argv)

    try:
        file_kv = parse_config_file(args.config)
        overrides: dict = {}
        for item in args.overrides:
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not key=value")
            key, _, raw = item.partition("=")
            overrides[key.strip()] = raw.strip()
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.out is not None:
            overrides["out"] = args.out
        elif "out" not in overrides and os.environ.get(ENV_OUT):
            # the environment override is honored only when the flag is absent
            overrides["out"] = os.environ[ENV_OUT]
        resolved = resolve_config(args.command, file_kv, overrides)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        return _COMMANDS[args.command](resolved)
    except (UnisolvencyError,) as exc:
        print(f"error: unisolvency: {exc}", file=sys.stderr)
        return EXIT_UNISOLVENCY
    except ConditioningError as exc:
        print(f"error: conditioning: {exc}", file=sys.stderr)
        return EXIT_CONDITIONING
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
