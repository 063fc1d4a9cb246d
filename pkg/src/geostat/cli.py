"""Batch command-line frontend.

Subcommands: ``krige``, ``geocp``, ``compare``, ``synth`` and ``evaluate``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure. Errors print a single ``geostat: error: ...`` line on stderr.

Every command that writes a CSV also writes a JSON sidecar next to it (same
name, ``.json`` suffix) echoing the effective configuration and seed. The
sidecar can be passed back via ``--config`` to rerun with identical
settings.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .data_io import (
    MAX_SYNTH_POINTS,
    read_points_csv,
    split_811,
    synth_gaussian_field,
    synth_heteroskedastic_regression,
    synth_skewed_field,
    write_results_csv,
)
from .errors import ConfigError, DataError, GeostatError, NumericalError
from .metrics import interval_metrics, regression_metrics
from .pipeline import compare_geocp, compare_kriging, run_geocp_preset, run_kriging
from .presets import PRESET_NAMES, apply_overrides, resolve_preset
from .variogram import VariogramSpec

logger = logging.getLogger("geostat")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4
DEFAULT_SEED = 0
DEFAULT_ALPHA = 0.1


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def _write_json(path: Path, payload: dict) -> None:
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True)
    try:
        path.write_text(text + "\n", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc


def _sidecar_path(out: Path) -> Path:
    return out.with_suffix(".json") if out.suffix.lower() != ".json" else out.with_name(out.name + ".meta.json")


def _load_config(path: str | None) -> dict[str, Any]:
    """Read a JSON config file.

    Either a plain mapping of preset fields, or a sidecar written by a
    previous run (recognised by its ``config`` entry).
    """
    if path is None:
        return {}
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a JSON object")
    return raw


def _resolve(task: str, args) -> tuple[Any, int, dict]:
    """Effective preset and seed from flags, config file and defaults.

    Flags win over a sidecar's recorded preset/seed; explicit config fields
    override the preset field by field.
    """
    cfg = _load_config(args.config)
    if "config" in cfg:  # sidecar from an earlier run
        overrides = {k: v for k, v in cfg["config"].items() if k != "name"}
        preset_name = args.preset or cfg.get("preset")
        seed = args.seed if args.seed is not None else cfg.get("seed")
        extra = {k: cfg[k] for k in ("alpha",) if k in cfg}
    else:
        overrides = cfg
        preset_name = args.preset
        seed = args.seed
        extra = {}
    preset = resolve_preset(task, preset_name or "geoevolve")
    preset = apply_overrides(preset, overrides)
    seed = DEFAULT_SEED if seed is None else seed
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")
    return preset, seed, extra


def _alpha(args, extra) -> float:
    alpha = args.alpha if args.alpha is not None else extra.get("alpha", DEFAULT_ALPHA)
    if not 0 < alpha < 1:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")
    return float(alpha)


def _feature_cols(args) -> list[str]:
    if not args.feature_cols:
        return []
    return [c.strip() for c in args.feature_cols.split(",") if c.strip()]


def _out_path(args, default: str) -> Path:
    return Path(args.out or default)


def _columns(args) -> dict[str, str]:
    return {"x": args.x_col, "y": args.y_col, "value": args.value_col}


def _aligned(rows: list[dict]) -> str:
    header = list(rows[0])
    cells = [[h for h in header]]
    for r in rows:
        cells.append([r[h] if isinstance(r[h], str) else f"{r[h]:.6g}" for h in header])
    widths = [max(len(c[i]) for c in cells) for i in range(len(header))]
    lines = ["  ".join(c[i].ljust(widths[i]) if i == 0 else c[i].rjust(widths[i])
                       for i in range(len(header))) for c in cells]
    return "\n".join(lines)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_krige(args) -> int:
    preset, seed, _ = _resolve("kriging", args)
    data = read_points_csv(args.input, args.x_col, args.y_col, args.value_col)
    split = split_811(len(data), seed)
    run = run_kriging(data, preset, split, seed)
    out = _out_path(args, "predictions.csv")
    xy = data.coords[split.test]
    o = run.test_output
    rows = [(xy[i, 0], xy[i, 1], o.value[i], o.variance[i], bool(o.used_fallback[i]))
            for i in range(len(o))]
    write_results_csv(out, rows, ["x", "y", "prediction", "variance", "used_fallback"])
    spec = run.fitted.model.spec
    _write_json(_sidecar_path(out), {
        "command": "krige",
        "version": __version__,
        "task": "kriging",
        "preset": preset.name,
        "seed": seed,
        "input": str(args.input),
        "columns": _columns(args),
        "config": preset.to_dict(),
        "split": {"train": len(split.train), "validation": len(split.val), "test": len(split.test)},
        "variogram": {"kind": spec.kind, "nugget": spec.nugget, "psill": spec.psill,
                      "range": spec.range, "exponent": spec.exponent},
        "variance_units": "log" if o.log_variance else "value",
        "n_fallback": int(np.sum(o.used_fallback)),
        "n_variance_clamped": o.n_clamped,
        "metrics": {
            "test": run.test_metrics.as_dict(),
            "validation": run.val_metrics.as_dict() if run.val_metrics else None,
        },
    })
    return EXIT_OK


def cmd_geocp(args) -> int:
    preset, seed, extra = _resolve("geocp", args)
    alpha = _alpha(args, extra)
    feats = _feature_cols(args)
    data = read_points_csv(args.input, args.x_col, args.y_col, args.value_col,
                           feature_cols=feats, optional_cols=(args.prediction_col,))
    split = split_811(len(data), seed)
    run = run_geocp_preset(data, preset, split, alpha, feature_cols=feats,
                           prediction_col=args.prediction_col)
    res = run.result
    out = _out_path(args, "intervals.csv")
    xy = data.coords[split.test]
    rows = [(xy[i, 0], xy[i, 1], res.center[i], res.lower[i], res.upper[i], res.threshold[i])
            for i in range(len(res))]
    write_results_csv(out, rows, ["x", "y", "prediction", "lower", "upper", "threshold"])
    base = ("external column " + repr(args.prediction_col)
            if args.prediction_col in data.extra else "built-in k-NN")
    _write_json(_sidecar_path(out), {
        "command": "geocp",
        "version": __version__,
        "task": "geocp",
        "preset": preset.name,
        "seed": seed,
        "alpha": alpha,
        "input": str(args.input),
        "columns": {**_columns(args), "features": feats, "prediction": args.prediction_col},
        "base_predictor": base,
        "config": preset.to_dict(),
        "split": {"train": len(split.train), "calibration": len(split.val), "test": len(split.test)},
        "quantile_level": res.level,
        "optimized_sigma": res.optimized_sigma,
        "n_degenerate_weights": int(np.sum(res.degenerate)),
        "metrics": {k: v for k, v in run.metrics.as_dict().items()},
    })
    return EXIT_OK


def cmd_compare(args) -> int:
    task = args.task
    if task not in ("kriging", "geocp"):
        raise ConfigError(f"--task must be 'kriging' or 'geocp', got {task!r}")
    cfg = _load_config(args.config)
    if cfg:
        raise ConfigError("compare runs the frozen presets; --config is not accepted")
    seed = DEFAULT_SEED if args.seed is None else args.seed
    if task == "kriging":
        data = read_points_csv(args.input, args.x_col, args.y_col, args.value_col)
        rows = compare_kriging(data, seed)
        extra = {}
    else:
        alpha = _alpha(args, {})
        feats = _feature_cols(args)
        data = read_points_csv(args.input, args.x_col, args.y_col, args.value_col,
                               feature_cols=feats, optional_cols=(args.prediction_col,))
        rows = compare_geocp(data, seed, alpha, feature_cols=feats,
                             prediction_col=args.prediction_col)
        extra = {"alpha": alpha, "features": feats}
    out = _out_path(args, f"compare_{task}.csv")
    write_results_csv(out, rows)
    text = _aligned(rows)
    print(text)
    _write_json(_sidecar_path(out), {
        "command": "compare",
        "version": __version__,
        "task": task,
        "seed": seed,
        "input": str(args.input),
        "columns": _columns(args),
        "presets": {n: resolve_preset(task, n).to_dict() for n in PRESET_NAMES},
        **extra,
    })
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.n < 1 or args.n > MAX_SYNTH_POINTS:
        raise ConfigError(f"n must be in [1, {MAX_SYNTH_POINTS}], got {args.n}")
    seed = DEFAULT_SEED if args.seed is None else args.seed
    out = _out_path(args, "synthetic.csv")
    if args.dataset == "hetero":
        data = synth_heteroskedastic_regression(args.n, seed)
        params: dict[str, Any] = {"dataset": "hetero"}
    else:
        spec = VariogramSpec(args.kind, args.nugget, args.psill, args.range, args.exponent)
        maker = synth_skewed_field if args.dataset == "skewed" else synth_gaussian_field
        data = maker(args.n, spec, seed=seed)
        params = {"dataset": args.dataset, "kind": spec.kind, "nugget": spec.nugget,
                  "psill": spec.psill, "range": spec.range, "exponent": spec.exponent}
    header = ["x", "y", "value", *data.features]
    cols = [data.coords[:, 0], data.coords[:, 1], data.target, *data.features.values()]
    write_results_csv(out, zip(*cols), header)
    _write_json(_sidecar_path(out), {
        "command": "synth", "version": __version__, "n": args.n, "seed": seed, **params,
    })
    return EXIT_OK


def cmd_evaluate(args) -> int:
    pred_col = args.prediction_col
    optional = [c for c in (args.lower_col, args.upper_col) if c]
    data = read_points_csv(args.input, args.x_col, args.y_col, args.value_col,
                           feature_cols=[pred_col, *optional])
    y = data.target
    result: dict[str, Any] = {"n": len(y)}
    result["regression"] = regression_metrics(data.features[pred_col], y).as_dict()
    if args.lower_col and args.upper_col:
        alpha = _alpha(args, {})
        m = interval_metrics(data.features[args.lower_col], data.features[args.upper_col], y, alpha)
        result["interval"] = m.as_dict()
        result["alpha"] = alpha
    elif args.lower_col or args.upper_col:
        raise ConfigError("--lower-col and --upper-col must be given together")
    text = json.dumps(_jsonable(result), indent=2, sort_keys=True)
    if args.out:
        try:
            Path(args.out).write_text(text + "\n", encoding="utf-8")
        except OSError as exc:
            raise DataError(f"cannot write {args.out}: {exc}") from exc
    else:
        print(text)
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(EXIT_CONFIG, f"geostat: error: {message}\n")


def _common(p: argparse.ArgumentParser, *, preset=True, config=True, alpha=False,
            features=False) -> None:
    p.add_argument("--input", required=True, help="headed CSV with point observations")
    p.add_argument("--x-col", default="x")
    p.add_argument("--y-col", default="y")
    p.add_argument("--value-col", default="value")
    if preset:
        p.add_argument("--preset", choices=PRESET_NAMES, default=None,
                       help="default: geoevolve (or the preset recorded in --config)")
    if config:
        p.add_argument("--config", help="JSON overrides, or a sidecar from an earlier run")
    if alpha:
        p.add_argument("--alpha", type=float, default=None, help="miscoverage level (default 0.1)")
    if features:
        p.add_argument("--feature-cols", default="",
                       help="comma-separated feature columns for the built-in k-NN predictor")
        p.add_argument("--prediction-col", default="prediction",
                       help="column with external base predictions; used when present")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="geostat", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"geostat {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("krige", help="fit a kriging preset and predict the test split")
    _common(p)
    p.set_defaults(func=cmd_krige)

    p = sub.add_parser("geocp", help="GeoCP intervals on the test split")
    _common(p, alpha=True, features=True)
    p.set_defaults(func=cmd_geocp)

    p = sub.add_parser("compare", help="run all four presets on identical splits")
    p.add_argument("--task", required=True, choices=("kriging", "geocp"))
    _common(p, preset=False, alpha=True, features=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("synth", help="write a synthetic dataset")
    p.add_argument("--dataset", choices=("field", "skewed", "hetero"), default="field")
    p.add_argument("--kind", default="exponential")
    p.add_argument("--nugget", type=float, default=0.1)
    p.add_argument("--psill", type=float, default=1.0)
    p.add_argument("--range", type=float, default=0.2)
    p.add_argument("--exponent", type=float, default=None)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("evaluate", help="metrics for a CSV of observations and predictions")
    p.add_argument("--input", required=True)
    p.add_argument("--x-col", default="x")
    p.add_argument("--y-col", default="y")
    p.add_argument("--value-col", default="value")
    p.add_argument("--prediction-col", default="prediction")
    p.add_argument("--lower-col")
    p.add_argument("--upper-col")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="geostat: %(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        code, msg = EXIT_CONFIG, str(exc)
    except DataError as exc:
        code, msg = EXIT_DATA, str(exc)
    except (NumericalError, np.linalg.LinAlgError) as exc:
        code, msg = EXIT_NUMERICAL, str(exc)
    except GeostatError as exc:  # pragma: no cover - all subclasses handled above
        code, msg = EXIT_NUMERICAL, str(exc)
    msg = " ".join(msg.split()) or type(exc).__name__
    print(f"geostat: error: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
