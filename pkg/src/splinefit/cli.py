"""Command-line entry points.

Subcommands: ``gen-data``, ``train``, ``reconstruct``, ``fit-bsa``,
``evaluate``.  Every subcommand accepts ``--config`` (a key=value file whose
accepted keys are listed in its ``--help``), ``--seed``, and ``--out``.
Exit codes: 0 success, 1 usage/configuration error, 2 runtime error.
"""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .dataset import (
    GenConfig,
    desk_scale,
    generate_dataset,
    load_dataset,
    full_scale,
    parse_grid_sizes,
)
from .errors import ConfigurationError, SplinefitError
from .kv import read_kv
from .lsq import FitConfig
from .model import ArchConfig, load_checkpoint
from .pipeline import (
    ReconstructionResult,
    evaluate,
    export_obj,
    fit_bsa_surface,
    format_summary,
    load_xyz,
    reconstruct,
    save_xyz,
)
from .train import TrainConfig, train


def _bool(text):
    lowered = text.lower()
    if lowered in ("1", "true", "yes"):
        return True
    if lowered in ("0", "false", "no"):
        return False
    raise ConfigurationError(f"expected a boolean, got {text!r}")


def _pair_int(text):
    a, b = text.split(",")
    return (int(a), int(b))


def _pair_float(text):
    a, b = text.split(",")
    return (float(a), float(b))


def _int_list(text):
    return tuple(int(x) for x in text.split(","))


def _grid(text):
    r, _, c = text.partition("x")
    return (int(r), int(c))


GEN_KEYS = {
    "grid_sizes": parse_grid_sizes,
    "samples_per_size": int,
    "cp_xy_jitter_sigma": float,
    "z_range": _pair_float,
    "degrees": _pair_int,
    "points_per_cloud": int,
    "point_noise_sigma": float,
    "removal_fraction": float,
    "pad_rows": int,
    "pad_cols": int,
    "seed": int,
}

TRAIN_KEYS = {
    "learning_rate": float,
    "beta1": float,
    "beta2": float,
    "adam_eps": float,
    "epochs": int,
    "batch_size": int,
    "w_pad": float,
    "seed": int,
    "grad_check": _bool,
    "k_neighbors": int,
    "layer_dims": _int_list,
    "global_dim": int,
    "dict_atoms": int,
    "head_hidden": int,
}

RECONSTRUCT_KEYS = {"sample_res": int, "epsilon": float}

FIT_BSA_KEYS = {
    "degrees": _pair_int,
    "cp_grid": _grid,
    "regularization": float,
    "grid_rows": int,
    "grid_cols": int,
    "sample_res": int,
}

EVALUATE_KEYS = {
    "bsa_grids": parse_grid_sizes,
    "eval_size": int,
    "sample_res": int,
    "nc_k": int,
    "epsilon": float,
    "seed": int,
}


def read_config(path, schema):
    """Parse a key=value config against a schema; unknown keys are fatal."""
    if path is None:
        return {}
    values = {}
    for key, raw in read_kv(path).items():
        if key not in schema:
            raise ConfigurationError(
                f"unknown config key {key!r}; accepted keys: "
                + ", ".join(sorted(schema))
            )
        try:
            values[key] = schema[key](raw)
        except (ValueError, TypeError) as exc:
            raise ConfigurationError(f"bad value for {key!r}: {exc}") from exc
    return values


class _Parser(argparse.ArgumentParser):
    # usage problems exit with status 1, runtime problems with 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(sub, schema):
    sub.add_argument("--config", type=Path, default=None,
                     help="key=value config file")
    sub.add_argument("--seed", type=int, default=None,
                     help="override the config seed")
    keys = ", ".join(sorted(schema))
    sub.epilog = f"accepted config keys: {keys}" if schema else None


def build_parser():
    parser = _Parser(prog="splinefit",
                     description="B-spline surface reconstruction toolkit")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("gen-data", parents=[], help="generate a dataset")
    _add_common(p, GEN_KEYS)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--preset", choices=["desk", "full"], default="desk")
    p.set_defaults(func=cmd_gen_data)

    p = subs.add_parser("train", help="train the surface predictor")
    _add_common(p, TRAIN_KEYS)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("reconstruct", help="fit a surface to an .xyz cloud")
    _add_common(p, RECONSTRUCT_KEYS)
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--out", type=Path, default=Path("."))
    p.set_defaults(func=cmd_reconstruct)

    p = subs.add_parser("fit-bsa", help="least-squares baseline fit")
    _add_common(p, FIT_BSA_KEYS)
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--out", type=Path, default=Path("."))
    p.set_defaults(func=cmd_fit_bsa)

    p = subs.add_parser("evaluate", help="score model and baseline on a dataset")
    _add_common(p, EVALUATE_KEYS)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_evaluate)
    return parser


def cmd_gen_data(args):
    cfg = desk_scale() if args.preset == "desk" else full_scale()
    overrides = read_config(args.config, GEN_KEYS)
    if args.seed is not None:
        overrides["seed"] = args.seed
    cfg = replace(cfg, **overrides)
    out = generate_dataset(cfg, args.out)
    print(f"wrote {cfg.total_samples} samples to {out}")
    return 0


def cmd_train(args):
    data_cfg, samples = load_dataset(args.data)
    values = read_config(args.config, TRAIN_KEYS)
    if args.seed is not None:
        values["seed"] = args.seed
    arch_kwargs = {k: values.pop(k) for k in list(values)
                   if k in ("k_neighbors", "layer_dims", "global_dim",
                            "dict_atoms", "head_hidden")}
    arch = ArchConfig(pad_rows=data_cfg.pad_rows, pad_cols=data_cfg.pad_cols,
                      **arch_kwargs)
    cfg = TrainConfig(**values)
    result = train(samples, arch, cfg, args.out, degrees=data_cfg.degrees,
                   log=lambda msg: print(msg, flush=True))
    print(f"best epoch {result.best_epoch}; checkpoint {result.checkpoint_path}")
    return 0


def cmd_reconstruct(args):
    values = read_config(args.config, RECONSTRUCT_KEYS)
    cloud = load_xyz(args.input)
    result = reconstruct(cloud, args.checkpoint, source=str(args.input), **values)
    args.out.mkdir(parents=True, exist_ok=True)
    stem = args.input.stem
    export_obj(result, args.out / f"{stem}_recon.obj")
    save_xyz(result.dense_sample, args.out / f"{stem}_recon.xyz")
    rows, cols = result.predicted_grid
    print(f"predicted control grid {rows}x{cols}; wrote {stem}_recon.obj/.xyz")
    return 0


def cmd_fit_bsa(args):
    values = read_config(args.config, FIT_BSA_KEYS)
    cloud = load_xyz(args.input)
    data_grid = None
    if "grid_rows" in values or "grid_cols" in values:
        data_grid = (values.pop("grid_rows"), values.pop("grid_cols"))
    sample_res = values.pop("sample_res", 64)
    fit_cfg = FitConfig(**values)
    surface, dense = fit_bsa_surface(cloud, fit_cfg, data_grid=data_grid,
                                     sample_res=sample_res)
    args.out.mkdir(parents=True, exist_ok=True)
    stem = args.input.stem
    result = ReconstructionResult(
        surface=surface, predicted_grid=fit_cfg.cp_grid, dense_sample=dense,
        provenance={"method": "bsa", "input": str(args.input)},
    )
    export_obj(result, args.out / f"{stem}_bsa.obj")
    save_xyz(dense, args.out / f"{stem}_bsa.xyz")
    rows, cols = fit_cfg.cp_grid
    print(f"fit {rows}x{cols} control grid; wrote {stem}_bsa.obj/.xyz")
    return 0


def cmd_evaluate(args):
    values = read_config(args.config, EVALUATE_KEYS)
    if args.seed is not None:
        values["seed"] = args.seed
    reports = evaluate(args.data, args.checkpoint, args.out, **values)
    print(format_summary(reports))
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"splinefit: configuration error: {exc}", file=sys.stderr)
        return 1
    except SplinefitError as exc:
        print(f"splinefit: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"splinefit: i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
