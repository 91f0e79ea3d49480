"""Command-line front end: ``sclmetric {synth,train,eval,compare}``.

Behavior is driven by a JSON config file plus flag overrides (flags win).
Every command is deterministic given (config, inputs), and every report
embeds the fully resolved config and seed.  Exit codes: 0 ok, 2 config
error, 3 data error, 4 numeric failure.

Seed resolution order: ``--seed`` flag, then the config file, then the
``SCLMETRIC_SEED`` environment variable, then 0.  Section-level seeds
(``synth.seed`` etc.) override the global seed for that section only.

Outputs per command (under ``--out``, default ``./out``):

* ``synth``   -> ``dataset.csv``
* ``train``   -> ``checkpoint.ckpt``, ``train_log.csv``
* ``eval``    -> ``report.json``, ``cmc.csv``, ``far_gar.csv``
  (+ ``cmc.svg``, ``scores.svg`` with ``--svg``); the curve CSVs pool
  verification scores across repetitions, the JSON keeps them per
  repetition
* ``compare`` -> ``compare_report.json`` and a table on stdout

``train --repetition R`` trains on the train side of split repetition R
with the same derived seed the ``compare`` protocol uses, and
``eval --repetition R`` evaluates on that repetition's test side, so a
composed train+eval run reproduces the corresponding ``compare`` cell
exactly.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys
import warnings
from pathlib import Path

from . import evaluation, model, presets, reporting, training
from .dataset import Dataset, SplitSpec, SynthConfig, generate_synthetic, load_embeddings, save_embeddings, subject_split
from .errors import ConfigError, DataError, NumericError, SclMetricError
from .training import TrainConfig

_NUM = (int, float)

_SCHEMA = {
    "seed": (int,),
    "synth": {
        "n_subjects": (int,),
        "dim": (int,),
        "n_non_injured": (int,),
        "n_injured": (int,),
        "subject_radius": _NUM,
        "sigma_n": _NUM,
        "sigma_i": _NUM,
        "injury_shift": _NUM,
        "n_injury_modes": (int,),
        "seed": (int,),
    },
    "split": {
        "train_fraction": _NUM,
        "repetitions": (int,),
        "seed": (int,),
    },
    "train": {
        "loss": (str,),
        "learning_rate": _NUM,
        "epochs": (int,),
        "batch_size": (int,),
        "alpha1": _NUM,
        "alpha2": _NUM,
        "cl_margin": _NUM,
        "tl_margin": _NUM,
        "per_subject": (int,),
        "freeze": (int,),
        "hidden_dims": (list,),
        "optimizer": (str,),
        "batch_reduction": (str,),
        "seed": (int,),
    },
    "eval": {
        "target_fars": (list,),
        "ranks": (list,),
        "normalize": (bool,),
        "verification_pairs": (int,),
    },
}


def _default_config() -> dict:
    synth = presets.easy_synth_config()
    train = TrainConfig()
    return {
        "seed": None,
        "synth": {
            "n_subjects": synth.n_subjects,
            "dim": synth.dim,
            "n_non_injured": synth.n_non_injured,
            "n_injured": synth.n_injured,
            "subject_radius": synth.subject_radius,
            "sigma_n": synth.sigma_n,
            "sigma_i": synth.sigma_i,
            "injury_shift": synth.injury_shift,
            "n_injury_modes": synth.n_injury_modes,
        },
        "split": {"train_fraction": 0.7, "repetitions": 5},
        "train": {
            "loss": train.loss,
            "learning_rate": train.learning_rate,
            "epochs": train.epochs,
            "batch_size": train.batch_size,
            "alpha1": train.alpha1,
            "alpha2": train.alpha2,
            "cl_margin": train.cl_margin,
            "tl_margin": train.tl_margin,
            "per_subject": train.per_subject,
            "freeze": train.freeze,
            "hidden_dims": list(train.hidden_dims),
            "optimizer": train.optimizer,
            "batch_reduction": train.batch_reduction,
        },
        "eval": {
            "target_fars": [0.01, 0.1],
            "ranks": [1, 5, 10],
            "normalize": True,
            "verification_pairs": 50,
        },
    }


def _validate_section(section: str, values: dict, schema: dict) -> None:
    for key, value in values.items():
        if key not in schema:
            raise ConfigError(f"unknown config key {section}{key!r}")
        expected = schema[key]
        if isinstance(expected, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {section}{key!r} must be an object")
            _validate_section(f"{key}.", value, expected)
        elif not isinstance(value, expected) or isinstance(value, bool) and bool not in expected:
            names = "/".join(t.__name__ for t in expected)
            raise ConfigError(f"config key {section}{key!r} must be {names}")


def _load_config(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    _validate_section("", data, _SCHEMA)
    return data


def _merge(base: dict, override: dict) -> dict:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _env_seed() -> int | None:
    raw = os.environ.get("SCLMETRIC_SEED")
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"SCLMETRIC_SEED must be an integer, got {raw!r}") from None


def _resolve_config(args) -> dict:
    cfg = _default_config()
    if args.config:
        cfg = _merge(cfg, _load_config(args.config))

    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    if cfg["seed"] is None:
        cfg["seed"] = _env_seed()
    if cfg["seed"] is None:
        cfg["seed"] = 0

    flag_map = {
        "loss": ("train", "loss"),
        "alpha1": ("train", "alpha1"),
        "alpha2": ("train", "alpha2"),
        "lr": ("train", "learning_rate"),
        "epochs": ("train", "epochs"),
        "batch": ("train", "batch_size"),
        "freeze": ("train", "freeze"),
        "repetitions": ("split", "repetitions"),
        "normalize": ("eval", "normalize"),
    }
    for flag, (section, key) in flag_map.items():
        value = getattr(args, flag, None)
        if value is not None:
            cfg[section][key] = value

    margin = getattr(args, "margin", None)
    if margin is not None:
        loss = cfg["train"]["loss"]
        if loss == "cl":
            cfg["train"]["cl_margin"] = margin
        elif loss == "tl":
            cfg["train"]["tl_margin"] = margin
        else:
            raise ConfigError("--margin applies to --loss cl or tl; use --alpha1/--alpha2 for scl")

    cfg["synth"].setdefault("seed", cfg["seed"])
    cfg["split"].setdefault("seed", cfg["seed"])
    cfg["train"].setdefault("seed", cfg["seed"])
    return cfg


def _synth_config(cfg: dict) -> SynthConfig:
    return SynthConfig(**cfg["synth"])


def _split_spec(cfg: dict) -> SplitSpec:
    return SplitSpec(
        seed=cfg["split"]["seed"],
        train_fraction=cfg["split"]["train_fraction"],
        repetitions=cfg["split"]["repetitions"],
    )


def _train_config(cfg: dict) -> TrainConfig:
    t = cfg["train"]
    return TrainConfig(
        loss=t["loss"],
        learning_rate=t["learning_rate"],
        epochs=t["epochs"],
        batch_size=t["batch_size"],
        alpha1=t["alpha1"],
        alpha2=t["alpha2"],
        cl_margin=t["cl_margin"],
        tl_margin=t["tl_margin"],
        per_subject=t["per_subject"],
        seed=t["seed"],
        freeze=t["freeze"],
        hidden_dims=tuple(t["hidden_dims"]),
        optimizer=t["optimizer"],
        batch_reduction=t["batch_reduction"],
    )


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_dataset(path) -> Dataset:
    if not Path(path).exists():
        raise DataError(f"dataset file not found: {path}")
    return load_embeddings(path)


def _load_distractors(path):
    """One intact image per subject from a second embedding file."""
    ds = _load_dataset(path)
    distractors = []
    skipped = []
    for record in ds.subjects:
        if record.non_injured:
            sample = record.non_injured[0]
            distractors.append((sample.subject_id, sample.embedding))
        else:
            skipped.append(record.subject_id)
    if skipped:
        warnings.warn(f"distractor subjects without non-injured samples skipped: {skipped}")
    if not distractors:
        raise DataError(f"no usable distractor subjects in {path}")
    return distractors


def cmd_synth(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(args)
    ds = generate_synthetic(_synth_config(cfg))
    path = out / "dataset.csv"
    save_embeddings(ds, path)
    print(f"wrote {path} ({ds.n_subjects} subjects, dim {ds.dimension})")
    return 0


def _training_dataset(ds: Dataset, cfg: dict, repetition: int | None):
    """Full dataset, or the train side of one split repetition (with the
    repetition-derived seed the compare protocol uses)."""
    train_cfg = _train_config(cfg)
    if repetition is None:
        return ds, train_cfg
    train_ds, _ = subject_split(ds, _split_spec(cfg), repetition)
    return train_ds, training.config_for_repetition(train_cfg, repetition)


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(args)
    ds = _load_dataset(args.dataset)
    train_ds, train_cfg = _training_dataset(ds, cfg, args.repetition)
    params, log = training.train(train_ds, train_cfg)
    meta = {
        "loss": train_cfg.loss,
        "seed": train_cfg.seed,
        "epochs": train_cfg.epochs,
        "repetition": args.repetition,
        "loss_history": [e.sum_loss for e in log.entries],
        "config": cfg,
    }
    ckpt_path = out / "checkpoint.ckpt"
    model.save_checkpoint(params, meta, ckpt_path)
    log_path = out / "train_log.csv"
    log.write_csv(log_path)
    final = log.entries[-1].sum_loss if log.entries else 0.0
    print(f"wrote {ckpt_path} and {log_path} (final epoch sum loss {final:.6g})")
    return 0


def _evaluate_checkpoint(params, ds: Dataset, cfg: dict, repetitions, distractors):
    spec = _split_spec(cfg)
    ev = cfg["eval"]
    results = []
    for rep in repetitions:
        _, test_ds = subject_split(ds, spec, rep)
        results.append(
            evaluation.evaluate_model(
                params,
                test_ds,
                repetition=rep,
                ranks=tuple(ev["ranks"]),
                target_fars=tuple(ev["target_fars"]),
                normalize=ev["normalize"],
                verification_pairs=ev["verification_pairs"],
                distractors=distractors,
                pair_seed=training.derive_seed(spec.seed, rep, 7),
            )
        )
    return evaluation.aggregate_results(
        results,
        tuple(ev["ranks"]),
        extended_gallery=distractors is not None,
        normalized=ev["normalize"],
    )


def cmd_eval(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(args)
    ckpt = model.load_checkpoint(args.checkpoint)
    ds = _load_dataset(args.dataset)
    if ckpt.params.input_dim != ds.dimension:
        raise DataError(
            f"checkpoint expects dimension {ckpt.params.input_dim}, dataset has {ds.dimension}"
        )
    distractors = _load_distractors(args.extended_gallery) if args.extended_gallery else None
    reps = [args.repetition] if args.repetition is not None else list(range(cfg["split"]["repetitions"]))
    report = _evaluate_checkpoint(ckpt.params, ds, cfg, reps, distractors)

    payload = {
        "config": cfg,
        "checkpoint": str(args.checkpoint),
        "dataset": str(args.dataset),
        "gallery_size": report.repetitions[0].gallery_size,
        **reporting.eval_report_payload(report),
    }
    reporting.write_json_report(payload, out / "report.json")
    reporting.write_cmc_csv(report.mean_cmc, out / "cmc.csv")
    pooled = evaluation.VerificationReport(
        tuple(s for r in report.repetitions for s in r.verification.genuine_scores),
        tuple(s for r in report.repetitions for s in r.verification.imposter_scores),
    )
    reporting.write_far_gar_csv(pooled, out / "far_gar.csv")
    if args.svg:
        reporting.write_cmc_svg(evaluation.CmcCurve(report.mean_cmc), out / "cmc.svg")
        reporting.write_score_histogram_svg(pooled, out / "scores.svg")
    ranks = ", ".join(f"rank-{k} {report.rank_mean[k]:.4f}" for k in report.ranks)
    print(f"wrote {out / 'report.json'} ({ranks})")
    return 0


COMPARE_ORDER = ("cl", "tl", "scl")


def cmd_compare(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(args)
    ds = _load_dataset(args.dataset)
    spec = _split_spec(cfg)
    ev = cfg["eval"]
    base_train = _train_config(cfg)

    table = {}
    for loss in COMPARE_ORDER:
        report = evaluation.repeated_evaluation(
            ds,
            spec,
            presets.with_loss(base_train, loss),
            ranks=tuple(ev["ranks"]),
            target_fars=tuple(ev["target_fars"]),
            normalize=ev["normalize"],
            verification_pairs=ev["verification_pairs"],
        )
        table[loss] = reporting.eval_report_payload(report)

    payload = {"config": cfg, "dataset": str(args.dataset), "losses": table}
    report_path = out / "compare_report.json"
    reporting.write_json_report(payload, report_path)

    ranks = table[COMPARE_ORDER[0]]["ranks"]
    header = "loss | " + " | ".join(f"rank-{k} mean+-std" for k in ranks)
    print(header)
    print("-" * len(header))
    for loss in COMPARE_ORDER:
        cells = " | ".join(
            f"{table[loss]['rank_mean'][str(k)]:.4f}+-{table[loss]['rank_std'][str(k)]:.4f}"
            for k in ranks
        )
        print(f"{loss.upper():4} | {cells}")
    print(f"wrote {report_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sclmetric",
        description="Subclass-aware metric learning: synthesize data, train, evaluate, compare.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_train_flags=True):
        p.add_argument("--config", type=str, default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="global seed")
        p.add_argument("--out", type=str, default="out", help="output directory")
        if with_train_flags:
            p.add_argument("--loss", choices=training.LOSS_KINDS, default=None)
            p.add_argument("--alpha1", type=float, default=None)
            p.add_argument("--alpha2", type=float, default=None)
            p.add_argument("--margin", type=float, default=None, help="margin of the selected cl/tl loss")
            p.add_argument("--lr", type=float, default=None)
            p.add_argument("--epochs", type=int, default=None)
            p.add_argument("--batch", type=int, default=None)
            p.add_argument("--freeze", type=int, default=None)

    p_synth = sub.add_parser("synth", help="generate a synthetic embedding CSV")
    common(p_synth, with_train_flags=False)
    p_synth.set_defaults(func=cmd_synth)

    p_train = sub.add_parser("train", help="train an embedding network on a dataset CSV")
    p_train.add_argument("dataset", type=str)
    common(p_train)
    p_train.add_argument("--repetitions", type=int, default=None, help="split plan size")
    p_train.add_argument(
        "--repetition", type=int, default=None,
        help="train on the train side of this split repetition (compare-compatible seeding)",
    )
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a dataset CSV")
    p_eval.add_argument("checkpoint", type=str)
    p_eval.add_argument("dataset", type=str)
    common(p_eval, with_train_flags=False)
    p_eval.add_argument("--repetitions", type=int, default=None, help="split plan size")
    p_eval.add_argument("--repetition", type=int, default=None, help="evaluate only this repetition's test side")
    p_eval.add_argument("--extended-gallery", type=str, default=None, help="distractor embedding CSV")
    p_eval.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=None,
                        help="unit-normalize embeddings for the inter-class statistic")
    p_eval.add_argument("--svg", action="store_true", help="also render CMC and score-histogram SVGs")
    p_eval.set_defaults(func=cmd_eval)

    p_cmp = sub.add_parser("compare", help="train and evaluate CL, TL and the subclass loss side by side")
    p_cmp.add_argument("dataset", type=str)
    common(p_cmp)
    p_cmp.add_argument("--repetitions", type=int, default=None, help="split plan size")
    p_cmp.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4
    except SclMetricError as exc:  # anything else from the library
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
