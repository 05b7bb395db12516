"""Command-line entry point: run simulations, compare runs, calibrate models.

Configuration is a single JSON document; an "extends" key layers a config on
top of a shipped preset (paper_unsw, paper_cicids) or another file.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import ingest
from .agent import AgentConfig, save_checkpoint
from .domain import Priority, RewardParams
from .ingest import Dataset, PcaModel, SynthConfig, fit_pca, split, synth_generate, transform_dataset
from .metrics import aggregate, dump_summary, render_table, write_steps_csv
from .prioritizer import (
    ConfusionMatrix,
    empirical_confusion,
    nb_bootstrap_ensemble,
    nb_fit,
    nb_predict,
)
from .rng import substream
from .simulator import DatasetSource, RunConfig, RunReport, run

ENV_OUT = "DEFER_SOC_OUT"


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Config loading


def _preset_text(name: str) -> str:
    try:
        return (resources.files("defer_soc.presets") / f"{name}.json").read_text("utf-8")
    except FileNotFoundError:
        raise ConfigError(f"unknown preset {name!r}") from None


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path_or_none, depth: int = 0) -> dict:
    if path_or_none is None:
        return {}
    if depth > 8:
        raise ConfigError("config 'extends' chain too deep (cycle?)")
    p = Path(path_or_none)
    if p.exists():
        text = p.read_text("utf-8")
    else:
        text = _preset_text(str(path_or_none))
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path_or_none}: invalid JSON ({e})") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path_or_none}: config must be a JSON object")
    parent = cfg.pop("extends", None)
    if parent is not None:
        base = load_config(parent, depth + 1)
        cfg = _deep_merge(base, cfg)
    return cfg


def _agent_config(d: dict) -> AgentConfig:
    d = dict(d)
    if "reward" in d:
        d["reward"] = RewardParams(**d["reward"])
    if "hidden" in d:
        d["hidden"] = tuple(d["hidden"])
    if d.get("feature_subset") is not None:
        d["feature_subset"] = tuple(d["feature_subset"])
    try:
        return AgentConfig(**d)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"agent config: {e}") from None


def _build_dataset(src: dict, seed: int) -> Dataset:
    kind = src.get("kind", "synthetic")
    if kind == "synthetic":
        props = {
            Priority.from_label(k): float(v)
            for k, v in src.get("proportions", {p.label: 0.2 for p in Priority}).items()
        }
        cfg = SynthConfig(
            category_proportions=props,
            centroid_separation=float(src.get("centroid_separation", 8.0)),
            noise_sigma=float(src.get("noise_sigma", 1.0)),
            feature_dim=int(src.get("feature_dim", 12)),
            seed=int(src.get("pool_seed", seed)),
        )
        return synth_generate(cfg, int(src.get("pool_size", 2000)))
    if kind == "csv":
        if "path" not in src or "label_column" not in src:
            raise ConfigError("csv source needs 'path' and 'label_column'")
        d = ingest.load_csv(
            src["path"],
            label_column=src["label_column"],
            label_kind=src.get("label_kind", "category"),
            feature_columns=src.get("feature_columns"),
            one_hot_columns=src.get("one_hot_columns", ()),
            drop_sparse_columns=bool(src.get("drop_sparse_columns", False)),
        )
        if src.get("pca_model"):
            model = PcaModel.from_json(Path(src["pca_model"]).read_text("utf-8"))
            d = transform_dataset(model, d)
        return d
    raise ConfigError(f"unknown source kind {kind!r}")


def _build_prioritizer(cfg: dict, pool: Dataset, seed: int):
    kind = cfg.get("kind", "oracle")
    if kind == "oracle":
        if "matrix" in cfg:
            matrix = ConfusionMatrix.from_rows(cfg["matrix"])
        elif "matrix_path" in cfg:
            matrix = ConfusionMatrix.from_json(Path(cfg["matrix_path"]).read_text("utf-8"))
        else:
            raise ConfigError("oracle prioritizer needs 'matrix' or 'matrix_path'")
        return matrix
    if kind == "nb":
        members = int(cfg.get("members", 4))
        return nb_bootstrap_ensemble(pool, members, substream(seed, "shuffle"))
    raise ConfigError(f"unknown prioritizer kind {kind!r}")


def build_run(cfg: dict, record_events: bool = False):
    """Turn a merged config dict into (RunConfig, source, prioritizer)."""
    analyst = cfg.get("analyst", {})
    try:
        run_cfg = RunConfig(
            mode=cfg.get("mode", "l2dhf"),
            steps=int(cfg.get("steps", 2016)),
            lam=float(cfg.get("lambda", 400.0)),
            seed=int(cfg.get("seed", 0)),
            agent=_agent_config(cfg.get("agent", {})),
            step_minutes=float(analyst.get("step_minutes", 60.0)),
            review_fraction=float(analyst.get("review_fraction", 0.8)),
            charge_by=analyst.get("charge_by", "analyst"),
            quantization_decimals=int(cfg.get("quantization_decimals", 3)),
            l2d_threshold=float(cfg.get("l2d_threshold", 0.75)),
            confidence_members=int(cfg.get("prioritizer", {}).get("members", 4)),
            exclude_normal_from_stage3=bool(cfg.get("exclude_normal_from_stage3", False)),
            record_events=record_events or bool(cfg.get("record_events", False)),
        )
    except ValueError as e:
        raise ConfigError(str(e)) from None
    pool = _build_dataset(cfg.get("source", {}), run_cfg.seed)
    prioritizer = _build_prioritizer(cfg.get("prioritizer", {}), pool, run_cfg.seed)
    return run_cfg, DatasetSource(pool), prioritizer


def resolve_outdir(flag_value, cfg: dict, run_cfg: RunConfig) -> Path:
    if flag_value:
        return Path(flag_value)
    if os.environ.get(ENV_OUT):
        return Path(os.environ[ENV_OUT])
    if cfg.get("out"):
        return Path(cfg["out"])
    return Path("runs") / f"{run_cfg.mode}-seed{run_cfg.seed}"


# ---------------------------------------------------------------------------
# Subcommands


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    for key in ("mode", "steps", "seed"):
        v = getattr(args, key)
        if v is not None:
            cfg[key] = v
    if args.lam is not None:
        cfg["lambda"] = args.lam

    run_cfg, source, prioritizer = build_run(cfg, record_events=args.events)
    outdir = resolve_outdir(args.out, cfg, run_cfg)

    if args.live:
        from .live_service import serve_run

        serve_run(run_cfg, source, prioritizer, outdir,
                  port=int(cfg.get("port", args.port)),
                  review_timeout_s=float(cfg.get("review_timeout_s", 300.0)))
        return 0

    report = run(run_cfg, source, prioritizer)
    write_artifacts(report, outdir)
    if args.json:
        print(json.dumps({"mode": report.mode, "out": str(outdir), "summary": report.summary}))
    else:
        s = report.summary
        print(f"mode={report.mode} steps={s['steps']} arrivals={s['arrivals']} "
              f"deferred={s['deferred']} unprocessed={s['unprocessed']} "
              f"wall={report.wall_s:.2f}s -> {outdir}")
        print(render_table(aggregate({report.mode: report.steps})))
    return 0


def write_artifacts(report: RunReport, outdir: Path):
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "run_report.json").write_text(report.to_json() + "\n", "utf-8")
    write_steps_csv(report.steps, str(outdir / "steps.csv"))
    world = getattr(report, "world", None)
    if world is not None:
        world.avar.dump_jsonl(str(outdir / "avar.jsonl"))
        if world.agent is not None:
            save_checkpoint(world.agent, str(outdir / "agent.ckpt"))
    if report.events:
        with open(outdir / "events.jsonl", "w", encoding="utf-8") as fh:
            for e in report.events:
                fh.write(json.dumps({
                    "alert_id": e.alert_id, "step": e.step,
                    "true": e.true_priority.label, "ai": e.ai_priority.label,
                    "final": e.final_priority.label if e.final_priority is not None else None,
                    "outcome": e.outcome, "reward": e.reward,
                }) + "\n")


def cmd_compare(args) -> int:
    if len(args.reports) < 2:
        print("compare needs at least two run_report.json paths", file=sys.stderr)
        return 1
    loaded = []
    for path in args.reports:
        p = Path(path)
        if p.is_dir():
            p = p / "run_report.json"
        loaded.append(RunReport.from_json(p.read_text("utf-8")))
    steps = {len(r.steps) for r in loaded}
    if len(steps) > 1:
        print(f"step counts differ across reports: {sorted(steps)}", file=sys.stderr)
        return 1
    lams = {r.config.get("lam") for r in loaded}
    if len(lams) > 1:
        print(f"warning: comparing runs with different lambda {sorted(lams)}; "
              "p-values use accuracy series only", file=sys.stderr)
    named = {}
    for r in loaded:
        name = r.mode
        k = 2
        while name in named:
            name = f"{r.mode}#{k}"
            k += 1
        named[name] = r.steps
    summary = aggregate(named)
    outdir = Path(args.out) if args.out else Path(".")
    outdir.mkdir(parents=True, exist_ok=True)
    dump_summary(summary, str(outdir / "compare.json"))
    print(render_table(summary))
    return 0


def cmd_calibrate(args) -> int:
    rng = substream(args.seed, "shuffle")
    if args.synth:
        dataset = synth_generate(SynthConfig(seed=args.seed), args.pool_size)
    elif args.data:
        dataset = ingest.load_csv(
            args.data,
            label_column=args.label_column or "label",
            label_kind=args.label_kind,
            drop_sparse_columns=args.drop_sparse,
        )
    else:
        print("calibrate needs --data PATH or --synth", file=sys.stderr)
        return 1

    if args.k > dataset.feature_dim:
        print(f"k={args.k} exceeds feature dimension {dataset.feature_dim}", file=sys.stderr)
        return 1

    train, val, test = split(dataset, (0.7, 0.2, 0.1), seed=args.seed)
    pca = fit_pca(train.features, k=args.k)
    train_t = transform_dataset(pca, train)
    test_t = transform_dataset(pca, test)
    model = nb_fit(train_t)
    preds = np.array([nb_predict(model, x).value for x in test_t.features])
    matrix = empirical_confusion(test_t.labels, preds)
    accuracy = float((preds == test_t.labels).mean()) if len(test_t) else None

    outdir = Path(args.out) if args.out else Path(".")
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "pca.json").write_text(pca.to_json() + "\n", "utf-8")
    (outdir / "nb.json").write_text(model.to_json() + "\n", "utf-8")
    (outdir / "confusion.json").write_text(matrix.to_json() + "\n", "utf-8")
    (outdir / "calibration.json").write_text(json.dumps({
        "rows": len(dataset),
        "dropped_rows": dataset.dropped_rows,
        "k": args.k,
        "explained_variance_ratio": pca.explained_variance_ratio.tolist(),
        "test_accuracy": accuracy,
        "splits": [len(train), len(val), len(test)],
    }, indent=2) + "\n", "utf-8")
    print(f"calibrated on {len(dataset)} rows -> {outdir} (test accuracy "
          f"{'-' if accuracy is None else f'{accuracy:.3f}'})")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="defer-soc",
                                     description="Learning-to-defer SOC simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a simulation run")
    p_run.add_argument("--config", help="JSON config path or preset name")
    p_run.add_argument("--mode", choices=("l2dhf", "l2d", "drlhf_only", "ai_only"))
    p_run.add_argument("--steps", type=int)
    p_run.add_argument("--lambda", dest="lam", type=float)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--out", help=f"output directory (or ${ENV_OUT})")
    p_run.add_argument("--json", action="store_true", help="machine-readable stdout")
    p_run.add_argument("--events", action="store_true", help="record per-alert outcomes")
    p_run.add_argument("--live", action="store_true", help="serve a live analyst session")
    p_run.add_argument("--port", type=int, default=8080)
    p_run.set_defaults(fn=cmd_run)

    p_cmp = sub.add_parser("compare", help="aggregate finished runs")
    p_cmp.add_argument("reports", nargs="+", help="run_report.json paths or run dirs")
    p_cmp.add_argument("--out")
    p_cmp.set_defaults(fn=cmd_compare)

    p_cal = sub.add_parser("calibrate", help="fit PCA + classifier, export confusion matrix")
    p_cal.add_argument("--data", help="labeled CSV")
    p_cal.add_argument("--synth", action="store_true", help="use a synthetic pool instead")
    p_cal.add_argument("--pool-size", type=int, default=5000)
    p_cal.add_argument("--label-column")
    p_cal.add_argument("--label-kind", choices=("category", "cvss_score"), default="category")
    p_cal.add_argument("--drop-sparse", action="store_true")
    p_cal.add_argument("--k", type=int, default=12)
    p_cal.add_argument("--seed", type=int, default=0)
    p_cal.add_argument("--out")
    p_cal.set_defaults(fn=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ingest.IngestError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # runtime failures map to a distinct exit code
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
