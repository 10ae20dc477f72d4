"""Command-line pipeline around the library.

Subcommands mirror the processing stages (synth, sample, normalize,
train-ae, build-graph, group, eval, trials, sweep-nz, retrain-split,
baseline-mst, export-dot) plus a `pipeline` command that chains them from
one JSON config. Every run writes a manifest JSON next to its outputs so
it can be replayed; report paths write a PNG figure alongside the CSV.

Exit codes: 0 success, 1 usage error, 2 data/validation error.

Seeds: flags win over the REDUNGROUP_SEED environment variable, which
wins over the config file. The pipeline expands its top-level seed into
per-stage seeds by adding a fixed stage index (synth +0, sample +1,
split +2, train +3, graph +4, group/trials +5, retrain +6), so any stage
can be rerun standalone with the same randomness.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, autoenc, datastore, evalharness, figures, grouping, relgraph, robotsim
from .errors import RedunGroupError, ValidationError

STAGE_INDEX = {
    "synth": 0,
    "sample": 1,
    "split": 2,
    "train": 3,
    "graph": 4,
    "group": 5,
    "retrain": 6,
}


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the documented contract is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def resolve_seed(flag_value: int | None, config_value: int | None = None) -> int:
    if flag_value is not None:
        return flag_value
    env = os.environ.get("REDUNGROUP_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ValidationError(f"REDUNGROUP_SEED must be an integer, got {env!r}")
    if config_value is not None:
        return config_value
    return 0


def _read_text(path) -> str:
    p = Path(path)
    if not p.exists():
        raise ValidationError(f"input file not found: {p}")
    return p.read_text()


def _read_json(path) -> dict:
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as e:
        raise ValidationError(f"{path}: not valid JSON ({e})") from None


def _write_manifest(command: str, out_dir, config: dict, seeds: dict, outputs, t0: float) -> Path:
    for out in outputs:
        if not Path(out).exists():
            raise RedunGroupError(f"declared output missing: {out}")
    manifest = {
        "command": command,
        "config": config,
        "seeds": seeds,
        "outputs": [str(o) for o in outputs],
        "version": __version__,
        "wall_clock_seconds": round(time.time() - t0, 3),
    }
    path = Path(out_dir) / f"{command.replace('-', '_')}_manifest.json"
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2))
    return path


def _load_robot(path) -> robotsim.RobotModel:
    return robotsim.robot_from_json(_read_text(path))


def _load_graph(path) -> relgraph.RelationalGraph:
    return relgraph.graph_from_json(_read_text(path))


def _synth_spec_from_dict(doc: dict, seed: int) -> robotsim.SynthSpec:
    known = {f for f in robotsim.SynthSpec.__dataclass_fields__}
    unknown = set(doc) - known
    if unknown:
        raise ValidationError(f"unknown robot spec fields: {sorted(unknown)}")
    doc = dict(doc)
    doc["seed"] = seed
    return robotsim.SynthSpec(**doc)


# --------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> int:
    t0 = time.time()
    seed = resolve_seed(args.seed)
    spec_doc = _read_json(args.spec) if args.spec else {}
    spec = _synth_spec_from_dict(spec_doc, seed)
    robot = robotsim.build_synthetic_robot(spec)
    out = Path(args.out)
    out.write_text(robotsim.robot_to_json(robot))
    print(f"robot: {robot.n_muscles} muscles, {robot.n_joints} joints, "
          f"{len(robot.truth_groups)} groups -> {out}")
    _write_manifest("synth", out.parent, {"spec": spec_doc}, {"seed": seed}, [out], t0)
    return 0


def cmd_sample(args) -> int:
    t0 = time.time()
    seed = resolve_seed(args.seed)
    robot = _load_robot(args.robot)
    dataset = robotsim.sample_random_postures(robot, args.samples, seed)
    out = Path(args.out)
    datastore.export_lengths_csv(dataset, out)
    print(f"sampled {dataset.n_rows} postures x {dataset.n_channels} muscles -> {out}")
    _write_manifest("sample", out.parent, {"robot": args.robot, "samples": args.samples},
                    {"seed": seed}, [out], t0)
    return 0


def cmd_normalize(args) -> int:
    t0 = time.time()
    dataset = datastore.import_lengths_csv(args.data)
    normalized, stats = datastore.normalize(dataset)
    out = Path(args.out)
    datastore.export_lengths_csv(normalized, out)
    stats_path = Path(args.stats) if args.stats else out.with_suffix(".stats.json")
    stats_path.write_text(stats.to_json())
    n_const = int(stats.constant.sum())
    print(f"normalized {dataset.n_rows} rows ({n_const} constant channels) -> {out}")
    _write_manifest("normalize", out.parent, {"data": args.data}, {}, [out, stats_path], t0)
    return 0


def cmd_train_ae(args) -> int:
    t0 = time.time()
    seed = resolve_seed(args.seed)
    dataset = datastore.import_lengths_csv(args.data)
    if not args.assume_normalized:
        dataset, _ = datastore.normalize(dataset)
    else:
        dataset = replace(dataset, normalized=True)
    train_set, test_set = datastore.split_train_test(dataset, args.train_fraction, seed)
    cfg = autoenc.TrainConfig(
        batch_size=args.batch_size, epochs=args.epochs,
        learning_rate=args.learning_rate, seed=seed,
    )
    model = autoenc.init_model(dataset.n_channels, args.nz, hidden=args.hidden, seed=seed)
    best, report = autoenc.train(model, train_set, test_set, cfg)
    out = Path(args.out)
    metadata = {
        "muscle_ids": list(dataset.muscle_ids),
        "best_epoch": report.best_epoch,
        "best_test_loss": min(report.test_loss),
        "train_rows": train_set.n_rows,
        "test_rows": test_set.n_rows,
    }
    out.write_text(autoenc.model_to_json(best, metadata))
    outputs = [out]
    if args.report:
        report_path = Path(args.report)
        report.to_csv(report_path)
        figure = report_path.with_suffix(".png")
        figures.plot_train_report(report, figure)
        outputs += [report_path, figure]
    print(f"trained {args.epochs} epochs; best test loss "
          f"{min(report.test_loss):.6g} at epoch {report.best_epoch} -> {out}")
    _write_manifest("train-ae", out.parent,
                    {"data": args.data, "nz": args.nz, "hidden": args.hidden,
                     "batch_size": args.batch_size, "epochs": args.epochs,
                     "learning_rate": args.learning_rate,
                     "train_fraction": args.train_fraction},
                    {"seed": seed}, outputs, t0)
    return 0


def _distances_for(robot, distances_path, expected_m):
    if distances_path:
        return datastore.import_distance_matrix(distances_path, expected_size=expected_m)
    if robot is None:
        raise ValidationError("need --robot or --distances for spatial edges")
    return robotsim.spatial_distance_matrix(robot)


def cmd_build_graph(args) -> int:
    t0 = time.time()
    seed = resolve_seed(args.seed)
    model = autoenc.model_from_json(_read_text(args.model))
    w = autoenc.extract_functional_matrix(model, args.fold_batchnorm)
    robot = _load_robot(args.robot) if args.robot else None
    distances = _distances_for(robot, args.distances, model.n_inputs)
    x_ids = robot.muscle_ids if robot else tuple(range(model.n_inputs))
    cfg = relgraph.GraphBuildConfig(
        noise_std=args.noise_std, abs_functional=not args.raw_functional,
        fold_batchnorm=args.fold_batchnorm, seed=seed,
    )
    graph = relgraph.build_graph(w, distances, x_ids, cfg)
    out = Path(args.out)
    out.write_text(relgraph.graph_to_json(graph))
    print(f"graph: {graph.n_x} x-vertices, {graph.n_z} z-vertices, "
          f"beta={graph.beta:.6g} -> {out}")
    _write_manifest("build-graph", out.parent,
                    {"model": args.model, "robot": args.robot,
                     "distances": args.distances, "noise_std": args.noise_std},
                    {"seed": seed}, [out], t0)
    return 0


def _grouping_config(args, seed) -> grouping.GroupingConfig:
    return grouping.GroupingConfig(
        n_groups=args.ngroups, min_x_per_group=args.min_x, min_z_per_group=args.min_z,
        n_iterations=args.iterations, alpha=args.alpha, mode=args.mode, seed=seed,
    )


def cmd_group(args) -> int:
    t0 = time.time()
    seed = resolve_seed(args.seed)
    graph = _load_graph(args.graph)
    cfg = _grouping_config(args, seed)
    result = grouping.run(graph, cfg)
    out = Path(args.out)
    out.write_text(result.to_json())
    counts = result.constraint_report["x_counts"]
    print(f"grouped {graph.n_x}+{graph.n_z} vertices into {args.ngroups} groups "
          f"(x counts {counts}); local optimality {result.local_optimality:.2f} -> {out}")
    _write_manifest("group", out.parent,
                    {"graph": args.graph, "mode": args.mode, "ngroups": args.ngroups,
                     "iterations": args.iterations, "alpha": args.alpha},
                    {"seed": seed}, [out], t0)
    return 0


def cmd_baseline_mst(args) -> int:
    t0 = time.time()
    graph = _load_graph(args.graph)
    result = grouping.baseline_kruskal_merge(graph, args.ngroups)
    out = Path(args.out)
    out.write_text(result.to_json())
    frac = grouping.max_group_fraction(result)
    print(f"merge baseline: {args.ngroups} groups, max group holds "
          f"{frac:.0%} of x-vertices -> {out}")
    _write_manifest("baseline-mst", out.parent,
                    {"graph": args.graph, "ngroups": args.ngroups}, {}, [out], t0)
    return 0


def cmd_eval(args) -> int:
    t0 = time.time()
    result = grouping.GroupingResult.from_json(_read_text(args.result))
    robot = _load_robot(args.robot)
    truth = evalharness.truth_from_robot(robot)
    report = evalharness.consistency(result, truth, matching=args.matching)
    doc = report.as_dict()
    print(f"A0={report.a0:.1f}%  A1={report.a1:.1f}%  A2={report.a2:.1f}%")
    outputs = []
    if args.out:
        out = Path(args.out)
        out.write_text(json.dumps(doc, sort_keys=True, indent=2))
        outputs.append(out)
        _write_manifest("eval", out.parent,
                        {"result": args.result, "robot": args.robot,
                         "matching": args.matching}, {}, outputs, t0)
    return 0


def cmd_trials(args) -> int:
    t0 = time.time()
    seed = resolve_seed(args.seed)
    model = autoenc.model_from_json(_read_text(args.model))
    robot = _load_robot(args.robot)
    truth = evalharness.truth_from_robot(robot)
    w = autoenc.extract_functional_matrix(model, args.fold_batchnorm)
    distances = _distances_for(robot, args.distances, model.n_inputs)
    graph_cfg = relgraph.GraphBuildConfig(
        noise_std=args.noise_std, abs_functional=not args.raw_functional,
        fold_batchnorm=args.fold_batchnorm, seed=seed,
    )
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    stats = evalharness.run_trials(
        w, distances, robot.muscle_ids, truth,
        graph_cfg=graph_cfg, grouping_cfg=_grouping_config(args, seed),
        trials=args.trials, modes=modes, base_seed=seed, jobs=args.jobs,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "trials_report.csv"
    evalharness.trials_to_csv(stats, csv_path)
    json_path = out_dir / "trials_report.json"
    json_path.write_text(json.dumps(
        {mode: s.as_dict() for mode, s in stats.items()}, sort_keys=True, indent=2))
    fig_path = figures.plot_consistency(stats, out_dir / "consistency.png")
    print(evalharness.trials_table(stats))
    _write_manifest("trials", out_dir,
                    {"model": args.model, "robot": args.robot, "trials": args.trials,
                     "modes": modes, "noise_std": args.noise_std,
                     "ngroups": args.ngroups, "jobs": args.jobs},
                    {"seed": seed}, [csv_path, json_path, fig_path], t0)
    return 0


def cmd_sweep_nz(args) -> int:
    t0 = time.time()
    seed = resolve_seed(args.seed)
    dataset = datastore.import_lengths_csv(args.data)
    robot = _load_robot(args.robot)
    truth = evalharness.truth_from_robot(robot)
    distances = _distances_for(robot, args.distances, dataset.n_channels)
    values = [int(v) for v in args.values.split(",")]
    train_cfg = autoenc.TrainConfig(
        batch_size=args.batch_size, epochs=args.epochs,
        learning_rate=args.learning_rate, seed=seed + STAGE_INDEX["train"],
    )
    table = evalharness.sweep_nz(
        dataset, truth, distances, values,
        trials=args.trials, train_cfg=train_cfg,
        graph_cfg=relgraph.GraphBuildConfig(noise_std=args.noise_std, seed=seed),
        grouping_cfg=_grouping_config(args, seed),
        modes=[m.strip() for m in args.modes.split(",") if m.strip()],
        hidden=args.hidden, train_fraction=args.train_fraction,
        split_seed=seed + STAGE_INDEX["split"], base_seed=seed, jobs=args.jobs,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "nz_sweep.csv"
    evalharness.sweep_to_csv(table, csv_path)
    fig_path = figures.plot_nz_sweep(table, out_dir / "nz_sweep.png")
    for nz in values:
        for mode, s in table[nz].items():
            print(f"nz={nz} {mode}: " + "  ".join(
                f"{m.upper()}={s.mean(m):.1f}" for m in evalharness.METRICS))
    _write_manifest("sweep-nz", out_dir,
                    {"data": args.data, "robot": args.robot, "values": values,
                     "trials": args.trials, "epochs": args.epochs, "jobs": args.jobs},
                    {"seed": seed}, [csv_path, fig_path], t0)
    return 0


def cmd_retrain_split(args) -> int:
    t0 = time.time()
    seed = resolve_seed(args.seed)
    dataset = datastore.import_lengths_csv(args.data)
    result = grouping.GroupingResult.from_json(_read_text(args.result))
    train_cfg = autoenc.TrainConfig(
        batch_size=args.batch_size, epochs=args.epochs,
        learning_rate=args.learning_rate, seed=seed + STAGE_INDEX["train"],
    )
    report = evalharness.grouped_retrain(
        dataset, result, low_data_count=args.count, train_cfg=train_cfg,
        hidden=args.hidden, train_fraction=args.train_fraction,
        seed=seed + STAGE_INDEX["retrain"],
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "retrain_losses.csv"
    report.to_csv(csv_path)
    fig_path = figures.plot_loss_curves(report, out_dir / "loss_curves.png")
    summary = {
        "params_full": report.params_full,
        "params_grouped": report.params_grouped,
        "budget_error": report.budget_error,
        "hidden_widths": report.hidden_widths,
        "full_best": report.full_best,
        "grouped_best": report.grouped_best,
    }
    json_path = out_dir / "retrain_summary.json"
    json_path.write_text(json.dumps(summary, sort_keys=True, indent=2))
    print(f"parameter budget: full={report.params_full} grouped={report.params_grouped} "
          f"(error {report.budget_error:.2%})")
    print(f"full    best: train={report.full_best['train']:.5f} "
          f"test={report.full_best['test']:.5f} gap={report.full_best['gap']:.5f}")
    print(f"grouped best: train={report.grouped_best['train']:.5f} "
          f"test={report.grouped_best['test']:.5f} gap={report.grouped_best['gap']:.5f}")
    _write_manifest("retrain-split", out_dir,
                    {"data": args.data, "result": args.result, "count": args.count,
                     "epochs": args.epochs, "hidden": args.hidden},
                    {"seed": seed}, [csv_path, fig_path, json_path], t0)
    return 0


def cmd_export_dot(args) -> int:
    t0 = time.time()
    graph = _load_graph(args.graph)
    labels = None
    if args.labels:
        result = grouping.GroupingResult.from_json(_read_text(args.labels))
        x_pos = {mid: i for i, mid in enumerate(graph.x_ids)}
        z_pos = {zid: i for i, zid in enumerate(graph.z_ids)}
        labels = {
            "x": {x_pos[mid]: g for mid, g in result.x_labels.items()},
            "z": {z_pos[zid]: g for zid, g in result.z_labels.items()},
        }
    out = Path(args.out)
    out.write_text(relgraph.graph_to_dot(graph, labels, args.threshold))
    print(f"dot graph -> {out}")
    _write_manifest("export-dot", out.parent,
                    {"graph": args.graph, "labels": args.labels,
                     "threshold": args.threshold}, {}, [out], t0)
    return 0


# --------------------------------------------------------------------------
# pipeline

DEFAULT_CONFIG = {
    "seed": 0,
    "robot": {},
    "samples": 100000,
    "train_fraction": 0.8,
    "nz": 12,
    "hidden": 300,
    "train": {"batch_size": 100, "epochs": 300, "learning_rate": 1e-3},
    "graph": {"noise_std": 0.1, "abs_functional": True, "fold_batchnorm": False},
    "grouping": {"n_groups": 12, "min_x_per_group": 2, "min_z_per_group": 1,
                 "n_iterations": 30000, "alpha": 10.0},
    "trials": 10,
    "modes": ["func", "spac", "both"],
    "jobs": 1,
}


def _merged_config(path, overrides: dict) -> dict:
    config = json.loads(json.dumps(DEFAULT_CONFIG))  # deep copy
    if path:
        user = _read_json(path)
        unknown = set(user) - set(config)
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        for key, value in user.items():
            if isinstance(config.get(key), dict) and isinstance(value, dict):
                config[key].update(value)
            else:
                config[key] = value
    for key, value in overrides.items():
        if value is not None:
            config[key] = value
    return config


def cmd_pipeline(args) -> int:
    t0 = time.time()
    config = _merged_config(args.config, {
        "samples": args.samples, "trials": args.trials, "jobs": args.jobs,
    })
    seed = resolve_seed(args.seed, config.get("seed"))
    config["seed"] = seed
    if args.epochs is not None:
        config["train"]["epochs"] = args.epochs
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    spec = _synth_spec_from_dict(config["robot"], seed + STAGE_INDEX["synth"])
    robot = robotsim.build_synthetic_robot(spec)
    robot_path = out_dir / "robot.json"
    robot_path.write_text(robotsim.robot_to_json(robot))

    dataset = robotsim.sample_random_postures(
        robot, config["samples"], seed + STAGE_INDEX["sample"])
    data_path = out_dir / "dataset.csv"
    datastore.export_lengths_csv(dataset, data_path)

    normalized, stats = datastore.normalize(dataset)
    norm_path = out_dir / "normalized.csv"
    datastore.export_lengths_csv(normalized, norm_path)
    stats_path = out_dir / "normalized.stats.json"
    stats_path.write_text(stats.to_json())

    train_set, test_set = datastore.split_train_test(
        normalized, config["train_fraction"], seed + STAGE_INDEX["split"])
    train_cfg = autoenc.TrainConfig(seed=seed + STAGE_INDEX["train"], **config["train"])
    model = autoenc.init_model(dataset.n_channels, config["nz"],
                               hidden=config["hidden"], seed=seed + STAGE_INDEX["train"])
    best, train_report = autoenc.train(model, train_set, test_set, train_cfg)
    model_path = out_dir / "model.json"
    model_path.write_text(autoenc.model_to_json(best, {
        "muscle_ids": list(dataset.muscle_ids),
        "best_epoch": train_report.best_epoch,
        "best_test_loss": min(train_report.test_loss),
    }))
    report_path = out_dir / "train_report.csv"
    train_report.to_csv(report_path)

    w = autoenc.extract_functional_matrix(best, config["graph"]["fold_batchnorm"])
    distances = robotsim.spatial_distance_matrix(robot)
    graph_cfg = relgraph.GraphBuildConfig(seed=seed + STAGE_INDEX["graph"], **config["graph"])
    graph = relgraph.build_graph(w, distances, robot.muscle_ids, graph_cfg)
    graph_path = out_dir / "graph.json"
    graph_path.write_text(relgraph.graph_to_json(graph))

    truth = evalharness.truth_from_robot(robot)
    grouping_cfg = grouping.GroupingConfig(
        seed=seed + STAGE_INDEX["group"], **config["grouping"])
    stats_by_mode = evalharness.run_trials(
        w, distances, robot.muscle_ids, truth,
        graph_cfg=graph_cfg, grouping_cfg=grouping_cfg,
        trials=config["trials"], modes=config["modes"],
        base_seed=seed + STAGE_INDEX["group"], jobs=config["jobs"],
    )
    trials_csv = out_dir / "trials_report.csv"
    evalharness.trials_to_csv(stats_by_mode, trials_csv)
    fig_path = figures.plot_consistency(stats_by_mode, out_dir / "consistency.png")

    result = grouping.run(graph, grouping_cfg)
    result_path = out_dir / "result.json"
    result_path.write_text(result.to_json())
    eval_report = evalharness.consistency(result, truth)

    pipeline_result = {
        "config": config,
        "trials": {mode: s.as_dict() for mode, s in stats_by_mode.items()},
        "single_run_eval": eval_report.as_dict(),
        "best_test_loss": min(train_report.test_loss),
    }
    final_path = out_dir / "pipeline_result.json"
    final_path.write_text(json.dumps(pipeline_result, sort_keys=True, indent=2))

    print(evalharness.trials_table(stats_by_mode))
    outputs = [robot_path, data_path, norm_path, stats_path, model_path, report_path,
               graph_path, trials_csv, fig_path, result_path, final_path]
    _write_manifest("pipeline", out_dir, config, {
        "seed": seed,
        "stages": {name: seed + idx for name, idx in STAGE_INDEX.items()},
    }, outputs, t0)
    return 0


# --------------------------------------------------------------------------
# parser wiring


def _add_grouping_flags(p, default_groups=12):
    p.add_argument("--mode", choices=["func", "spac", "both"], default="both",
                   help="edge families used in the evaluation")
    p.add_argument("--ngroups", type=int, default=default_groups, help="number of groups")
    p.add_argument("--min-x", type=int, default=2, help="minimum x-vertices per group")
    p.add_argument("--min-z", type=int, default=1, help="minimum z-vertices per group")
    p.add_argument("--iterations", type=int, default=30000, help="effective move count")
    p.add_argument("--alpha", type=float, default=10.0, help="spatial term weight")


def _add_train_flags(p):
    p.add_argument("--batch-size", type=int, default=100)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--hidden", type=int, default=300, help="hidden layer width")
    p.add_argument("--train-fraction", type=float, default=0.8)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="redungroup",
                     description="automatic grouping of redundant channels")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[], help="generate a synthetic robot")
    p.add_argument("--spec", help="JSON file with robot spec fields")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output robot JSON")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("sample", help="sample muscle lengths at random postures")
    p.add_argument("--robot", required=True)
    p.add_argument("-n", "--samples", type=int, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output dataset CSV")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("normalize", help="z-score a dataset per channel")
    p.add_argument("--data", required=True, help="input dataset CSV")
    p.add_argument("--out", required=True, help="output normalized CSV")
    p.add_argument("--stats", help="output stats JSON (default: <out>.stats.json)")
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("train-ae", help="train the autoencoder")
    p.add_argument("--data", required=True, help="dataset CSV (normalized unless raw)")
    p.add_argument("--assume-normalized", action="store_true",
                   help="treat the input as already normalized")
    p.add_argument("--nz", type=int, required=True, help="latent size")
    _add_train_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output model JSON")
    p.add_argument("--report", help="optional per-epoch loss CSV")
    p.set_defaults(func=cmd_train_ae)

    p = sub.add_parser("build-graph", help="assemble the relational graph")
    p.add_argument("--model", required=True, help="trained model JSON")
    p.add_argument("--robot", help="robot JSON for spatial distances and ids")
    p.add_argument("--distances", help="distance matrix CSV instead of robot geometry")
    p.add_argument("--noise-std", type=float, default=0.1,
                   help="distance noise standard deviation, meters")
    p.add_argument("--raw-functional", action="store_true",
                   help="keep signed weights instead of absolute values")
    p.add_argument("--fold-batchnorm", action="store_true")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output graph JSON")
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("group", help="run the randomized grouping")
    p.add_argument("--graph", required=True)
    _add_grouping_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output result JSON")
    p.set_defaults(func=cmd_group)

    p = sub.add_parser("baseline-mst", help="descending-weight merge baseline")
    p.add_argument("--graph", required=True)
    p.add_argument("--ngroups", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_baseline_mst)

    p = sub.add_parser("eval", help="score a grouping against ground truth")
    p.add_argument("--result", required=True, help="grouping result JSON")
    p.add_argument("--robot", required=True, help="robot JSON carrying truth groups")
    p.add_argument("--matching", choices=["existence", "bijective"], default="existence")
    p.add_argument("--out", help="optional report JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("trials", help="repeated grouping trials per mode")
    p.add_argument("--model", required=True)
    p.add_argument("--robot", required=True)
    p.add_argument("--distances", help="distance matrix CSV instead of robot geometry")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--modes", default="func,spac,both")
    p.add_argument("--noise-std", type=float, default=0.1)
    p.add_argument("--raw-functional", action="store_true")
    p.add_argument("--fold-batchnorm", action="store_true")
    _add_grouping_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, default=1, help="parallel trial processes")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_trials)

    p = sub.add_parser("sweep-nz", help="consistency across latent sizes")
    p.add_argument("--data", required=True, help="raw dataset CSV")
    p.add_argument("--robot", required=True)
    p.add_argument("--distances")
    p.add_argument("--values", required=True, help="comma-separated latent sizes")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--modes", default="func")
    p.add_argument("--noise-std", type=float, default=0.1)
    _add_train_flags(p)
    _add_grouping_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, default=1, help="parallel sweep cells")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_sweep_nz)

    p = sub.add_parser("retrain-split", help="full vs per-group training comparison")
    p.add_argument("--data", required=True, help="raw dataset CSV")
    p.add_argument("--result", required=True, help="grouping result JSON")
    p.add_argument("--count", type=int, default=1000, help="subsample size")
    _add_train_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_retrain_split)

    p = sub.add_parser("export-dot", help="write DOT with optional group colors")
    p.add_argument("--graph", required=True)
    p.add_argument("--labels", help="grouping result JSON for colors")
    p.add_argument("--threshold", type=float, default=0.0,
                   help="hide edges with |weight| below this")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_dot)

    p = sub.add_parser("pipeline", help="run synth through eval from one config")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except RedunGroupError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError, KeyError) as e:
        print(f"error: {e!r}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
