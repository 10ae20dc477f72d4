"""Consistency metrics against ground truth and the repeated-trial,
latent-sweep, and grouped-retraining experiments.

A ground-truth group is scored as matched at tolerance k when some
proposed group differs from it by at most k muscles, where muscles that
legitimately belong to two groups may sit in either. A0/A1/A2 are the
percentages of truth groups matched at tolerances 0/1/2.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import autoenc, relgraph
from .datastore import Dataset, normalize, select_channels, split_train_test, subsample
from .errors import ValidationError
from .grouping import GroupingConfig, GroupingResult, Mode, run
from .robotsim import RobotModel


@dataclass(frozen=True)
class GroundTruth:
    groups: tuple[frozenset[int], ...]  # wide sets: dual muscles appear in both
    dual_memberships: dict[int, tuple[int, int]]

    def __post_init__(self):
        for mid, pair in self.dual_memberships.items():
            for g in pair:
                if mid not in self.groups[g]:
                    raise ValidationError(
                        f"dual muscle {mid} missing from its group {g}"
                    )

    @property
    def universe(self) -> frozenset[int]:
        out: set[int] = set()
        for g in self.groups:
            out |= g
        return frozenset(out)

    def core(self, g: int) -> frozenset[int]:
        return frozenset(m for m in self.groups[g] if m not in self.dual_memberships)


def truth_from_robot(robot: RobotModel) -> GroundTruth:
    return GroundTruth(
        groups=tuple(robot.truth_groups),
        dual_memberships=dict(robot.dual_memberships),
    )


def mismatch(truth_group, proposed_group, dual_memberships) -> int:
    """Muscles the proposal got wrong for one truth group.

    With core = the truth group minus its dual-membership muscles and
    wide = the full truth group, the count is |core \\ P| + |P \\ wide|:
    missing core muscles plus foreign muscles. Absent dual muscles are
    exempt (they may sit in their other group).
    """
    wide = frozenset(truth_group)
    proposed = frozenset(proposed_group)
    core = frozenset(m for m in wide if m not in dual_memberships)
    return len(core - proposed) + len(proposed - wide)


@dataclass(frozen=True)
class ConsistencyReport:
    a0: float
    a1: float
    a2: float
    best_match: tuple[int, ...]  # proposed group index per truth group
    best_mismatch: tuple[int, ...]  # its mismatch count per truth group

    def as_dict(self) -> dict:
        return {
            "a0": self.a0,
            "a1": self.a1,
            "a2": self.a2,
            "best_match": list(self.best_match),
            "best_mismatch": list(self.best_mismatch),
        }


def consistency(proposed: GroupingResult, truth: GroundTruth,
                matching: str = "existence") -> ConsistencyReport:
    """Score a grouping result against the ground truth.

    ``existence`` matching lets every truth group independently claim its
    closest proposed group (two truth groups may share one); ``bijective``
    assigns truth to proposed groups one-to-one by minimum total mismatch.
    Latent (z) vertices are ignored.
    """
    if frozenset(proposed.x_labels) != truth.universe:
        raise ValidationError("proposed grouping covers a different muscle universe")
    prop_groups = [frozenset(g) for g in proposed.x_groups()]
    costs = np.array([
        [mismatch(tg, pg, truth.dual_memberships) for pg in prop_groups]
        for tg in truth.groups
    ])
    if matching == "existence":
        best_idx = costs.argmin(axis=1)
        best = costs.min(axis=1)
    elif matching == "bijective":
        from scipy.optimize import linear_sum_assignment

        n_t, n_p = costs.shape
        if n_p < n_t:
            pad = np.full((n_t, n_t - n_p), costs.max() + len(truth.universe) + 1)
            padded = np.hstack([costs, pad])
        else:
            padded = costs
        rows, cols = linear_sum_assignment(padded)
        best_idx = np.full(n_t, -1)
        best = np.full(n_t, len(truth.universe))
        for r, c in zip(rows, cols):
            if c < n_p:
                best_idx[r] = c
                best[r] = costs[r, c]
    else:
        raise ValidationError(f"unknown matching {matching!r}")
    n_truth = len(truth.groups)
    levels = [100.0 * float(np.sum(best <= k)) / n_truth for k in (0, 1, 2)]
    return ConsistencyReport(
        a0=levels[0], a1=levels[1], a2=levels[2],
        best_match=tuple(int(i) for i in best_idx),
        best_mismatch=tuple(int(b) for b in best),
    )


@dataclass
class TrialStats:
    """Raw per-trial metric values plus population mean/variance."""

    raw: dict[str, list[float]]

    @property
    def n_trials(self) -> int:
        return len(next(iter(self.raw.values())))

    def mean(self, metric: str) -> float:
        return float(np.mean(self.raw[metric]))

    def variance(self, metric: str) -> float:
        return float(np.var(self.raw[metric]))  # population variance

    def as_dict(self) -> dict:
        return {
            "n_trials": self.n_trials,
            "raw": self.raw,
            "mean": {m: self.mean(m) for m in self.raw},
            "variance": {m: self.variance(m) for m in self.raw},
        }


METRICS = ("a0", "a1", "a2")
ALL_MODES = (Mode.FUNC, Mode.SPAC, Mode.BOTH)


def _one_trial(w_matrix, distances, x_ids, truth, graph_cfg, grouping_cfg,
               modes, seed) -> dict[str, dict[str, float]]:
    """One noise realization of the graph, grouped once per mode."""
    graph = relgraph.build_graph(w_matrix, distances, x_ids, graph_cfg, seed=seed)
    out = {}
    for mode in modes:
        cfg = replace(grouping_cfg, mode=mode)
        result = run(graph, cfg, seed=seed)
        report = consistency(result, truth)
        out[Mode(mode).value] = {"a0": report.a0, "a1": report.a1, "a2": report.a2}
    return out


def run_trials(w, distances, x_ids, truth: GroundTruth, *,
               graph_cfg: relgraph.GraphBuildConfig = relgraph.GraphBuildConfig(),
               grouping_cfg: GroupingConfig = GroupingConfig(),
               trials: int = 10,
               modes=ALL_MODES,
               base_seed: int = 0,
               jobs: int = 1) -> dict[str, TrialStats]:
    """Repeat grouping with seeds base_seed..base_seed+trials-1 per mode.

    The trained functional matrix is fixed; each trial rebuilds the graph
    (fresh spatial-noise realization) and every mode reuses that same
    graph, so mode comparisons are controlled. Trials are independent and
    run in parallel processes when jobs > 1; results do not depend on jobs.
    """
    if trials < 1:
        raise ValidationError("need at least one trial")
    modes = [Mode(m) for m in modes]
    w_matrix = w.w if isinstance(w, autoenc.FunctionalMatrix) else np.asarray(w)
    args = [
        (w_matrix, distances, tuple(x_ids), truth, graph_cfg, grouping_cfg,
         tuple(modes), base_seed + t)
        for t in range(trials)
    ]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_trial = list(pool.map(_one_trial_star, args))
    else:
        per_trial = [_one_trial(*a) for a in args]
    raw = {m.value: {metric: [] for metric in METRICS} for m in modes}
    for trial in per_trial:
        for mode, values in trial.items():
            for metric in METRICS:
                raw[mode][metric].append(values[metric])
    return {m: TrialStats(raw=raw[m]) for m in raw}


def _one_trial_star(args):
    return _one_trial(*args)


def trials_table(stats_by_mode: dict[str, TrialStats]) -> str:
    """Plain-text mean/variance table, one row per mode."""
    lines = [f"{'mode':<10}" + "".join(f"{m.upper():>16}" for m in METRICS)]
    for mode, stats in stats_by_mode.items():
        cells = "".join(
            f"{stats.mean(m):>8.1f}+-{np.sqrt(stats.variance(m)):<6.1f}"
            for m in METRICS
        )
        lines.append(f"{mode:<10}{cells}")
    return "\n".join(lines)


def trials_to_csv(stats_by_mode: dict[str, TrialStats], path) -> None:
    with open(path, "w") as fh:
        fh.write("mode,metric,mean,variance," +
                 ",".join(f"trial{t}" for t in range(next(iter(stats_by_mode.values())).n_trials)) +
                 "\n")
        for mode, stats in stats_by_mode.items():
            for metric in METRICS:
                raw = ",".join(f"{v:.17g}" for v in stats.raw[metric])
                fh.write(f"{mode},{metric},{stats.mean(metric):.17g},{stats.variance(metric):.17g},{raw}\n")


def _one_sweep_cell(train_set, test_set, muscle_ids, truth, distances, nz,
                    trials, train_cfg, graph_cfg, grouping_cfg, modes,
                    hidden, base_seed):
    model = autoenc.init_model(len(muscle_ids), nz, hidden=hidden, seed=train_cfg.seed)
    best, _ = autoenc.train(model, train_set, test_set, train_cfg)
    w = autoenc.extract_functional_matrix(best, graph_cfg.fold_batchnorm)
    return nz, run_trials(
        w, distances, muscle_ids, truth,
        graph_cfg=graph_cfg, grouping_cfg=grouping_cfg,
        trials=trials, modes=modes, base_seed=base_seed,
    )


def _one_sweep_cell_star(args):
    return _one_sweep_cell(*args)


def sweep_nz(dataset: Dataset, truth: GroundTruth, distances, values, *,
             trials: int = 10,
             train_cfg: autoenc.TrainConfig = autoenc.TrainConfig(),
             graph_cfg: relgraph.GraphBuildConfig = relgraph.GraphBuildConfig(),
             grouping_cfg: GroupingConfig = GroupingConfig(),
             modes=(Mode.FUNC,),
             hidden: int = 300,
             train_fraction: float = 0.8,
             split_seed: int = 0,
             base_seed: int = 0,
             jobs: int = 1) -> dict[int, dict[str, TrialStats]]:
    """Train one autoencoder per latent size on a fixed split and rerun the
    trial experiment for each; keyed by latent size. Cells are independent
    and run in parallel processes when jobs > 1."""
    m = dataset.n_channels
    for nz in values:
        if not 1 <= nz < m:
            raise ValidationError(f"latent size {nz} must be in [1, {m})")
    if dataset.normalized:
        norm = dataset
    else:
        norm, _ = normalize(dataset)
    train_set, test_set = split_train_test(norm, train_fraction, split_seed)
    args = [
        (train_set, test_set, dataset.muscle_ids, truth, distances, nz,
         trials, train_cfg, graph_cfg, grouping_cfg, tuple(Mode(m_) for m_ in modes),
         hidden, base_seed)
        for nz in values
    ]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(_one_sweep_cell_star, args))
    else:
        cells = [_one_sweep_cell(*a) for a in args]
    return {nz: stats for nz, stats in cells}


def sweep_to_csv(table: dict[int, dict[str, TrialStats]], path) -> None:
    with open(path, "w") as fh:
        fh.write("nz,mode,metric,mean,variance\n")
        for nz, by_mode in table.items():
            for mode, stats in by_mode.items():
                for metric in METRICS:
                    fh.write(
                        f"{nz},{mode},{metric},{stats.mean(metric):.17g},{stats.variance(metric):.17g}\n"
                    )


def _ae_parameter_count(m: int, h: int, k: int) -> int:
    weights = 2 * h * (m + k)
    biases = 2 * h + k + m
    batchnorm = 2 * (2 * h + k)
    return weights + biases + batchnorm


def _group_hidden_widths(group_sizes, group_latents, params_full: int) -> list[int]:
    """Hidden width per group, proportional to group size, rounded by
    largest remainder so the total parameter count matches the full model."""
    coeff = [2 * (m + k) + 6 for m, k in zip(group_sizes, group_latents)]
    fixed = sum(m + 3 * k for m, k in zip(group_sizes, group_latents))
    budget = params_full - fixed
    t = budget / sum(m * c for m, c in zip(group_sizes, coeff))
    reals = [t * m for m in group_sizes]
    target_total = int(round(sum(reals)))
    floors = [max(1, int(np.floor(r))) for r in reals]
    remainder = target_total - sum(floors)
    fractions = [f - r for f, r in zip(floors, reals)]
    if remainder > 0:
        order = np.argsort(fractions)  # most-truncated first
    else:
        order = np.argsort(fractions)[::-1]  # least-truncated first
    widths = list(floors)
    for i in range(abs(remainder)):
        g = int(order[i % len(widths)])
        widths[g] = max(1, widths[g] + (1 if remainder > 0 else -1))
    return widths


@dataclass
class GroupedRetrainReport:
    group_sizes: list[int]
    group_latents: list[int]
    hidden_widths: list[int]
    params_full: int
    params_grouped: int
    full_report: autoenc.TrainReport
    group_reports: list[autoenc.TrainReport]
    full_best: dict = field(default_factory=dict)
    grouped_best: dict = field(default_factory=dict)

    @property
    def budget_error(self) -> float:
        return abs(self.params_grouped - self.params_full) / self.params_full

    def grouped_curves(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-epoch train/test curves averaged over groups, weighted by
        muscle count."""
        weights = np.array(self.group_sizes) / sum(self.group_sizes)
        train = np.zeros(len(self.full_report.train_loss))
        test = np.zeros_like(train)
        for wgt, rep in zip(weights, self.group_reports):
            train += wgt * np.array(rep.train_loss)
            test += wgt * np.array(rep.test_loss)
        return train, test

    def to_csv(self, path) -> None:
        grouped_train, grouped_test = self.grouped_curves()
        with open(path, "w") as fh:
            fh.write("epoch,full_train,full_test,grouped_train,grouped_test\n")
            for e in range(len(self.full_report.train_loss)):
                fh.write(
                    f"{e},{self.full_report.train_loss[e]:.17g},"
                    f"{self.full_report.test_loss[e]:.17g},"
                    f"{grouped_train[e]:.17g},{grouped_test[e]:.17g}\n"
                )


def grouped_retrain(dataset: Dataset, grouping: GroupingResult, *,
                    low_data_count: int = 1000,
                    train_cfg: autoenc.TrainConfig = autoenc.TrainConfig(),
                    hidden: int = 300,
                    train_fraction: float = 0.8,
                    seed: int = 0) -> GroupedRetrainReport:
    """Compare the one-big-model and per-group autoencoders on scarce data.

    Subsamples the raw dataset, trains the full model and one model per
    group (the group's muscles and its share of latent units), with hidden
    widths chosen so total parameter counts match within 2%. Per-group
    losses are averaged weighted by muscle count.
    """
    if dataset.normalized:
        raise ValidationError("grouped_retrain expects the raw dataset")
    groups = [g for g in grouping.groups]
    for g in groups:
        if len(g["x"]) < 2:
            raise ValidationError("every group needs at least 2 muscles")
        if len(g["z"]) < 1:
            raise ValidationError("every group needs at least 1 latent unit")
    n_latent_total = sum(len(g["z"]) for g in groups)
    m_total = dataset.n_channels

    small = subsample(dataset, low_data_count, seed)
    norm, _ = normalize(small)
    train_set, test_set = split_train_test(norm, train_fraction, seed)

    params_full = _ae_parameter_count(m_total, hidden, n_latent_total)
    group_sizes = [len(g["x"]) for g in groups]
    group_latents = [len(g["z"]) for g in groups]
    widths = _group_hidden_widths(group_sizes, group_latents, params_full)
    params_grouped = sum(
        _ae_parameter_count(m, h, k)
        for m, h, k in zip(group_sizes, widths, group_latents)
    )

    full_model = autoenc.init_model(m_total, n_latent_total, hidden=hidden, seed=train_cfg.seed)
    full_best, full_report = autoenc.train(full_model, train_set, test_set, train_cfg)

    group_reports = []
    for g, (size, width, latents) in zip(groups, zip(group_sizes, widths, group_latents)):
        g_train = select_channels(train_set, g["x"])
        g_test = select_channels(test_set, g["x"])
        model = autoenc.init_model(size, latents, hidden=width, seed=train_cfg.seed)
        _, rep = autoenc.train(model, g_train, g_test, train_cfg)
        group_reports.append(rep)

    report = GroupedRetrainReport(
        group_sizes=group_sizes,
        group_latents=group_latents,
        hidden_widths=widths,
        params_full=params_full,
        params_grouped=params_grouped,
        full_report=full_report,
        group_reports=group_reports,
    )

    fb = full_report.best_epoch
    report.full_best = {
        "epoch": fb,
        "train": full_report.train_loss[fb],
        "test": full_report.test_loss[fb],
        "gap": full_report.test_loss[fb] - full_report.train_loss[fb],
    }
    weights = np.array(group_sizes) / m_total
    g_train = g_test = g_gap = 0.0
    for wgt, rep in zip(weights, group_reports):
        b = rep.best_epoch
        g_train += wgt * rep.train_loss[b]
        g_test += wgt * rep.test_loss[b]
        g_gap += wgt * (rep.test_loss[b] - rep.train_loss[b])
    report.grouped_best = {"train": g_train, "test": g_test, "gap": g_gap}
    return report
