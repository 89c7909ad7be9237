"""Monte Carlo studies over estimator x design x intensity grids.

Each replicate draws a fresh two-stage sample, refits the working models on
that sample's field plots, evaluates the requested estimators, and records
point estimate, standard error, and flags.  Replicate r of design d uses the
RNG stream ``SeedSequence(master_seed, spawn_key=(d, r))``, so any replicate
is reproducible in isolation and results are independent of worker count and
execution order.
"""

from __future__ import annotations

import multiprocessing
from dataclasses import dataclass

import numpy as np

from . import estimators as est
from .design import DesignConfig, draw
from .errors import SimulationError, StripSurveyError
from .frame import PopulationFrame, TruthValues, enumerate_truth
from .models import fit_working_models, make_predictions

ALL_ESTIMATORS = tuple(est.ESTIMATOR_TARGETS)


@dataclass(frozen=True)
class SimConfig:
    """One study: replicate count, design grid, estimator set, CI quantile."""

    replicates: int
    designs: tuple[DesignConfig, ...]
    estimators: tuple[str, ...] = ALL_ESTIMATORS
    ci_z: float = 1.96
    master_seed: int = 0

    def __post_init__(self):
        if self.replicates < 2:
            raise SimulationError("need at least 2 replicates")
        if self.ci_z <= 0:
            raise SimulationError("ci_z must be positive")
        if not self.designs:
            raise SimulationError("no designs configured")
        unknown = [name for name in self.estimators if name not in est.ESTIMATOR_TARGETS]
        if unknown:
            raise SimulationError(f"unknown estimators: {unknown}")
        object.__setattr__(self, "designs", tuple(self.designs))
        object.__setattr__(self, "estimators", tuple(self.estimators))


@dataclass(frozen=True)
class ReplicateRecord:
    """One estimator evaluation on one replicate."""

    design_index: int
    replicate: int
    estimator: str
    value: float
    se: float
    flags: str


@dataclass(frozen=True)
class SimulationSummary:
    """Sampling-distribution metrics for one (estimator, design) pair.

    ``coverage`` is the share of usable replicates whose symmetric
    z-interval contains the truth; replicates with an undefined SE (negative
    variance or estimator failure) are excluded from SE statistics and
    coverage but counted in ``n_flagged``.
    """

    estimator: str
    label: str
    target: str
    design_mode: str
    m: int
    intensity: float
    truth: float
    mean: float
    sd: float
    bias_pct: float
    se_mean: float
    se_sd: float
    se_bias_pct: float
    coverage: float
    n_used: int
    n_flagged: int
    replicates: int


@dataclass(frozen=True)
class SimulationResult:
    summaries: tuple[SimulationSummary, ...]
    records: tuple[ReplicateRecord, ...]


def _evaluate_replicate(
    frame: PopulationFrame,
    design: DesignConfig,
    names: tuple[str, ...],
    design_index: int,
    replicate: int,
    master_seed: int,
) -> list[ReplicateRecord]:
    rng = np.random.default_rng(
        np.random.SeedSequence(master_seed, spawn_key=(design_index, replicate))
    )
    records = []
    try:
        sample = draw(frame, design, rng)
        plot_cells = sample.all_plot_cells()
        heights = frame.lidar_height[plot_cells]
        y = frame.biomass_density[plot_cells]
        a = frame.domain_proportion[plot_cells]
        models = fit_working_models(heights, y, a)
        preds = make_predictions(models, frame, sample)
        agg = est.aggregate_strips(sample, preds)
        plot_strata = frame.stratum_id[plot_cells]
    except StripSurveyError as exc:
        reason = f"replicate_failed:{type(exc).__name__}"
        return [
            ReplicateRecord(design_index, replicate, name, float("nan"), float("nan"), reason)
            for name in names
        ]

    for name in names:
        try:
            if name == "srs_ps_total":
                e = est.srs_ps_total(plot_strata, y, frame.W_h, frame.A_T)
            elif name == "srs_ps_area":
                e = est.srs_ps_area(plot_strata, a, frame.W_h, frame.A_T)
            elif name == "srs_ps_density":
                e = est.srs_ps_density(plot_strata, y, a, frame.W_h)
            elif name == "ratio_total":
                e = est.ratio_total(sample, preds, agg)
            elif name == "ratio_total_ps":
                e = est.ratio_total_ps(sample, preds, frame.N_h, agg)
            elif name == "ratio_area":
                e = est.ratio_area(sample, preds, agg)
            elif name == "ratio_area_ps":
                e = est.ratio_area_ps(sample, preds, frame.N_h, agg)
            elif name == "ror_density":
                e = est.ror_density(sample, preds, agg)
            elif name == "ror_density_ps":
                e = est.ror_density_ps(sample, preds, frame.N_h, agg)
            else:
                raise SimulationError(f"unknown estimator {name}")
        except StripSurveyError as exc:
            records.append(
                ReplicateRecord(
                    design_index,
                    replicate,
                    name,
                    float("nan"),
                    float("nan"),
                    f"estimator_failed:{type(exc).__name__}",
                )
            )
            continue
        records.append(
            ReplicateRecord(
                design_index, replicate, name, e.value, e.se, ";".join(sorted(e.flags))
            )
        )
    return records


_WORKER: dict = {}


def _init_worker(frame, designs, names, master_seed):
    _WORKER.update(frame=frame, designs=designs, names=names, master_seed=master_seed)


def _run_task(task: tuple[int, int]) -> list[ReplicateRecord]:
    d, r = task
    return _evaluate_replicate(
        _WORKER["frame"], _WORKER["designs"][d], _WORKER["names"], d, r, _WORKER["master_seed"]
    )


def summarize(
    records: tuple[ReplicateRecord, ...],
    config: SimConfig,
    truth: TruthValues,
) -> tuple[SimulationSummary, ...]:
    """Reduce per-replicate records to the per-(estimator, design) metrics.

    Pure function of its inputs, so a persisted replicate log reproduces the
    summary exactly.
    """
    by_key: dict[tuple[int, str], list[ReplicateRecord]] = {}
    for rec in records:
        by_key.setdefault((rec.design_index, rec.estimator), []).append(rec)
    summaries = []
    for d, design in enumerate(config.designs):
        for name in config.estimators:
            rows = sorted(by_key.get((d, name), []), key=lambda r: r.replicate)
            if len(rows) != config.replicates:
                raise SimulationError(
                    f"records for ({design.mode}, {name}) cover {len(rows)} replicates, "
                    f"expected {config.replicates}"
                )
            values = np.array([r.value for r in rows])
            ses = np.array([r.se for r in rows])
            target = est.ESTIMATOR_TARGETS[name]
            true_value = truth.for_target(target)
            has_value = np.isfinite(values)
            usable = np.isfinite(ses)
            if not has_value.any() or not usable.any():
                raise SimulationError(
                    f"every replicate failed for ({design.mode}, {name})"
                )
            mean = float(values[has_value].mean())
            sd = float(values[has_value].std(ddof=1))
            se_mean = float(ses[usable].mean())
            se_bias = 100.0 * (se_mean - sd) / sd if sd > 0 else float("nan")
            covered = (
                np.abs(values[usable] - true_value) <= config.ci_z * ses[usable]
            )
            summaries.append(
                SimulationSummary(
                    estimator=name,
                    label=est.ESTIMATOR_LABELS[name],
                    target=target,
                    design_mode=design.mode,
                    m=design.m,
                    intensity=design.plot_intensity,
                    truth=true_value,
                    mean=mean,
                    sd=sd,
                    bias_pct=100.0 * (mean - true_value) / true_value,
                    se_mean=se_mean,
                    se_sd=float(ses[usable].std(ddof=1)) if usable.sum() > 1 else float("nan"),
                    se_bias_pct=se_bias,
                    coverage=float(covered.mean()),
                    n_used=int(usable.sum()),
                    n_flagged=int(config.replicates - usable.sum()),
                    replicates=config.replicates,
                )
            )
    return tuple(summaries)


def run(
    frame: PopulationFrame,
    config: SimConfig,
    jobs: int = 1,
    truth: TruthValues | None = None,
) -> SimulationResult:
    """Run the full study.  Output is identical for any ``jobs`` value.

    ``truth``, when given, must equal the enumerated population truth; it
    exists so callers can assert the frame is the one they think it is.
    """
    enumerated = enumerate_truth(frame)
    if truth is not None:
        for attr in ("total_mg", "area_ha", "density_mg_per_ha"):
            want, have = getattr(truth, attr), getattr(enumerated, attr)
            if abs(want - have) > 1e-9 * max(1.0, abs(have)):
                raise SimulationError(
                    f"declared truth {attr}={want} does not match the frame's {have}"
                )
    tasks = [(d, r) for d in range(len(config.designs)) for r in range(config.replicates)]
    if jobs <= 1:
        _init_worker(frame, config.designs, config.estimators, config.master_seed)
        chunks = [_run_task(t) for t in tasks]
    else:
        with multiprocessing.get_context("fork").Pool(
            processes=jobs,
            initializer=_init_worker,
            initargs=(frame, config.designs, config.estimators, config.master_seed),
        ) as pool:
            chunks = pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (jobs * 8)))
    records = tuple(
        rec
        for chunk in sorted(chunks, key=lambda c: (c[0].design_index, c[0].replicate))
        for rec in chunk
    )
    return SimulationResult(
        summaries=summarize(records, config, enumerated), records=records
    )


# ---------------------------------------------------------------------------
# Efficiency comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EfficiencyRow:
    """SD ratio of an estimator to the SRS,PS baseline and the implied
    multiplier on field-plot count needed to match its precision under the
    baseline design."""

    design_mode: str
    m: int
    intensity: float
    target: str
    estimator: str
    baseline: str
    sd_ratio: float
    plot_multiplier: float


def plot_multiplier(sd_ratio: float) -> float:
    """A standard-error ratio r implies 1/r^2 times as many plots."""
    return 1.0 / (sd_ratio * sd_ratio)


def compare_designs(summaries) -> tuple[EfficiencyRow, ...]:
    """Pair every ratio-family summary with its SRS,PS baseline.

    All summaries must describe the same population (identical truths per
    target); mismatches are rejected.
    """
    truths: dict[str, float] = {}
    for s in summaries:
        if s.target in truths and truths[s.target] != s.truth:
            raise SimulationError(
                f"summaries mix truths for target {s.target!r}: "
                f"{truths[s.target]} vs {s.truth}"
            )
        truths.setdefault(s.target, s.truth)
    rows = []
    groups: dict[tuple, list] = {}
    for s in summaries:
        groups.setdefault((s.design_mode, s.m, s.intensity, s.target), []).append(s)
    for key, members in sorted(groups.items()):
        baseline = [s for s in members if s.estimator.startswith("srs_ps_")]
        if not baseline:
            continue
        base = baseline[0]
        for s in members:
            if s is base:
                continue
            ratio = s.sd / base.sd
            rows.append(
                EfficiencyRow(
                    design_mode=key[0],
                    m=key[1],
                    intensity=key[2],
                    target=key[3],
                    estimator=s.estimator,
                    baseline=base.estimator,
                    sd_ratio=ratio,
                    plot_multiplier=plot_multiplier(ratio),
                )
            )
    return tuple(rows)
