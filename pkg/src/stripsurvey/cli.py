"""Command-line front end.

Subcommands: ``gen-pop`` (population spec -> frame file), ``truth``
(enumerate the population parameters), ``simulate`` (run a Monte Carlo
study), and ``report`` (re-render tables from a summary CSV).  Every output
directory gets a manifest with input hashes, seeds, and the tool version,
sufficient to reproduce the run bit-exactly.

Exit codes: 0 on success, 1 on runtime failure, 2 on config/validation
failure.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .configio import load_population_spec, load_sim_config
from .design import draw
from .errors import (
    ConfigError,
    DesignError,
    FrameValidationError,
    SimulationError,
    SpecValidationError,
    StripSurveyError,
)
from .estimators import ESTIMATOR_LABELS, ESTIMATOR_TARGETS, dump_sample_diagnostics
from .frame import enumerate_truth, generate_population, load_frame, save_frame
from .models import fit_working_models, make_predictions
from .simlab import SimulationSummary, compare_designs, run

_VALIDATION_ERRORS = (
    ConfigError,
    SpecValidationError,
    FrameValidationError,
    DesignError,
    SimulationError,
)

SUMMARY_COLUMNS = (
    "estimator",
    "label",
    "target",
    "design_mode",
    "m",
    "intensity",
    "truth",
    "mean",
    "sd",
    "bias_pct",
    "se_mean",
    "se_sd",
    "se_bias_pct",
    "coverage",
    "n_used",
    "n_flagged",
    "replicates",
)

_TARGET_TITLES = {
    "total": ("Biomass total", "kt", 1e-3),
    "area": ("Domain area", "km2", 1e-2),
    "density": ("Biomass density in domain", "Mg/ha", 1.0),
}


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _utc_now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _write_manifest(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_summary_csv(path, summaries) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for s in summaries:
            writer.writerow(
                repr(getattr(s, c)) if isinstance(getattr(s, c), float) else str(getattr(s, c))
                for c in SUMMARY_COLUMNS
            )


def read_summary_csv(path) -> list[SimulationSummary]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if tuple(rows[0]) != SUMMARY_COLUMNS:
        raise ConfigError(f"{path}: unexpected summary columns {tuple(rows[0])}")
    out = []
    for parts in rows[1:]:
        kw = dict(zip(SUMMARY_COLUMNS, parts))
        out.append(
            SimulationSummary(
                estimator=kw["estimator"],
                label=kw["label"],
                target=kw["target"],
                design_mode=kw["design_mode"],
                m=int(kw["m"]),
                intensity=float(kw["intensity"]),
                truth=float(kw["truth"]),
                mean=float(kw["mean"]),
                sd=float(kw["sd"]),
                bias_pct=float(kw["bias_pct"]),
                se_mean=float(kw["se_mean"]),
                se_sd=float(kw["se_sd"]),
                se_bias_pct=float(kw["se_bias_pct"]),
                coverage=float(kw["coverage"]),
                n_used=int(kw["n_used"]),
                n_flagged=int(kw["n_flagged"]),
                replicates=int(kw["replicates"]),
            )
        )
    return out


def _fmt_scaled(value: float, target: str) -> str:
    # Documented rounding: totals and areas as integers in kt/km2,
    # densities to 2 decimals; coverage elsewhere to 3 decimals.
    scale = _TARGET_TITLES[target][2]
    if target == "density":
        return f"{value * scale:.2f}"
    return f"{value * scale:,.0f}"


def write_markdown_tables(path, summaries) -> None:
    """Markdown report grouped like the simulation result tables: one table
    per (target, design mode), rows blocked by plot sampling intensity."""
    order = {name: i for i, name in enumerate(ESTIMATOR_TARGETS)}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# Simulation results\n")
        keys = sorted({(s.target, s.design_mode, s.m) for s in summaries},
                      key=lambda k: (list(_TARGET_TITLES).index(k[0]), k[1], k[2]))
        for target, mode, m in keys:
            title, unit, scale = _TARGET_TITLES[target]
            rows = [s for s in summaries if (s.target, s.design_mode, s.m) == (target, mode, m)]
            truth = rows[0].truth * scale
            truth_txt = f"{truth:,.0f}" if target != "density" else f"{truth:.2f}"
            fh.write(
                f"\n## {title} ({unit}), {mode} design, m={m} (truth {truth_txt} {unit})\n\n"
            )
            fh.write(
                "| Intensity | Estimator | Mean | St.Dev. | Bias(%) | SE Mean | SE St.Dev. "
                "| SE Bias(%) | 95% CI Cov. | Flagged |\n"
            )
            fh.write("|---|---|---|---|---|---|---|---|---|---|\n")
            for s in sorted(rows, key=lambda s: (-s.intensity, order[s.estimator])):
                fh.write(
                    f"| {s.intensity:g} | {s.label} | {_fmt_scaled(s.mean, target)} "
                    f"| {_fmt_scaled(s.sd, target)} | {s.bias_pct:.3g} "
                    f"| {_fmt_scaled(s.se_mean, target)} | {_fmt_scaled(s.se_sd, target)} "
                    f"| {s.se_bias_pct:.3g} | {s.coverage:.3f} | {s.n_flagged} |\n"
                )


def _write_efficiency_csv(path, summaries) -> None:
    rows = compare_designs(summaries)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("design_mode,m,intensity,target,estimator,baseline,sd_ratio,plot_multiplier\n")
        for r in rows:
            fh.write(
                f"{r.design_mode},{r.m},{r.intensity!r},{r.target},{r.estimator},"
                f"{r.baseline},{r.sd_ratio!r},{r.plot_multiplier!r}\n"
            )


def _cmd_gen_pop(args) -> int:
    started = _utc_now()
    spec = load_population_spec(args.spec)
    frame = generate_population(spec, args.seed)
    save_frame(frame, args.out)
    truth = enumerate_truth(frame)
    _write_manifest(
        str(args.out) + ".manifest.json",
        {
            "tool": "stripsurvey",
            "version": __version__,
            "command": "gen-pop",
            "spec_path": str(args.spec),
            "spec_sha256": _sha256(args.spec),
            "seed": args.seed,
            "frame_path": str(args.out),
            "frame_sha256": _sha256(args.out),
            "truth": {
                "total_mg": truth.total_mg,
                "area_ha": truth.area_ha,
                "density_mg_per_ha": truth.density_mg_per_ha,
            },
            "started": started,
            "finished": _utc_now(),
        },
    )
    print(f"wrote {args.out} ({frame.N} cells, M={frame.M}, H={frame.H})")
    return 0


def _cmd_truth(args) -> int:
    frame = load_frame(args.frame)
    truth = enumerate_truth(frame)
    print(f"domain total:   {truth.total_mg / 1000.0:.3f} kt")
    print(f"domain area:    {truth.area_ha / 100.0:.3f} km2")
    print(f"domain density: {truth.density_mg_per_ha:.4f} Mg/ha")
    return 0


def _cmd_simulate(args) -> int:
    started = _utc_now()
    cfg_file = load_sim_config(args.config)
    frame = load_frame(args.frame)
    truth = enumerate_truth(frame)
    if cfg_file.truth is not None:
        for attr in ("total_mg", "area_ha", "density_mg_per_ha"):
            want = getattr(cfg_file.truth, attr)
            have = getattr(truth, attr)
            if abs(want - have) > 1e-9 * max(1.0, abs(have)):
                raise ConfigError(
                    f"config truth {attr}={want} does not match the frame's {have}"
                )
    os.makedirs(args.out, exist_ok=True)
    result = run(frame, cfg_file.config, jobs=args.jobs, truth=cfg_file.truth)
    summary_path = os.path.join(args.out, "summary.csv")
    tables_path = os.path.join(args.out, "tables.md")
    _write_summary_csv(summary_path, result.summaries)
    write_markdown_tables(tables_path, result.summaries)
    outputs = {"summary.csv": _sha256(summary_path), "tables.md": _sha256(tables_path)}
    if args.dump_replicates:
        log_path = os.path.join(args.out, "replicates.csv")
        with open(log_path, "w", encoding="utf-8") as fh:
            fh.write("design_index,design_mode,m,intensity,replicate,estimator,value,se,flags\n")
            for rec in result.records:
                design = cfg_file.config.designs[rec.design_index]
                fh.write(
                    f"{rec.design_index},{design.mode},{design.m},{design.plot_intensity!r},"
                    f"{rec.replicate},{rec.estimator},{rec.value!r},{rec.se!r},{rec.flags}\n"
                )
        outputs["replicates.csv"] = _sha256(log_path)
        # Strip-level diagnostics of replicate 0 for each design point.
        for d, design in enumerate(cfg_file.config.designs):
            rng = np.random.default_rng(
                np.random.SeedSequence(cfg_file.config.master_seed, spawn_key=(d, 0))
            )
            sample = draw(frame, design, rng)
            cells = sample.all_plot_cells()
            models = fit_working_models(
                frame.lidar_height[cells], frame.biomass_density[cells], frame.domain_proportion[cells]
            )
            preds = make_predictions(models, frame, sample)
            diag_path = os.path.join(args.out, f"diagnostics_design{d}.txt")
            dump_sample_diagnostics(sample, preds, frame.N_h, diag_path)
            outputs[os.path.basename(diag_path)] = _sha256(diag_path)
    _write_manifest(
        os.path.join(args.out, "manifest.json"),
        {
            "tool": "stripsurvey",
            "version": __version__,
            "command": "simulate",
            "config_path": str(args.config),
            "config_sha256": _sha256(args.config),
            "frame_path": str(args.frame),
            "frame_sha256": _sha256(args.frame),
            "master_seed": cfg_file.config.master_seed,
            "jobs": args.jobs,
            "outputs": outputs,
            "started": started,
            "finished": _utc_now(),
        },
    )
    print(f"wrote {summary_path}")
    return 0


def _cmd_report(args) -> int:
    summaries = read_summary_csv(args.summary)
    os.makedirs(args.out, exist_ok=True)
    tables_path = os.path.join(args.out, "tables.md")
    write_markdown_tables(tables_path, summaries)
    efficiency_path = os.path.join(args.out, "efficiency.csv")
    _write_efficiency_csv(efficiency_path, summaries)
    print(f"wrote {tables_path} and {efficiency_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stripsurvey",
        description="Design-based estimation and simulation for two-stage strip sampling",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-pop", help="generate a synthetic population frame")
    p.add_argument("spec", help="population spec YAML")
    p.add_argument("--out", required=True, help="frame file to write")
    p.add_argument("--seed", type=int, default=0, help="generation seed")
    p.set_defaults(func=_cmd_gen_pop)

    p = sub.add_parser("truth", help="enumerate population truth from a frame file")
    p.add_argument("frame", help="frame file")
    p.set_defaults(func=_cmd_truth)

    p = sub.add_parser("simulate", help="run a Monte Carlo study")
    p.add_argument("config", help="simulation config YAML")
    p.add_argument("frame", help="frame file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers")
    p.add_argument(
        "--dump-replicates",
        action="store_true",
        help="also write the per-replicate log and first-replicate strip diagnostics",
    )
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("report", help="re-render tables and efficiency from a summary CSV")
    p.add_argument("summary", help="summary.csv from a previous run")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (StripSurveyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
