"""Strict YAML configuration documents.

Two schemas: the population spec consumed by ``gen-pop`` and the simulation
config consumed by ``simulate``.  Unknown keys are rejected with their full
path so a typo cannot silently change a study.
"""

from __future__ import annotations

from dataclasses import dataclass

import yaml

from .design import MODE_SRS, MODE_SYSTEMATIC, DesignConfig
from .errors import ConfigError
from .frame import CopulaSpec, GridSpec, MarginalSpec, TruthValues
from .simlab import ALL_ESTIMATORS, SimConfig


def _load_yaml(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return doc


def _check_keys(mapping: dict, path: str, required: tuple, optional: tuple = ()):
    if not isinstance(mapping, dict):
        raise ConfigError(f"{path}: expected a mapping")
    unknown = sorted(set(mapping) - set(required) - set(optional))
    if unknown:
        raise ConfigError(f"{path}: unknown keys {unknown}")
    missing = sorted(set(required) - set(mapping))
    if missing:
        raise ConfigError(f"{path}: missing required keys {missing}")


def _number(mapping: dict, key: str, path: str, default=None, integer=False):
    if key not in mapping:
        return default
    value = mapping[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number, got {value!r}")
    if integer:
        if int(value) != value:
            raise ConfigError(f"{path}.{key}: expected an integer, got {value!r}")
        return int(value)
    return float(value)


def _marginal(mapping: dict, path: str) -> MarginalSpec:
    if not isinstance(mapping, dict) or "family" not in mapping:
        raise ConfigError(f"{path}: expected a mapping with a 'family' key")
    params = {k: v for k, v in mapping.items() if k != "family"}
    for k, v in params.items():
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{path}.{k}: expected a number, got {v!r}")
    return MarginalSpec(family=mapping["family"], params={k: float(v) for k, v in params.items()})


def load_population_spec(path) -> CopulaSpec:
    """Parse and validate a population spec document."""
    doc = _load_yaml(path)
    _check_keys(
        doc,
        str(path),
        required=(
            "pool_size",
            "a_cell_ha",
            "correlation",
            "stratum_probs",
            "marginals",
            "domain_link",
            "grid",
        ),
        optional=("calibration_rounds",),
    )
    corr = doc["correlation"]
    if (
        not isinstance(corr, list)
        or len(corr) != 4
        or any(not isinstance(row, list) or len(row) != 4 for row in corr)
    ):
        raise ConfigError(f"{path}.correlation: expected a 4x4 list of rows")
    probs = doc["stratum_probs"]
    if not isinstance(probs, list) or not probs:
        raise ConfigError(f"{path}.stratum_probs: expected a non-empty list")
    marg = doc["marginals"]
    _check_keys(marg, f"{path}.marginals", required=("lidar_height", "biomass", "domain_fraction"))
    link = doc["domain_link"]
    _check_keys(link, f"{path}.domain_link", required=("intercept", "slope"))
    grid = doc["grid"]
    _check_keys(
        grid,
        f"{path}.grid",
        required=("strips", "cells_per_strip"),
        optional=("strip_spacing_km", "cell_spacing_km", "length_variation"),
    )
    return CopulaSpec(
        correlation=[[float(v) for v in row] for row in corr],
        stratum_probs=tuple(float(p) for p in probs),
        height=_marginal(marg["lidar_height"], f"{path}.marginals.lidar_height"),
        biomass=_marginal(marg["biomass"], f"{path}.marginals.biomass"),
        domain_fraction=_marginal(marg["domain_fraction"], f"{path}.marginals.domain_fraction"),
        domain_link=(
            _number(link, "intercept", f"{path}.domain_link"),
            _number(link, "slope", f"{path}.domain_link"),
        ),
        pool_size=_number(doc, "pool_size", str(path), integer=True),
        grid=GridSpec(
            strips=_number(grid, "strips", f"{path}.grid", integer=True),
            cells_per_strip=_number(grid, "cells_per_strip", f"{path}.grid", integer=True),
            strip_spacing_km=_number(grid, "strip_spacing_km", f"{path}.grid", default=2.0),
            cell_spacing_km=_number(grid, "cell_spacing_km", f"{path}.grid", default=0.2),
            length_variation=_number(grid, "length_variation", f"{path}.grid", default=0.0),
        ),
        a_cell_ha=_number(doc, "a_cell_ha", str(path)),
        calibration_rounds=_number(doc, "calibration_rounds", str(path), default=8, integer=True),
    )


@dataclass(frozen=True)
class SimConfigFile:
    """Parsed simulation config plus the optional declared truth guard."""

    config: SimConfig
    truth: TruthValues | None


def load_sim_config(path) -> SimConfigFile:
    """Parse and validate a simulation config document."""
    doc = _load_yaml(path)
    _check_keys(
        doc,
        str(path),
        required=("replicates", "master_seed", "designs"),
        optional=("ci_z", "estimators", "truth"),
    )
    estimators = doc.get("estimators", "all")
    if estimators == "all":
        estimators = list(ALL_ESTIMATORS)
    if not isinstance(estimators, list) or not all(isinstance(e, str) for e in estimators):
        raise ConfigError(f"{path}.estimators: expected 'all' or a list of estimator names")
    bad = [e for e in estimators if e not in ALL_ESTIMATORS]
    if bad:
        raise ConfigError(f"{path}.estimators: unknown names {bad}; valid: {list(ALL_ESTIMATORS)}")

    raw_designs = doc["designs"]
    if not isinstance(raw_designs, list) or not raw_designs:
        raise ConfigError(f"{path}.designs: expected a non-empty list")
    designs: list[DesignConfig] = []
    for i, block in enumerate(raw_designs):
        where = f"{path}.designs[{i}]"
        _check_keys(
            block,
            where,
            required=("mode", "strips"),
            optional=("intensity", "intensities", "min_plots_per_strip"),
        )
        mode = block["mode"]
        if mode not in (MODE_SRS, MODE_SYSTEMATIC):
            raise ConfigError(f"{where}.mode: expected '{MODE_SRS}' or '{MODE_SYSTEMATIC}'")
        if ("intensity" in block) == ("intensities" in block):
            raise ConfigError(f"{where}: give exactly one of 'intensity' or 'intensities'")
        intensities = block.get("intensities", [block.get("intensity")])
        if not isinstance(intensities, list) or not intensities:
            raise ConfigError(f"{where}.intensities: expected a non-empty list")
        for f in intensities:
            designs.append(
                DesignConfig(
                    mode=mode,
                    m=_number(block, "strips", where, integer=True),
                    plot_intensity=float(f),
                    min_plots_per_strip=_number(
                        block, "min_plots_per_strip", where, default=2, integer=True
                    ),
                )
            )

    truth = None
    if "truth" in doc:
        block = doc["truth"]
        _check_keys(block, f"{path}.truth", required=("total_mg", "area_ha", "density_mg_per_ha"))
        truth = TruthValues(
            total_mg=_number(block, "total_mg", f"{path}.truth"),
            area_ha=_number(block, "area_ha", f"{path}.truth"),
            density_mg_per_ha=_number(block, "density_mg_per_ha", f"{path}.truth"),
        )

    return SimConfigFile(
        config=SimConfig(
            replicates=_number(doc, "replicates", str(path), integer=True),
            designs=tuple(designs),
            estimators=tuple(estimators),
            ci_z=_number(doc, "ci_z", str(path), default=1.96),
            master_seed=_number(doc, "master_seed", str(path), integer=True),
        ),
        truth=truth,
    )
