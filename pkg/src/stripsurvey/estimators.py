"""Point and variance estimators for domain totals, areas, and densities.

Three families, all design-based:

- Poststratified simple-random-sampling estimators applied to the pooled
  field plots (the standard national-inventory workhorse), with the
  Bechtold/Patterson-style variance including the 1/n leading factor.
- Two-stage ratio estimators that combine full-strip model predictions with
  design-weighted residual corrections, with and without poststratification.
- Ratio-of-ratios density estimators whose numerator and denominator are
  themselves ratio estimators, with Taylor-linearized variances.

Strip aggregates carry physical units throughout: per-strip totals in Mg,
per-strip areas in ha, so density estimates are Mg/ha and every variance is
in squared units of its estimate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .design import TwoStageSample
from .errors import EstimationError
from .models import PlotPredictions

FLAG_NEGATIVE_VARIANCE = "negative_variance"
FLAG_SMALL_N_STRATUM = "small_n_stratum"
FLAG_EMPTY_STRATUM_STRIP = "empty_stratum_strip"

ESTIMATOR_TARGETS = {
    "srs_ps_total": "total",
    "srs_ps_area": "area",
    "srs_ps_density": "density",
    "ratio_total": "total",
    "ratio_total_ps": "total",
    "ratio_area": "area",
    "ratio_area_ps": "area",
    "ror_density": "density",
    "ror_density_ps": "density",
}

ESTIMATOR_LABELS = {
    "srs_ps_total": "SRS,PS",
    "srs_ps_area": "SRS,PS",
    "srs_ps_density": "SRS,PS",
    "ratio_total": "R",
    "ratio_total_ps": "R,PS",
    "ratio_area": "R",
    "ratio_area_ps": "R,PS",
    "ror_density": "RoR",
    "ror_density_ps": "RoR,PS",
}


@dataclass(frozen=True)
class Estimate:
    """A point estimate with its estimated variance and diagnostic flags."""

    value: float
    variance: float
    flags: frozenset = frozenset()

    def __post_init__(self):
        if self.variance < 0.0 and FLAG_NEGATIVE_VARIANCE not in self.flags:
            object.__setattr__(self, "flags", self.flags | {FLAG_NEGATIVE_VARIANCE})

    @property
    def se(self) -> float:
        """Standard error; NaN (undefined) when the variance estimate is negative."""
        return float(np.sqrt(self.variance)) if self.variance >= 0.0 else float("nan")


@dataclass(frozen=True)
class StripAggregates:
    """Per-strip and per-strip-per-stratum building blocks for the ratio family.

    ``t_hat``/``a_hat`` are the model-assisted per-strip totals (Mg) and
    areas (ha): full-strip prediction sums plus the design-expanded plot
    residual corrections.  The ``*_h`` matrices are their stratum analogues.
    A (strip, stratum) cell with cells but no field plots is treated like a
    strip the stratum is not present in: it contributes zero to both sums of
    that stratum's ratio (``N_hi_eff`` zeroes its size), because a
    prediction-only contribution has no residual correction and would bias
    the stratum ratio.  ``s2_*`` are within-strip residual variances (NaN
    where fewer than 2 plots).
    """

    M: int
    N: int
    H: int
    a_cell: float
    N_i: np.ndarray
    n_i: np.ndarray
    N_hi: np.ndarray
    n_hi: np.ndarray
    N_hi_eff: np.ndarray
    t_hat: np.ndarray
    a_hat: np.ndarray
    t_hat_h: np.ndarray
    a_hat_h: np.ndarray
    s2_y: np.ndarray
    s2_a: np.ndarray
    s2_y_h: np.ndarray
    s2_a_h: np.ndarray
    plot_strip: np.ndarray
    e_y_mg: np.ndarray
    e_a_ha: np.ndarray

    @property
    def m(self) -> int:
        return len(self.N_i)


def _grouped_stats(keys: np.ndarray, values: np.ndarray, n_groups: int):
    """Group sums, counts, and two-pass sample variances by integer key."""
    sums = np.bincount(keys, weights=values, minlength=n_groups)
    counts = np.bincount(keys, minlength=n_groups)
    means = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
    dev = values - means[keys]
    ssq = np.bincount(keys, weights=dev * dev, minlength=n_groups)
    with np.errstate(invalid="ignore"):
        s2 = np.where(counts >= 2, ssq / np.maximum(counts - 1, 1), np.nan)
    return sums, counts, s2


def _fpc_within(sizes: np.ndarray, counts: np.ndarray, s2: np.ndarray) -> np.ndarray:
    """Second-stage terms N^2 (1/n - 1/N) s^2, zero where s^2 is undefined."""
    out = np.zeros(sizes.shape, dtype=float)
    mask = counts >= 2
    nn = counts[mask].astype(float)
    ss = sizes[mask].astype(float)
    out[mask] = ss * ss * (1.0 / nn - 1.0 / ss) * s2[mask]
    return out


def aggregate_strips(sample: TwoStageSample, preds: PlotPredictions) -> StripAggregates:
    """Build all per-strip aggregates once; shared by the six ratio estimators."""
    m, h_count = sample.m, sample.H
    a_cell = preds.a_cell
    key = preds.strip_pos * h_count + preds.stratum

    qy = preds.q_hat * preds.y_hat
    pred_t = np.bincount(preds.strip_pos, weights=qy, minlength=m) * a_cell
    pred_a = np.bincount(preds.strip_pos, weights=preds.q_hat, minlength=m) * a_cell
    pred_t_h = (np.bincount(key, weights=qy, minlength=m * h_count) * a_cell).reshape(m, h_count)
    pred_a_h = (
        np.bincount(key, weights=preds.q_hat, minlength=m * h_count) * a_cell
    ).reshape(m, h_count)

    is_plot = preds.is_plot
    plot_strip = preds.strip_pos[is_plot]
    plot_key = key[is_plot]
    e_y_mg = preds.e_y[is_plot] * a_cell
    e_a_ha = preds.e_a[is_plot]

    ey_sum, n_strip, s2_y = _grouped_stats(plot_strip, e_y_mg, m)
    ea_sum, _, s2_a = _grouped_stats(plot_strip, e_a_ha, m)
    ey_sum_h, n_key, s2_y_h = _grouped_stats(plot_key, e_y_mg, m * h_count)
    ea_sum_h, _, s2_a_h = _grouped_stats(plot_key, e_a_ha, m * h_count)
    n_key = n_key.reshape(m, h_count)
    if (n_strip != sample.n_i).any() or (n_key != sample.n_hi).any():
        raise EstimationError("prediction plot flags do not match the sample's plot counts")

    expand = sample.N_i / sample.n_i
    t_hat = pred_t + expand * ey_sum
    a_hat = pred_a + expand * ea_sum

    sampled = sample.n_hi > 0
    expand_h = np.where(sampled, sample.N_hi / np.maximum(sample.n_hi, 1), 0.0)
    t_hat_h = np.where(sampled, pred_t_h + expand_h * ey_sum_h.reshape(m, h_count), 0.0)
    a_hat_h = np.where(sampled, pred_a_h + expand_h * ea_sum_h.reshape(m, h_count), 0.0)

    return StripAggregates(
        M=sample.M,
        N=sample.N,
        H=h_count,
        a_cell=a_cell,
        N_i=sample.N_i,
        n_i=sample.n_i,
        N_hi=sample.N_hi,
        n_hi=sample.n_hi,
        N_hi_eff=np.where(sampled, sample.N_hi, 0),
        t_hat=t_hat,
        a_hat=a_hat,
        t_hat_h=t_hat_h,
        a_hat_h=a_hat_h,
        s2_y=s2_y,
        s2_a=s2_a,
        s2_y_h=s2_y_h.reshape(m, h_count),
        s2_a_h=s2_a_h.reshape(m, h_count),
        plot_strip=plot_strip,
        e_y_mg=e_y_mg,
        e_a_ha=e_a_ha,
    )


def _series_ratio(
    units: float, totals: np.ndarray, sizes: np.ndarray, within_sum: float, big_m: int, m: int
):
    """Shared ratio-estimator core over one series of per-strip totals.

    value = units * (sum(totals) / sum(sizes));
    variance = (units/N_hat)^2 [M^2 (1/m - 1/M) s_r^2 + (M/m) within_sum],
    with s_r^2 the uncentered mean square of r_i = totals_i - R_hat sizes_i
    (the r_i sum to zero by construction) and N_hat = (M/m) sum(sizes).
    """
    num = float(totals.sum())
    den = float(sizes.sum())
    ratio = num / den
    value = units * ratio
    r = totals - ratio * sizes
    s_r2 = float((r * r).sum()) / (m - 1)
    n_hat = (big_m / m) * den
    variance = (units / n_hat) ** 2 * (
        big_m * big_m * (1.0 / m - 1.0 / big_m) * s_r2 + (big_m / m) * within_sum
    )
    return value, variance, r


def _require_ratio_preconditions(agg: StripAggregates):
    if agg.m < 2:
        raise EstimationError("ratio estimators need at least 2 selected strips")
    if (agg.n_i < 2).any():
        raise EstimationError("ratio estimators need at least 2 field plots per strip")


def _agg(sample, preds, agg):
    return agg if agg is not None else aggregate_strips(sample, preds)


def ratio_total(
    sample: TwoStageSample, preds: PlotPredictions, agg: StripAggregates | None = None
) -> Estimate:
    """Two-stage ratio estimator of the domain total (Mg), unstratified."""
    agg = _agg(sample, preds, agg)
    _require_ratio_preconditions(agg)
    within = _fpc_within(agg.N_i, agg.n_i, agg.s2_y)
    value, variance, _ = _series_ratio(
        float(agg.N), agg.t_hat, agg.N_i.astype(float), float(within.sum()), agg.M, agg.m
    )
    return Estimate(value=value, variance=variance)


def ratio_area(
    sample: TwoStageSample, preds: PlotPredictions, agg: StripAggregates | None = None
) -> Estimate:
    """Two-stage ratio estimator of the domain area (ha), unstratified."""
    agg = _agg(sample, preds, agg)
    _require_ratio_preconditions(agg)
    within = _fpc_within(agg.N_i, agg.n_i, agg.s2_a)
    value, variance, _ = _series_ratio(
        float(agg.N), agg.a_hat, agg.N_i.astype(float), float(within.sum()), agg.M, agg.m
    )
    return Estimate(value=value, variance=variance)


@dataclass(frozen=True)
class PsSide:
    """One side (totals or areas) of the poststratified ratio machinery.

    ``r`` holds the strip residuals t_hat_rhi - R_hat_h N_hi per stratum
    (zero columns for inactive strata); ``scale`` is N_h / N_hat_h.  The
    variance includes the cross-stratum covariance terms.
    """

    value: float
    variance: float
    r: np.ndarray
    scale: np.ndarray
    active: np.ndarray
    flags: frozenset


def _ps_side(agg: StripAggregates, stratum_n: np.ndarray, side: str) -> PsSide:
    _require_ratio_preconditions(agg)
    stratum_n = np.asarray(stratum_n, dtype=float)
    if stratum_n.shape != (agg.H,):
        raise EstimationError(f"stratum sizes must have shape ({agg.H},)")
    totals_h = agg.t_hat_h if side == "y" else agg.a_hat_h
    s2_h = agg.s2_y_h if side == "y" else agg.s2_a_h
    within_h = _fpc_within(agg.N_hi, agg.n_hi, s2_h)

    flags = set()
    active = np.zeros(agg.H, dtype=bool)
    r = np.zeros((agg.m, agg.H))
    scale = np.zeros(agg.H)
    value = 0.0
    variance_sum = 0.0
    for h in range(agg.H):
        if stratum_n[h] <= 0:
            continue
        sizes = agg.N_hi_eff[:, h]
        if sizes.sum() == 0:
            # stratum exists in the population but was never field-sampled
            # (or never appears) in the selected strips
            flags.add(FLAG_EMPTY_STRATUM_STRIP)
            continue
        active[h] = True
        if ((agg.N_hi[:, h] > 0) & (agg.n_hi[:, h] < 2)).any():
            flags.add(FLAG_SMALL_N_STRATUM)
        val_h, var_h, r_h = _series_ratio(
            float(stratum_n[h]),
            totals_h[:, h],
            sizes.astype(float),
            float(within_h[:, h].sum()),
            agg.M,
            agg.m,
        )
        value += val_h
        variance_sum += var_h
        r[:, h] = r_h
        scale[h] = stratum_n[h] / ((agg.M / agg.m) * float(sizes.sum()))

    if not active.any():
        raise EstimationError("no stratum with population cells appears in the sample")

    fpc = agg.M * agg.M * (1.0 / agg.m - 1.0 / agg.M)
    cross = 0.0
    idx = np.flatnonzero(active)
    for h in idx:
        for g in idx:
            if g == h:
                continue
            cov = float((r[:, h] * r[:, g]).sum()) / (agg.m - 1)
            cross += scale[h] * scale[g] * fpc * cov
    return PsSide(
        value=value,
        variance=variance_sum + cross,
        r=r,
        scale=scale,
        active=active,
        flags=frozenset(flags),
    )


def ratio_total_ps(
    sample: TwoStageSample,
    preds: PlotPredictions,
    stratum_n: np.ndarray,
    agg: StripAggregates | None = None,
) -> Estimate:
    """Poststratified two-stage ratio estimator of the domain total (Mg)."""
    side = _ps_side(_agg(sample, preds, agg), stratum_n, "y")
    return Estimate(value=side.value, variance=side.variance, flags=side.flags)


def ratio_area_ps(
    sample: TwoStageSample,
    preds: PlotPredictions,
    stratum_n: np.ndarray,
    agg: StripAggregates | None = None,
) -> Estimate:
    """Poststratified two-stage ratio estimator of the domain area (ha)."""
    side = _ps_side(_agg(sample, preds, agg), stratum_n, "a")
    return Estimate(value=side.value, variance=side.variance, flags=side.flags)


@dataclass(frozen=True)
class LinearizationScratch:
    """Intermediate quantities of the unstratified ratio-of-ratios variance."""

    u: np.ndarray
    v: np.ndarray
    a_star: float
    s_u2: float
    s2_v: np.ndarray


def linearization_scratch(agg: StripAggregates, density: float) -> LinearizationScratch:
    """u_i = t_hat_ri - D a_hat_ri; v_ik = e_y - D e_a; A* = (M/m) sum(a_hat_ri)."""
    u = agg.t_hat - density * agg.a_hat
    a_star = (agg.M / agg.m) * float(agg.a_hat.sum())
    u_bar = float(u.mean())
    s_u2 = float(((u - u_bar) ** 2).sum()) / (agg.m - 1)
    v = agg.e_y_mg - density * agg.e_a_ha
    _, _, s2_v = _grouped_stats(agg.plot_strip, v, agg.m)
    return LinearizationScratch(u=u, v=v, a_star=a_star, s_u2=s_u2, s2_v=s2_v)


def ror_density(
    sample: TwoStageSample, preds: PlotPredictions, agg: StripAggregates | None = None
) -> Estimate:
    """Ratio-of-ratios estimator of domain density (Mg/ha), unstratified.

    The value is the literal quotient of the ratio total and ratio area
    estimates; the variance is the first-order linearization in u_i and
    v_ik, scaled by the squared expanded-area term A*."""
    agg = _agg(sample, preds, agg)
    total = ratio_total(sample, preds, agg)
    area = ratio_area(sample, preds, agg)
    if area.value <= 0.0:
        raise EstimationError(f"estimated domain area {area.value} <= 0; density undefined")
    value = total.value / area.value
    scratch = linearization_scratch(agg, value)
    within = _fpc_within(agg.N_i, agg.n_i, scratch.s2_v)
    big_m, m = agg.M, agg.m
    variance = (
        big_m * big_m * (1.0 / m - 1.0 / big_m) * scratch.s_u2 + (big_m / m) * float(within.sum())
    ) / scratch.a_star**2
    return Estimate(value=value, variance=variance)


def ps_linearization_components(
    sample: TwoStageSample,
    preds: PlotPredictions,
    stratum_n: np.ndarray,
    agg: StripAggregates | None = None,
) -> tuple[float, float, float, PsSide, PsSide]:
    """Variance components of the poststratified ratio-of-ratios estimator.

    Returns (V_total, V_area, Cov_total_area, total_side, area_side).  The
    covariance runs over every stratum pair (h, g), including h = g, using
    the first-stage strip residuals of each side.
    """
    agg = _agg(sample, preds, agg)
    side_y = _ps_side(agg, stratum_n, "y")
    side_a = _ps_side(agg, stratum_n, "a")
    fpc = agg.M * agg.M * (1.0 / agg.m - 1.0 / agg.M)
    cov_ta = 0.0
    idx = np.flatnonzero(side_y.active)
    for h in idx:
        for g in idx:
            cov = float((side_y.r[:, h] * side_a.r[:, g]).sum()) / (agg.m - 1)
            cov_ta += side_y.scale[h] * side_a.scale[g] * fpc * cov
    return side_y.variance, side_a.variance, cov_ta, side_y, side_a


def ror_density_ps(
    sample: TwoStageSample,
    preds: PlotPredictions,
    stratum_n: np.ndarray,
    agg: StripAggregates | None = None,
) -> Estimate:
    """Poststratified ratio-of-ratios estimator of domain density (Mg/ha).

    Variance combines the poststratified total and area variances with their
    cross covariance; the assembled value can be negative in unlucky samples,
    which is flagged rather than clamped."""
    agg = _agg(sample, preds, agg)
    v_t, v_a, cov_ta, side_y, side_a = ps_linearization_components(
        sample, preds, stratum_n, agg
    )
    if side_a.value <= 0.0:
        raise EstimationError(
            f"estimated domain area {side_a.value} <= 0; density undefined"
        )
    value = side_y.value / side_a.value
    variance = (v_t + value * value * v_a - 2.0 * value * cov_ta) / side_a.value**2
    return Estimate(value=value, variance=variance, flags=side_y.flags | side_a.flags)


# ---------------------------------------------------------------------------
# Poststratified SRS estimators on the pooled field plots
# ---------------------------------------------------------------------------


def _collapse_strata(plot_strata: np.ndarray, weights: np.ndarray):
    """Merge strata with fewer than 2 plots into the nearest estimable stratum.

    Returns (group label per plot, group weights, group ids, collapsed flag).
    Group labels reuse the id of the receiving stratum.
    """
    weights = np.asarray(weights, dtype=float)
    h_count = len(weights)
    if abs(weights.sum() - 1.0) > 1e-9 or (weights < 0).any():
        raise EstimationError("stratum weights must be non-negative and sum to 1")
    counts = np.bincount(plot_strata, minlength=h_count)
    rich = np.flatnonzero(counts >= 2)
    if rich.size == 0:
        raise EstimationError("no stratum has at least 2 field plots")
    assign = np.arange(h_count)
    collapsed = False
    for h in range(h_count):
        if counts[h] >= 2 or (weights[h] == 0.0 and counts[h] == 0):
            continue
        nearest = rich[np.argmin(np.abs(rich - h))]
        assign[h] = nearest
        collapsed = True
    group_of_plot = assign[plot_strata]
    group_weights = np.bincount(assign, weights=weights, minlength=h_count)
    groups = np.flatnonzero((group_weights > 0) | (np.bincount(group_of_plot, minlength=h_count) > 0))
    return group_of_plot, group_weights, groups, collapsed


def _srs_ps_value_and_variance(
    group_of_plot: np.ndarray,
    values: np.ndarray,
    group_weights: np.ndarray,
    groups: np.ndarray,
    area_total: float,
):
    """Poststratified mean estimator and its variance on one response column.

    value = A_T sum_h W_h vbar_h;
    variance = (A_T^2/n) [sum_h W_h n_h V(vbar_h) + sum_h (1-W_h)(n_h/n) V(vbar_h)]
    with V(vbar_h) = s_h^2 / n_h.
    """
    n = len(values)
    value = 0.0
    main = 0.0
    correction = 0.0
    for h in groups:
        sel = group_of_plot == h
        n_h = int(sel.sum())
        w_h = group_weights[h]
        v = values[sel]
        vbar = float(v.mean())
        value += w_h * vbar
        var_mean = float(((v - vbar) ** 2).sum()) / (n_h - 1) / n_h
        main += w_h * n_h * var_mean
        correction += (1.0 - w_h) * (n_h / n) * var_mean
    variance = (area_total * area_total / n) * (main + correction)
    return area_total * value, variance


def srs_ps_total(
    plot_strata: np.ndarray, y: np.ndarray, weights: np.ndarray, area_total: float
) -> Estimate:
    """Poststratified SRS estimator of the domain total (Mg).

    ``y`` are plot-level densities (Mg/ha); ``weights`` the known stratum
    weights N_h/N; ``area_total`` the population area A_T in ha.
    """
    plot_strata = np.asarray(plot_strata, dtype=np.int64)
    y = np.asarray(y, dtype=float)
    group_of_plot, gw, groups, collapsed = _collapse_strata(plot_strata, weights)
    value, variance = _srs_ps_value_and_variance(group_of_plot, y, gw, groups, area_total)
    flags = frozenset({FLAG_SMALL_N_STRATUM}) if collapsed else frozenset()
    return Estimate(value=value, variance=variance, flags=flags)


def srs_ps_area(
    plot_strata: np.ndarray, a: np.ndarray, weights: np.ndarray, area_total: float
) -> Estimate:
    """Poststratified SRS estimator of the domain area (ha).

    ``a`` are plot-level domain proportions in [0, 1].
    """
    plot_strata = np.asarray(plot_strata, dtype=np.int64)
    a = np.asarray(a, dtype=float)
    group_of_plot, gw, groups, collapsed = _collapse_strata(plot_strata, weights)
    value, variance = _srs_ps_value_and_variance(group_of_plot, a, gw, groups, area_total)
    flags = frozenset({FLAG_SMALL_N_STRATUM}) if collapsed else frozenset()
    return Estimate(value=value, variance=variance, flags=flags)


def srs_ps_density(
    plot_strata: np.ndarray, y: np.ndarray, a: np.ndarray, weights: np.ndarray
) -> Estimate:
    """Poststratified SRS estimator of domain density (Mg/ha).

    A ratio of the poststratified total and area estimators; the population
    area cancels, so it is not needed.  Variance is the standard ratio
    linearization with the poststratified covariance term.
    """
    plot_strata = np.asarray(plot_strata, dtype=np.int64)
    y = np.asarray(y, dtype=float)
    a = np.asarray(a, dtype=float)
    group_of_plot, gw, groups, collapsed = _collapse_strata(plot_strata, weights)
    n = len(y)
    t_val, t_var = _srs_ps_value_and_variance(group_of_plot, y, gw, groups, 1.0)
    a_val, a_var = _srs_ps_value_and_variance(group_of_plot, a, gw, groups, 1.0)
    if a_val <= 0.0:
        raise EstimationError(f"estimated domain area share {a_val} <= 0; density undefined")
    main = 0.0
    correction = 0.0
    for h in groups:
        sel = group_of_plot == h
        n_h = int(sel.sum())
        w_h = gw[h]
        dev_y = y[sel] - y[sel].mean()
        dev_a = a[sel] - a[sel].mean()
        cov_mean = float((dev_y * dev_a).sum()) / (n_h - 1) / n_h
        main += w_h * n_h * cov_mean
        correction += (1.0 - w_h) * (n_h / n) * cov_mean
    cov_ta = (1.0 / n) * (main + correction)
    density = t_val / a_val
    variance = (t_var + density * density * a_var - 2.0 * density * cov_ta) / (a_val * a_val)
    flags = frozenset({FLAG_SMALL_N_STRATUM}) if collapsed else frozenset()
    return Estimate(value=density, variance=variance, flags=flags)


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


def dump_sample_diagnostics(
    sample: TwoStageSample,
    preds: PlotPredictions,
    stratum_n: np.ndarray,
    path,
) -> None:
    """Write strip aggregates, residual variances, and the cross-stratum
    residual covariance matrices for one sample as delimited text."""
    agg = aggregate_strips(sample, preds)
    side_y = _ps_side(agg, stratum_n, "y")
    side_a = _ps_side(agg, stratum_n, "a")
    fpc_cov = 1.0 / (agg.m - 1)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# strip aggregates (physical units: Mg, ha)\n")
        fh.write("strip_id,N_i,n_i,t_hat,a_hat,s2_e_y,s2_e_a\n")
        for j in range(agg.m):
            fh.write(
                f"{sample.strip_ids[j]},{agg.N_i[j]},{agg.n_i[j]},"
                f"{agg.t_hat[j]!r},{agg.a_hat[j]!r},{agg.s2_y[j]!r},{agg.s2_a[j]!r}\n"
            )
        fh.write("# per-stratum strip totals t_hat_rhi\n")
        fh.write("strip_id,stratum,N_hi,n_hi,t_hat_h,a_hat_h,s2_e_y_h,s2_e_a_h\n")
        for j in range(agg.m):
            for h in range(agg.H):
                if agg.N_hi[j, h] == 0:
                    continue
                fh.write(
                    f"{sample.strip_ids[j]},{h},{agg.N_hi[j, h]},{agg.n_hi[j, h]},"
                    f"{agg.t_hat_h[j, h]!r},{agg.a_hat_h[j, h]!r},"
                    f"{agg.s2_y_h[j, h]!r},{agg.s2_a_h[j, h]!r}\n"
                )
        for name, left, right in (
            ("cov(r_h, r_g) totals", side_y.r, side_y.r),
            ("cov(r_a_h, r_a_g) areas", side_a.r, side_a.r),
            ("cov(r_h, r_a_g) cross", side_y.r, side_a.r),
        ):
            fh.write(f"# {name}, strata {np.flatnonzero(side_y.active).tolist()}\n")
            for h in np.flatnonzero(side_y.active):
                row = [
                    repr(float((left[:, h] * right[:, g]).sum()) * fpc_cov)
                    for g in np.flatnonzero(side_y.active)
                ]
                fh.write(",".join(row) + "\n")
