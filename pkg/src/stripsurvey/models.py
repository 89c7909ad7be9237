"""Working prediction models fit on each replicate's field plots.

The biomass model is ordinary least squares of plot biomass density on lidar
height; the domain model is a fractional-response logistic fit by iteratively
reweighted least squares.  Both are refit inside every replicate from that
replicate's own field plots, and both degrade to flagged constant fallbacks
on degenerate inputs rather than failing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logit

from .errors import ModelFitError
from .design import TwoStageSample
from .frame import PopulationFrame

_IRLS_TOL = 1e-8
_IRLS_MAX_ITER = 50
_ETA_LIMIT = 50.0  # |linear predictor| beyond this is treated as separation


@dataclass(frozen=True)
class WorkingModels:
    """Fitted biomass and domain models plus fit diagnostics.

    ``domain_constant`` is set (and the logistic coefficients are unused)
    when the logistic fit fell back to a constant prediction.
    """

    biomass_intercept: float
    biomass_slope: float
    domain_intercept: float
    domain_slope: float
    n_fit: int
    biomass_fallback: bool = False
    domain_fallback: bool = False
    domain_constant: float | None = None

    def predict_biomass(self, height: np.ndarray) -> np.ndarray:
        return np.maximum(0.0, self.biomass_intercept + self.biomass_slope * height)

    def predict_domain(self, height: np.ndarray) -> np.ndarray:
        if self.domain_constant is not None:
            return np.full_like(np.asarray(height, dtype=float), self.domain_constant)
        return expit(self.domain_intercept + self.domain_slope * height)


@dataclass(frozen=True)
class PlotPredictions:
    """Per-cell predictions over all cells of the selected strips.

    Residuals (``e_y`` in Mg/ha, ``e_a`` in ha) are present only on field
    plots and NaN elsewhere.  ``strip_pos`` indexes into the sample's strip
    list; ``stratum`` is the cell's map stratum.
    """

    cell_ids: np.ndarray
    strip_pos: np.ndarray
    stratum: np.ndarray
    y_hat: np.ndarray
    q_hat: np.ndarray
    is_plot: np.ndarray
    e_y: np.ndarray
    e_a: np.ndarray
    a_cell: float

    def __post_init__(self):
        n = len(self.cell_ids)
        for name in ("strip_pos", "stratum", "y_hat", "q_hat", "is_plot", "e_y", "e_a"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"prediction column {name} has wrong length")
        if ((self.q_hat < 0.0) | (self.q_hat > 1.0)).any():
            raise ValueError("q_hat outside [0, 1]")
        if (self.y_hat < 0.0).any():
            raise ValueError("y_hat clamped prediction is negative")
        if np.isfinite(self.e_y[~self.is_plot]).any():
            raise ValueError("residuals present on non-plot cells")


def _fit_ols_line(
    height: np.ndarray, y: np.ndarray, weights: np.ndarray | None = None
) -> tuple[float, float, bool]:
    """(Weighted) least squares of y on height; intercept-only fallback for
    flat heights."""
    w = np.ones_like(height) if weights is None else weights
    w_sum = float(w.sum())
    h_mean = float((w * height).sum()) / w_sum
    y_mean = float((w * y).sum()) / w_sum
    s_hh = float((w * (height - h_mean) ** 2).sum())
    scale = float(np.abs(height).max()) + 1.0
    if s_hh <= 1e-12 * w_sum * scale * scale:
        return y_mean, 0.0, True
    s_hy = float((w * (height - h_mean) * (y - y_mean)).sum())
    slope = s_hy / s_hh
    return y_mean - slope * h_mean, slope, False


def _fit_fractional_logistic(height: np.ndarray, a: np.ndarray) -> tuple[float, float, bool]:
    """IRLS for a binomial-type likelihood with fractional response.

    Returns (intercept, slope, fallback).  Separation (constant response),
    flat heights, and divergence all trigger the constant fallback.
    """
    if np.ptp(a) == 0.0 or np.ptp(height) == 0.0:
        return 0.0, 0.0, True
    mu = np.clip((a + 0.5) / 2.0, 1e-6, 1.0 - 1e-6)
    eta = logit(mu)
    beta = np.zeros(2)
    x = np.column_stack([np.ones_like(height), height])
    for _ in range(_IRLS_MAX_ITER):
        mu = np.clip(expit(eta), 1e-10, 1.0 - 1e-10)
        w = mu * (1.0 - mu)
        z = eta + (a - mu) / w
        xtw = x.T * w
        try:
            new_beta = np.linalg.solve(xtw @ x, xtw @ z)
        except np.linalg.LinAlgError:
            return 0.0, 0.0, True
        if not np.isfinite(new_beta).all():
            return 0.0, 0.0, True
        eta = x @ new_beta
        if np.abs(eta).max() > _ETA_LIMIT:
            return 0.0, 0.0, True
        delta = np.abs(new_beta - beta).max()
        beta = new_beta
        if delta < _IRLS_TOL:
            break
    return float(beta[0]), float(beta[1]), False


def fit_working_models(height: np.ndarray, y: np.ndarray, a: np.ndarray) -> WorkingModels:
    """Fit both models on one replicate's field plots.

    The biomass line is fit on the plots inside the domain (a > 0): it
    models the attribute where the domain attribute exists, and the domain
    model supplies membership, mirroring how the composite prediction
    q_hat * y_hat is consumed.  (Fitting on the off-domain zeros as well
    would fold domain membership into the line a second time.)  Requires at
    least 3 plots; fitting is deterministic.
    """
    height = np.asarray(height, dtype=float)
    y = np.asarray(y, dtype=float)
    a = np.asarray(a, dtype=float)
    if len(height) < 3:
        raise ModelFitError(f"need at least 3 field plots to fit, got {len(height)}")
    in_domain = a > 0.0
    if in_domain.sum() >= 3:
        b0, b1, biomass_fallback = _fit_ols_line(height[in_domain], y[in_domain])
    else:
        b0, b1, biomass_fallback = _fit_ols_line(height, y)
    g0, g1, domain_fallback = _fit_fractional_logistic(height, a)
    return WorkingModels(
        biomass_intercept=b0,
        biomass_slope=b1,
        domain_intercept=g0,
        domain_slope=g1,
        n_fit=len(height),
        biomass_fallback=biomass_fallback,
        domain_fallback=domain_fallback,
        domain_constant=float(a.mean()) if domain_fallback else None,
    )


def make_predictions(
    models: WorkingModels, frame: PopulationFrame, sample: TwoStageSample
) -> PlotPredictions:
    """Predict every cell of the selected strips and attach plot residuals.

    e_y = y - q_hat * y_hat (Mg/ha): the deviation between the measured value
    and the composite domain-weighted prediction.  e_a = (a - q_hat) * a_cell
    (ha): the deviation in predicted cell area within the domain.
    """
    cell_ids = np.concatenate(sample.strip_cells)
    strip_pos = np.repeat(np.arange(sample.m), sample.N_i)
    height = frame.lidar_height[cell_ids]
    y_hat = models.predict_biomass(height)
    q_hat = models.predict_domain(height)

    is_plot = np.zeros(len(cell_ids), dtype=bool)
    offsets = np.concatenate([[0], np.cumsum(sample.N_i)])
    for j, plot_cells in enumerate(sample.plot_cells):
        # strip_cells is ordered along the strip, not by cell id
        block = sample.strip_cells[j]
        order = np.argsort(block)
        idx = order[np.searchsorted(block[order], plot_cells)]
        is_plot[offsets[j] + idx] = True

    e_y = np.full(len(cell_ids), np.nan)
    e_a = np.full(len(cell_ids), np.nan)
    plot_mask = is_plot
    y_obs = frame.biomass_density[cell_ids[plot_mask]]
    a_obs = frame.domain_proportion[cell_ids[plot_mask]]
    e_y[plot_mask] = y_obs - q_hat[plot_mask] * y_hat[plot_mask]
    e_a[plot_mask] = (a_obs - q_hat[plot_mask]) * frame.a_cell

    return PlotPredictions(
        cell_ids=cell_ids,
        strip_pos=strip_pos,
        stratum=frame.stratum_id[cell_ids],
        y_hat=y_hat,
        q_hat=q_hat,
        is_plot=is_plot,
        e_y=e_y,
        e_a=e_a,
        a_cell=frame.a_cell,
    )
