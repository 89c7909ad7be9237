"""Hand-tabulated fixtures shared by the estimator and acceptance tests.

T0: pooled-plot fixture for the poststratified mean estimators (2 strata).
T1: two-stage fixture for the ratio family (population of 4 strips, 3
selected, 2 strata), engineered to hit every counting convention at once:
a (strip, stratum) cell with cells but no plots, one with exactly one plot,
and one strip the second stratum is absent from.
MICRO: the worked single-stratum example with known strip sums.

Each fixture exposes both the package-facing objects (sample, predictions)
and the plain dict inputs of tests/reference_formulas.py.
"""

from dataclasses import dataclass

import numpy as np

from stripsurvey.design import TwoStageSample
from stripsurvey.models import PlotPredictions


@dataclass
class TwoStageFixture:
    sample: TwoStageSample
    preds: PlotPredictions
    stratum_n: np.ndarray
    # reference-formula inputs
    strips: list
    strata: list
    pred_y: dict
    pred_a: dict
    sizes: dict
    n_plots: dict
    resid_y: dict
    resid_a: dict
    strip_pred_y: dict
    strip_pred_a: dict
    strip_sizes: dict
    strip_n: dict
    strip_resid_y: dict
    strip_resid_a: dict


def _build(sample_strips, all_m, all_n, n_strata, stratum_n, cells, plots, a_cell=1.0):
    """Assemble sample/predictions plus reference inputs from per-cell rows.

    ``cells[j]`` is a list of (stratum, q_hat, y_hat) for strip j;
    ``plots[j]`` maps cell position -> (y_obs, a_obs).
    """
    m = len(sample_strips)
    n_i = np.array([len(c) for c in cells], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(n_i)])
    total_cells = int(n_i.sum())

    strat = np.concatenate([[row[0] for row in c] for c in cells]).astype(np.int64)
    q_hat = np.concatenate([[row[1] for row in c] for c in cells]).astype(float)
    y_hat = np.concatenate([[row[2] for row in c] for c in cells]).astype(float)
    strip_pos = np.repeat(np.arange(m), n_i)
    cell_ids = np.arange(total_cells, dtype=np.int64)

    is_plot = np.zeros(total_cells, dtype=bool)
    e_y = np.full(total_cells, np.nan)
    e_a = np.full(total_cells, np.nan)
    for j, plot_map in enumerate(plots):
        for pos, (y_obs, a_obs) in plot_map.items():
            k = offsets[j] + pos
            is_plot[k] = True
            e_y[k] = y_obs - q_hat[k] * y_hat[k]
            e_a[k] = (a_obs - q_hat[k]) * a_cell

    n_hi = np.zeros((m, n_strata), dtype=np.int64)
    big_n_hi = np.zeros((m, n_strata), dtype=np.int64)
    for j in range(m):
        for pos, row in enumerate(cells[j]):
            big_n_hi[j, row[0]] += 1
            if pos in plots[j]:
                n_hi[j, row[0]] += 1

    sample = TwoStageSample(
        M=all_m,
        N=all_n,
        H=n_strata,
        strip_ids=np.asarray(sample_strips, dtype=np.int64),
        N_i=n_i,
        N_hi=big_n_hi,
        strip_cells=tuple(cell_ids[offsets[j]:offsets[j + 1]] for j in range(m)),
        plot_cells=tuple(
            np.array(sorted(offsets[j] + pos for pos in plots[j]), dtype=np.int64)
            for j in range(m)
        ),
        n_hi=n_hi,
    )
    preds = PlotPredictions(
        cell_ids=cell_ids,
        strip_pos=strip_pos,
        stratum=strat,
        y_hat=y_hat,
        q_hat=q_hat,
        is_plot=is_plot,
        e_y=e_y,
        e_a=e_a,
        a_cell=a_cell,
    )

    strips = list(sample_strips)
    strata = list(range(n_strata))
    pred_y, pred_a, sizes, n_plots_d = {}, {}, {}, {}
    resid_y, resid_a = {}, {}
    strip_pred_y, strip_pred_a, strip_sizes, strip_n = {}, {}, {}, {}
    strip_resid_y, strip_resid_a = {}, {}
    for j, sid in enumerate(strips):
        strip_pred_y[sid] = sum(r[1] * r[2] for r in cells[j]) * a_cell
        strip_pred_a[sid] = sum(r[1] for r in cells[j]) * a_cell
        strip_sizes[sid] = len(cells[j])
        strip_n[sid] = len(plots[j])
        strip_resid_y[sid] = [
            float(e_y[offsets[j] + pos]) * a_cell for pos in sorted(plots[j])
        ]
        strip_resid_a[sid] = [float(e_a[offsets[j] + pos]) for pos in sorted(plots[j])]
        for h in strata:
            rows = [(pos, r) for pos, r in enumerate(cells[j]) if r[0] == h]
            if not rows:
                continue
            pred_y[(sid, h)] = sum(r[1] * r[2] for _, r in rows) * a_cell
            pred_a[(sid, h)] = sum(r[1] for _, r in rows) * a_cell
            sizes[(sid, h)] = len(rows)
            plot_pos = [pos for pos, _ in rows if pos in plots[j]]
            n_plots_d[(sid, h)] = len(plot_pos)
            resid_y[(sid, h)] = [float(e_y[offsets[j] + pos]) * a_cell for pos in sorted(plot_pos)]
            resid_a[(sid, h)] = [float(e_a[offsets[j] + pos]) for pos in sorted(plot_pos)]

    return TwoStageFixture(
        sample=sample,
        preds=preds,
        stratum_n=np.asarray(stratum_n, dtype=np.int64),
        strips=strips,
        strata=strata,
        pred_y=pred_y,
        pred_a=pred_a,
        sizes=sizes,
        n_plots=n_plots_d,
        resid_y=resid_y,
        resid_a=resid_a,
        strip_pred_y=strip_pred_y,
        strip_pred_a=strip_pred_a,
        strip_sizes=strip_sizes,
        strip_n=strip_n,
        strip_resid_y=strip_resid_y,
        strip_resid_a=strip_resid_a,
    )


def make_t1():
    """Two-stage fixture: M=4 strips (N=20 cells), 3 selected, 2 strata."""
    cells = [
        # strip 0: strata pattern 0,0,1,0,1
        [(0, 0.9, 60.0), (0, 0.7, 42.0), (1, 0.45, 35.0), (0, 0.85, 55.0), (1, 0.3, 20.0)],
        # strip 1: strata 0,0,0,0,1,1
        [(0, 0.8, 50.0), (0, 0.95, 70.0), (0, 0.5, 30.0), (0, 0.6, 38.0), (1, 0.35, 22.0), (1, 0.25, 15.0)],
        # strip 3: stratum 1 absent
        [(0, 0.65, 40.0), (0, 0.75, 48.0), (0, 0.55, 33.0), (0, 0.85, 52.0)],
    ]
    plots = [
        {0: (58.0, 1.0), 1: (30.0, 0.6)},            # both stratum 0 -> (0, h=1) unsampled
        {1: (72.0, 1.0), 3: (20.0, 0.45), 4: (11.0, 0.5)},  # (1, h=1) has one plot
        {0: (28.0, 0.8), 3: (47.0, 0.9)},
    ]
    return _build(
        sample_strips=(0, 1, 3),
        all_m=4,
        all_n=20,
        n_strata=2,
        stratum_n=(13, 7),
        cells=cells,
        plots=plots,
    )


def make_micro():
    """Single-stratum worked example: M=3 strips (N=12), 2 selected.

    Known values: per-strip totals 42 and 62.5, ratio total 12*104.5/9,
    ratio areas 3.2 and 4.0 summing to estimate 9.6, density 104.5/7.2.
    """
    cells = [
        [(0, 1.0, 10.0)] * 4,
        [(0, 1.0, 11.0)] * 5,
    ]
    plots = [
        {0: (12.0, 0.9), 1: (9.0, 0.7)},
        {0: (11.0, 0.85), 1: (14.0, 0.75)},
    ]
    return _build(
        sample_strips=(0, 1),
        all_m=3,
        all_n=12,
        n_strata=1,
        stratum_n=(12,),
        cells=cells,
        plots=plots,
    )


def make_t0():
    """Pooled-plot fixture for the poststratified mean estimators."""
    plot_strata = np.array([0, 0, 0, 1, 1])
    y = np.array([31.4, 0.0, 12.8, 55.0, 24.6])
    a = np.array([0.9, 0.0, 0.55, 1.0, 0.7])
    weights = np.array([0.62, 0.38])
    area_total = 480.0
    groups_y = {0: [31.4, 0.0, 12.8], 1: [55.0, 24.6]}
    groups_a = {0: [0.9, 0.0, 0.55], 1: [1.0, 0.7]}
    return plot_strata, y, a, weights, area_total, groups_y, groups_a
