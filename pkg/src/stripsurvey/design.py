"""Two-stage sample selection: strips (PSUs), then field-plot cells (SSUs).

Both stages are without replacement.  The simple random configuration draws
both stages uniformly; the systematic configuration takes every k-th strip
from a uniformly random start (wrapping modulo M) and every k-th cell along
each selected strip, which keeps every unit's inclusion probability exactly
m/M (respectively n_i/N_i).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DesignError
from .frame import PopulationFrame

MODE_SRS = "srs"
MODE_SYSTEMATIC = "systematic"


@dataclass(frozen=True)
class DesignConfig:
    """One sampling configuration.

    ``plot_intensity`` is the ratio of field plots to remote-sensing cells
    within selected strips; each strip receives
    ``max(min_plots_per_strip, round(intensity * N_i))`` plots (round half
    up), capped at N_i.  The floor of 2 keeps within-strip residual variances
    defined.
    """

    mode: str
    m: int
    plot_intensity: float
    min_plots_per_strip: int = 2
    seed: int | None = None

    def __post_init__(self):
        if self.mode not in (MODE_SRS, MODE_SYSTEMATIC):
            raise DesignError(f"unknown design mode {self.mode!r}")
        if self.m < 2:
            raise DesignError("m (strips to select) must be at least 2")
        if not (0.0 < self.plot_intensity <= 1.0):
            raise DesignError("plot_intensity must lie in (0, 1]")
        if self.min_plots_per_strip < 2:
            raise DesignError("min_plots_per_strip must be at least 2")


@dataclass(frozen=True)
class TwoStageSample:
    """A realized two-stage draw with all counts the estimators need.

    ``strip_cells[j]`` holds every cell of selected strip j (the lidar stage
    covers whole strips); ``plot_cells[j]`` is the field-plot subset.  Strips
    are stored in ascending strip-id order and plot lists are aligned with
    them.
    """

    M: int
    N: int
    H: int
    strip_ids: np.ndarray
    N_i: np.ndarray
    N_hi: np.ndarray
    strip_cells: tuple
    plot_cells: tuple
    n_hi: np.ndarray
    n_i: np.ndarray = field(init=False)

    def __post_init__(self):
        m = len(self.strip_ids)
        if m < 1:
            raise DesignError("sample has no strips")
        if not (len(self.strip_cells) == len(self.plot_cells) == m):
            raise DesignError("per-strip cell lists do not match the strip count")
        n_i = np.array([len(c) for c in self.plot_cells], dtype=np.int64)
        object.__setattr__(self, "n_i", n_i)
        if (n_i > self.N_i).any():
            raise DesignError("more plots than cells in a strip")
        for j in range(m):
            if len(self.strip_cells[j]) != self.N_i[j]:
                raise DesignError(f"strip {self.strip_ids[j]}: cell list does not match N_i")
            if len(np.unique(self.plot_cells[j])) != n_i[j]:
                raise DesignError(f"strip {self.strip_ids[j]}: plots drawn with replacement")
        if self.N_hi.shape != (m, self.H) or self.n_hi.shape != (m, self.H):
            raise DesignError("per-stratum count matrices must have shape (m, H)")
        if (self.N_hi.sum(axis=1) != self.N_i).any():
            raise DesignError("per-stratum cell counts do not partition N_i")
        if (self.n_hi.sum(axis=1) != n_i).any():
            raise DesignError("per-stratum plot counts do not partition n_i")

    @property
    def m(self) -> int:
        return len(self.strip_ids)

    @property
    def n(self) -> int:
        return int(self.n_i.sum())

    def all_plot_cells(self) -> np.ndarray:
        return np.concatenate(self.plot_cells)


def _finish_sample(frame: PopulationFrame, strips: np.ndarray, plots: list) -> TwoStageSample:
    """Assemble a sample from sorted strip ids and aligned plot lists."""
    n_hi = np.zeros((len(strips), frame.H), dtype=np.int64)
    for j, cells in enumerate(plots):
        np.add.at(n_hi, (j, frame.stratum_id[cells]), 1)
    return TwoStageSample(
        M=frame.M,
        N=frame.N,
        H=frame.H,
        strip_ids=strips,
        N_i=frame.N_i[strips],
        N_hi=frame.N_hi[strips, :],
        strip_cells=tuple(frame.strip_cells[s] for s in strips),
        plot_cells=tuple(plots),
        n_hi=n_hi,
    )


def _plots_per_strip(n_cells: int, cfg: DesignConfig, strip: int) -> int:
    if n_cells < cfg.min_plots_per_strip:
        raise DesignError(
            f"strip {strip} has only {n_cells} cells, fewer than "
            f"min_plots_per_strip={cfg.min_plots_per_strip}"
        )
    wanted = int(np.floor(cfg.plot_intensity * n_cells + 0.5))
    return min(max(cfg.min_plots_per_strip, wanted), n_cells)


def _require(frame: PopulationFrame, cfg: DesignConfig, mode: str):
    if cfg.mode != mode:
        raise DesignError(f"config mode is {cfg.mode!r}, expected {mode!r}")
    if cfg.m > frame.M:
        raise DesignError(f"cannot select m={cfg.m} strips from M={frame.M}")


def draw_srs(frame: PopulationFrame, cfg: DesignConfig, rng: np.random.Generator) -> TwoStageSample:
    """Simple random sampling without replacement in both stages."""
    _require(frame, cfg, MODE_SRS)
    strips = np.sort(rng.choice(frame.M, size=cfg.m, replace=False))
    plots = []
    for s in strips:
        cells = frame.strip_cells[s]
        n_i = _plots_per_strip(len(cells), cfg, int(s))
        pick = np.sort(rng.choice(len(cells), size=n_i, replace=False))
        plots.append(cells[pick])
    return _finish_sample(frame, strips, plots)


def draw_systematic(
    frame: PopulationFrame, cfg: DesignConfig, rng: np.random.Generator
) -> TwoStageSample:
    """Every floor(M/m)-th strip from a uniform random start (mod M), and
    every floor(N_i/n_i)-th cell along each strip from a per-strip start."""
    _require(frame, cfg, MODE_SYSTEMATIC)
    step = frame.M // cfg.m
    start = int(rng.integers(frame.M))
    strips = np.sort((start + step * np.arange(cfg.m)) % frame.M)
    if len(np.unique(strips)) != cfg.m:
        raise DesignError(f"systematic strip step {step} cannot yield {cfg.m} distinct strips")
    plots = []
    for s in strips:
        cells = frame.strip_cells[s]
        n_cells = len(cells)
        n_i = _plots_per_strip(n_cells, cfg, int(s))
        step2 = n_cells // n_i
        start2 = int(rng.integers(n_cells))
        pos = np.sort((start2 + step2 * np.arange(n_i)) % n_cells)
        plots.append(cells[pos])
    return _finish_sample(frame, strips, plots)


def draw(
    frame: PopulationFrame, cfg: DesignConfig, rng: np.random.Generator | None = None
) -> TwoStageSample:
    """Dispatch on the configured mode; builds an RNG from cfg.seed if needed."""
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed or 0))
    if cfg.mode == MODE_SRS:
        return draw_srs(frame, cfg, rng)
    return draw_systematic(frame, cfg, rng)
