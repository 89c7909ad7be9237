"""Finite-population data model and synthetic population generation.

The population is a grid of plot-sized cells organised into strips (the
primary sampling units) and map strata.  Synthetic populations are generated
from a Gaussian copula over (stratum, lidar height, biomass density, domain
fraction), with the domain proportion replaced by a Bernoulli-gated fraction
driven by a logistic link on lidar height, and laid out spatially by matching
cells to copula draws along a smooth random cover surface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping

import numpy as np
from scipy import stats
from scipy.special import expit, ndtr

from .errors import FrameValidationError, SpecValidationError

_MARGINAL_FAMILIES = ("constant", "lognormal", "gamma", "zero_inflated_gamma", "beta")

# Columns of the frame file, in order.
FRAME_COLUMNS = (
    "cell_id",
    "strip_id",
    "stratum_id",
    "lidar_height",
    "biomass_density",
    "domain_proportion",
    "x_km",
    "y_km",
)


@dataclass(frozen=True)
class MarginalSpec:
    """One marginal distribution of the copula pool.

    Supported families and their parameters:

    - ``constant``: value
    - ``lognormal``: median (> 0), sigma (> 0)
    - ``gamma``: shape (> 0), scale (> 0)
    - ``zero_inflated_gamma``: zero_prob in [0, 1), shape, scale
    - ``beta``: alpha (> 0), beta (> 0)
    """

    family: str
    params: Mapping[str, float]

    def __post_init__(self):
        if self.family not in _MARGINAL_FAMILIES:
            raise SpecValidationError(
                f"unknown marginal family {self.family!r}; expected one of {_MARGINAL_FAMILIES}"
            )
        required = {
            "constant": ("value",),
            "lognormal": ("median", "sigma"),
            "gamma": ("shape", "scale"),
            "zero_inflated_gamma": ("zero_prob", "shape", "scale"),
            "beta": ("alpha", "beta"),
        }[self.family]
        missing = [k for k in required if k not in self.params]
        extra = [k for k in self.params if k not in required]
        if missing or extra:
            raise SpecValidationError(
                f"marginal {self.family!r}: missing params {missing}, unexpected params {extra}"
            )
        p = self.params
        if self.family == "lognormal" and (p["median"] <= 0 or p["sigma"] <= 0):
            raise SpecValidationError("lognormal marginal requires median > 0 and sigma > 0")
        if self.family == "gamma" and (p["shape"] <= 0 or p["scale"] <= 0):
            raise SpecValidationError("gamma marginal requires shape > 0 and scale > 0")
        if self.family == "zero_inflated_gamma":
            if not (0.0 <= p["zero_prob"] < 1.0):
                raise SpecValidationError("zero_inflated_gamma requires zero_prob in [0, 1)")
            if p["shape"] <= 0 or p["scale"] <= 0:
                raise SpecValidationError("zero_inflated_gamma requires shape > 0 and scale > 0")
        if self.family == "beta" and (p["alpha"] <= 0 or p["beta"] <= 0):
            raise SpecValidationError("beta marginal requires alpha > 0 and beta > 0")

    def quantile(self, u: np.ndarray) -> np.ndarray:
        """Inverse CDF evaluated at uniform draws ``u``."""
        p = self.params
        if self.family == "constant":
            return np.full_like(u, float(p["value"]))
        if self.family == "lognormal":
            return stats.lognorm.ppf(u, s=p["sigma"], scale=p["median"])
        if self.family == "gamma":
            return stats.gamma.ppf(u, a=p["shape"], scale=p["scale"])
        if self.family == "zero_inflated_gamma":
            z = p["zero_prob"]
            out = np.zeros_like(u)
            hot = u > z
            out[hot] = stats.gamma.ppf((u[hot] - z) / (1.0 - z), a=p["shape"], scale=p["scale"])
            return out
        if self.family == "beta":
            return stats.beta.ppf(u, a=p["alpha"], b=p["beta"])
        raise AssertionError(self.family)

    @property
    def is_constant(self) -> bool:
        return self.family == "constant"


@dataclass(frozen=True)
class GridSpec:
    """Spatial layout: parallel strips of cells on a rectangular lattice.

    Strip lengths can vary smoothly across the area (``length_variation`` is
    the maximum relative shortening of a strip), which gives the unequal PSU
    sizes the ratio estimators are designed for.
    """

    strips: int
    cells_per_strip: int
    strip_spacing_km: float = 2.0
    cell_spacing_km: float = 0.2
    length_variation: float = 0.0

    def __post_init__(self):
        if self.strips < 2:
            raise SpecValidationError("grid needs at least 2 strips")
        if self.cells_per_strip < 2:
            raise SpecValidationError("grid needs at least 2 cells per strip")
        if self.strip_spacing_km <= 0 or self.cell_spacing_km <= 0:
            raise SpecValidationError("grid spacings must be positive")
        if not (0.0 <= self.length_variation < 1.0):
            raise SpecValidationError("length_variation must lie in [0, 1)")


@dataclass(frozen=True)
class CopulaSpec:
    """Everything needed to generate one synthetic population.

    ``correlation`` is the 4x4 target correlation matrix over
    (stratum, lidar_height, biomass, domain_proportion), measured on the
    finished population.  Because the marginal transforms and the Bernoulli
    domain gate distort latent Gaussian correlations, generation calibrates
    the latent matrix iteratively until the realized Pearson correlations
    match the target (``calibration_rounds`` fixed-point steps).
    """

    correlation: np.ndarray
    stratum_probs: tuple[float, ...]
    height: MarginalSpec
    biomass: MarginalSpec
    domain_fraction: MarginalSpec
    domain_link: tuple[float, float]
    pool_size: int
    grid: GridSpec
    a_cell_ha: float
    calibration_rounds: int = 8

    def __post_init__(self):
        corr = np.asarray(self.correlation, dtype=float)
        object.__setattr__(self, "correlation", corr)
        if corr.shape != (4, 4):
            raise SpecValidationError("correlation must be a 4x4 matrix")
        if not np.allclose(corr, corr.T, atol=1e-12):
            raise SpecValidationError("correlation matrix is not symmetric")
        if not np.allclose(np.diag(corr), 1.0, atol=1e-12):
            raise SpecValidationError("correlation matrix must have unit diagonal")
        try:
            np.linalg.cholesky(corr)
        except np.linalg.LinAlgError:
            raise SpecValidationError("correlation matrix is not positive definite") from None
        probs = tuple(float(p) for p in self.stratum_probs)
        object.__setattr__(self, "stratum_probs", probs)
        if len(probs) < 1 or any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-9:
            raise SpecValidationError("stratum_probs must be non-negative and sum to 1")
        g0, g1 = self.domain_link
        if math.isnan(g0) or not math.isfinite(g1):
            raise SpecValidationError("domain_link slope must be finite and intercept non-NaN")
        if self.pool_size < 1000:
            raise SpecValidationError("pool_size must be at least 1000")
        if self.a_cell_ha <= 0:
            raise SpecValidationError("a_cell_ha must be positive")
        if self.calibration_rounds < 0:
            raise SpecValidationError("calibration_rounds must be >= 0")

    @property
    def n_strata(self) -> int:
        return len(self.stratum_probs)


@dataclass(frozen=True)
class CellRecord:
    """Row-level view of one grid cell."""

    cell_id: int
    strip_id: int
    stratum_id: int
    lidar_height: float
    biomass_density: float
    domain_proportion: float
    x_km: float
    y_km: float


@dataclass(frozen=True)
class TruthValues:
    """Known population parameters: domain total (Mg), area (ha), density (Mg/ha)."""

    total_mg: float
    area_ha: float
    density_mg_per_ha: float

    def for_target(self, target: str) -> float:
        return {
            "total": self.total_mg,
            "area": self.area_ha,
            "density": self.density_mg_per_ha,
        }[target]


@dataclass(frozen=True)
class PopulationFrame:
    """Immutable finite population of grid cells.

    Count attributes (``N``, ``N_i``, ``N_h``, ``N_hi``, ``W_h``, ``A_T``) are
    derived from the cell arrays on construction and validated against the
    type invariants.  All arrays are read-only; the frame is safe for
    concurrent use by simulation workers.
    """

    strip_id: np.ndarray
    stratum_id: np.ndarray
    lidar_height: np.ndarray
    biomass_density: np.ndarray
    domain_proportion: np.ndarray
    x_km: np.ndarray
    y_km: np.ndarray
    M: int
    H: int
    a_cell: float
    N: int = field(init=False)
    N_i: np.ndarray = field(init=False)
    N_h: np.ndarray = field(init=False)
    N_hi: np.ndarray = field(init=False)
    W_h: np.ndarray = field(init=False)
    A_T: float = field(init=False)
    strip_cells: tuple = field(init=False, repr=False)

    def __post_init__(self):
        set_ = object.__setattr__
        arrays = {
            "strip_id": np.asarray(self.strip_id, dtype=np.int64),
            "stratum_id": np.asarray(self.stratum_id, dtype=np.int64),
            "lidar_height": np.asarray(self.lidar_height, dtype=float),
            "biomass_density": np.asarray(self.biomass_density, dtype=float),
            "domain_proportion": np.asarray(self.domain_proportion, dtype=float),
            "x_km": np.asarray(self.x_km, dtype=float),
            "y_km": np.asarray(self.y_km, dtype=float),
        }
        n = arrays["strip_id"].shape[0]
        for name, arr in arrays.items():
            if arr.shape != (n,):
                raise FrameValidationError(f"column {name} has shape {arr.shape}, expected ({n},)")
            arr.setflags(write=False)
            set_(self, name, arr)
        if n == 0:
            raise FrameValidationError("frame has no cells")
        if self.M < 1 or self.H < 1:
            raise FrameValidationError("M and H must be at least 1")
        if self.a_cell <= 0:
            raise FrameValidationError("a_cell must be positive")
        self._check_cells()
        set_(self, "N", n)
        set_(self, "N_i", np.bincount(self.strip_id, minlength=self.M))
        set_(self, "N_h", np.bincount(self.stratum_id, minlength=self.H))
        n_hi = np.zeros((self.M, self.H), dtype=np.int64)
        np.add.at(n_hi, (self.strip_id, self.stratum_id), 1)
        set_(self, "N_hi", n_hi)
        set_(self, "W_h", self.N_h / n)
        set_(self, "A_T", n * self.a_cell)
        for name in ("N_i", "N_h", "N_hi", "W_h"):
            getattr(self, name).setflags(write=False)
        # Cells of each strip in along-strip order, used by the sampling designs.
        order = np.lexsort((np.arange(n), self.y_km, self.strip_id))
        bounds = np.searchsorted(self.strip_id[order], np.arange(self.M + 1))
        cells = tuple(order[bounds[i]:bounds[i + 1]] for i in range(self.M))
        for c in cells:
            c.setflags(write=False)
        set_(self, "strip_cells", cells)

    def _check_cells(self):
        bad = np.flatnonzero((self.strip_id < 0) | (self.strip_id >= self.M))
        if bad.size:
            raise FrameValidationError(
                f"cell {bad[0]}: strip_id {self.strip_id[bad[0]]} outside [0, {self.M})"
            )
        bad = np.flatnonzero((self.stratum_id < 0) | (self.stratum_id >= self.H))
        if bad.size:
            raise FrameValidationError(
                f"cell {bad[0]}: stratum_id {self.stratum_id[bad[0]]} outside [0, {self.H})"
            )
        a = self.domain_proportion
        bad = np.flatnonzero((a < 0.0) | (a > 1.0) | ~np.isfinite(a))
        if bad.size:
            raise FrameValidationError(
                f"cell {bad[0]}: domain_proportion {a[bad[0]]} outside [0, 1]"
            )
        y = self.biomass_density
        bad = np.flatnonzero((y < 0.0) | ~np.isfinite(y))
        if bad.size:
            raise FrameValidationError(f"cell {bad[0]}: biomass_density {y[bad[0]]} is negative")
        bad = np.flatnonzero((a == 0.0) & (y != 0.0))
        if bad.size:
            raise FrameValidationError(
                f"cell {bad[0]}: biomass_density {y[bad[0]]} nonzero with domain_proportion 0"
            )
        if not (np.isfinite(self.lidar_height).all() and (self.lidar_height >= 0).all()):
            raise FrameValidationError("lidar_height must be finite and non-negative")

    def cell(self, k: int) -> CellRecord:
        return CellRecord(
            cell_id=int(k),
            strip_id=int(self.strip_id[k]),
            stratum_id=int(self.stratum_id[k]),
            lidar_height=float(self.lidar_height[k]),
            biomass_density=float(self.biomass_density[k]),
            domain_proportion=float(self.domain_proportion[k]),
            x_km=float(self.x_km[k]),
            y_km=float(self.y_km[k]),
        )

    def cells(self) -> Iterator[CellRecord]:
        return (self.cell(k) for k in range(self.N))


def enumerate_truth(frame: PopulationFrame) -> TruthValues:
    """Full-enumeration population parameters (no sampling involved)."""
    total = frame.a_cell * float(frame.biomass_density.sum())
    area = frame.a_cell * float(frame.domain_proportion.sum())
    if area == 0.0:
        raise FrameValidationError("domain area is zero; density is undefined")
    return TruthValues(total_mg=total, area_ha=area, density_mg_per_ha=total / area)


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------


def _nearest_correlation(matrix: np.ndarray) -> np.ndarray:
    """Project a symmetric matrix to a positive-definite correlation matrix."""
    sym = (matrix + matrix.T) / 2.0
    vals, vecs = np.linalg.eigh(sym)
    vals = np.clip(vals, 1e-6, None)
    fixed = (vecs * vals) @ vecs.T
    d = np.sqrt(np.diag(fixed))
    fixed = fixed / np.outer(d, d)
    np.fill_diagonal(fixed, 1.0)
    return fixed


def _transform_pool(
    spec: CopulaSpec, z: np.ndarray, gate_u: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Map latent Gaussian draws to the final pool variables.

    Applies the marginal quantile transforms, the Bernoulli domain gate on
    the logistic link, and the "zero biomass off the domain" restriction.
    """
    u = ndtr(z)
    thresholds = np.cumsum(spec.stratum_probs)
    stratum = np.searchsorted(thresholds, u[:, 0], side="left")
    stratum = np.minimum(stratum, spec.n_strata - 1)
    height = spec.height.quantile(u[:, 1])
    biomass = spec.biomass.quantile(u[:, 2])
    fraction = np.clip(spec.domain_fraction.quantile(u[:, 3]), 0.0, 1.0)
    g0, g1 = spec.domain_link
    p_domain = expit(g0 + g1 * height)
    in_domain = gate_u < p_domain
    domain = np.where(in_domain, fraction, 0.0)
    biomass = np.where(domain > 0.0, biomass, 0.0)
    return stratum.astype(np.int64), height, biomass, domain


def _pool_correlations(columns: list[np.ndarray]) -> np.ndarray:
    """Pearson correlations, NaN where either column is (near-)constant."""
    k = len(columns)
    out = np.full((k, k), np.nan)
    sds = [float(np.std(c)) for c in columns]
    means = [float(np.mean(c)) for c in columns]
    for i in range(k):
        out[i, i] = 1.0
        for j in range(i + 1, k):
            if sds[i] < 1e-12 or sds[j] < 1e-12:
                continue
            cov = float(np.mean(columns[i] * columns[j])) - means[i] * means[j]
            out[i, j] = out[j, i] = cov / (sds[i] * sds[j])
    return out


def _calibrate_latent(spec: CopulaSpec, seed_seq: np.random.SeedSequence) -> np.ndarray:
    """Find a latent Gaussian correlation whose transformed pool hits the target.

    Fixed-point iteration on the same base normals: measure the realized
    Pearson matrix, shift each latent entry by its residual to the target,
    and re-project to positive definite.  Pairs involving a constant marginal
    are left untouched.
    """
    target = spec.correlation
    latent = _nearest_correlation(target.copy())
    if spec.calibration_rounds == 0:
        return latent
    rng = np.random.default_rng(seed_seq)
    n = min(spec.pool_size, 100_000)
    z_base = rng.standard_normal((n, 4))
    gate_u = rng.random(n)
    for _ in range(spec.calibration_rounds):
        chol = np.linalg.cholesky(latent)
        stratum, height, biomass, domain = _transform_pool(spec, z_base @ chol.T, gate_u)
        achieved = _pool_correlations([stratum.astype(float), height, biomass, domain])
        shift = target - achieved
        shift[~np.isfinite(shift)] = 0.0
        latent = _nearest_correlation(np.clip(latent + shift, -0.99, 0.99))
    return latent


def _strip_lengths(grid: GridSpec, rng: np.random.Generator) -> np.ndarray:
    """Smoothly varying cell counts per strip (unequal PSU sizes)."""
    base = grid.cells_per_strip
    if grid.length_variation == 0.0:
        return np.full(grid.strips, base, dtype=np.int64)
    x = np.arange(grid.strips) / grid.strips
    profile = np.zeros(grid.strips)
    for freq in (1.0, 2.0, 3.0):
        profile += rng.uniform(0.2, 1.0) * np.cos(2.0 * np.pi * freq * x + rng.uniform(0, 2 * np.pi))
    lo, hi = profile.min(), profile.max()
    profile = (profile - lo) / (hi - lo) if hi > lo else np.zeros_like(profile)
    lengths = base - np.floor(grid.length_variation * base * profile).astype(np.int64)
    return np.maximum(lengths, 2)


def _cover_surface(x: np.ndarray, y: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Low-frequency random surface used to place pool plots in space.

    Along-strip waves dominate, with a moderate fixed-share cross-strip
    component: cells are autocorrelated along strips and whole strips differ
    from one another by a controlled amount, whatever the random wave
    orientations turn out to be.
    """
    extent = max(x.max() - x.min(), y.max() - y.min(), 1e-9)
    cover = np.zeros_like(x)
    for _ in range(6):
        wavelength = rng.uniform(0.15, 0.5) * extent
        phase = rng.uniform(0.0, 2.0 * np.pi)
        amp = rng.uniform(0.5, 1.0)
        cover += amp * np.cos(2.0 * np.pi * y / wavelength + phase)
    # Many fixed-amplitude short waves carry the cross-strip variation, so
    # the between-strip variance they add is close to its expectation for
    # any draw of phases and wavelengths.
    for _ in range(10):
        wavelength = rng.uniform(0.04, 0.12) * extent
        phase = rng.uniform(0.0, 2.0 * np.pi)
        cover += 0.12 * np.cos(2.0 * np.pi * x / wavelength + phase)
    return cover


def generate_population(spec: CopulaSpec, seed: int) -> PopulationFrame:
    """Generate a synthetic population; deterministic for a fixed (spec, seed).

    Steps: calibrate the latent copula correlation, draw the plot pool,
    lay out the strip grid, and assign pool plots to grid cells by matching
    cover-surface ranks to pool plots ordered by their domain probability
    (a stand-in for imputation against a mapped cover layer: it preserves the
    pool's joint distribution while making all attributes vary smoothly in
    space).
    """
    root = np.random.SeedSequence(seed)
    calib_seq, pool_seq, layout_seq = root.spawn(3)

    latent = _calibrate_latent(spec, calib_seq)
    pool_rng = np.random.default_rng(pool_seq)
    chol = np.linalg.cholesky(latent)
    z = pool_rng.standard_normal((spec.pool_size, 4))
    gate_u = pool_rng.random(spec.pool_size)
    stratum, height, biomass, domain = _transform_pool(spec, z @ chol.T, gate_u)

    layout_rng = np.random.default_rng(layout_seq)
    grid = spec.grid
    lengths = _strip_lengths(grid, layout_rng)
    strip_ids = np.repeat(np.arange(grid.strips, dtype=np.int64), lengths)
    # Random placement of each strip's window keeps strip length independent
    # of where the strip sits relative to the cover surface.
    starts = (layout_rng.random(grid.strips) * (grid.cells_per_strip - lengths + 1)).astype(
        np.int64
    )
    row = np.concatenate([starts[i] + np.arange(lengths[i]) for i in range(grid.strips)])
    x = strip_ids * grid.strip_spacing_km
    y = row * grid.cell_spacing_km

    cover = _cover_surface(x, y, layout_rng)
    n_cells = x.shape[0]
    ranks = np.empty(n_cells, dtype=np.int64)
    ranks[np.argsort(cover, kind="stable")] = np.arange(n_cells)
    quantile = (ranks + 0.5) / n_cells

    # The cover proxy is the plot's map stratum (an ordinal cover class):
    # matching cover ranks against the stratum-ordered pool lays the strata
    # out in smooth map-like bands, while cells within a stratum receive
    # plots in pool (i.e. random) order.  Rank matching is a uniform
    # subsample of the pool, so the pool's joint distribution is preserved.
    by_proxy = np.argsort(stratum, kind="stable")
    assigned = by_proxy[np.minimum((quantile * spec.pool_size).astype(np.int64), spec.pool_size - 1)]

    return PopulationFrame(
        strip_id=strip_ids,
        stratum_id=stratum[assigned],
        lidar_height=height[assigned],
        biomass_density=biomass[assigned],
        domain_proportion=domain[assigned],
        x_km=x,
        y_km=y,
        M=grid.strips,
        H=spec.n_strata,
        a_cell=spec.a_cell_ha,
    )


# ---------------------------------------------------------------------------
# Frame file I/O
# ---------------------------------------------------------------------------


def save_frame(frame: PopulationFrame, path) -> None:
    """Write the frame as delimited text: '#' metadata lines, a one-line
    column header, then one row per cell.  Floats use shortest round-trip
    formatting so load(save(frame)) is bit-exact."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# stripsurvey frame v1\n")
        fh.write(
            f"# a_cell_ha={frame.a_cell!r} M={frame.M} H={frame.H} N={frame.N}\n"
        )
        fh.write("# N_i=" + ",".join(str(int(v)) for v in frame.N_i) + "\n")
        fh.write("# N_h=" + ",".join(str(int(v)) for v in frame.N_h) + "\n")
        fh.write(",".join(FRAME_COLUMNS) + "\n")
        ints = (frame.strip_id, frame.stratum_id)
        floats = (
            frame.lidar_height,
            frame.biomass_density,
            frame.domain_proportion,
            frame.x_km,
            frame.y_km,
        )
        for k in range(frame.N):
            row = [str(k)]
            row += [str(int(c[k])) for c in ints]
            row += [repr(float(c[k])) for c in floats]
            fh.write(",".join(row) + "\n")


def _parse_metadata(lines: list[str]) -> dict:
    meta: dict = {}
    for line in lines:
        body = line[1:].strip()
        for token in body.split():
            if "=" not in token:
                continue
            key, value = token.split("=", 1)
            meta[key] = value
    return meta


def load_frame(path) -> PopulationFrame:
    """Load a frame file, validating metadata, rows, and frame invariants.

    Errors carry row-level diagnostics (the offending cell or strip).
    """
    header_lines: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        header_lines.append(lines[i])
        i += 1
    meta = _parse_metadata(header_lines)
    for key in ("a_cell_ha", "M", "H", "N"):
        if key not in meta:
            raise FrameValidationError(f"frame file missing metadata key {key!r}")
    a_cell = float(meta["a_cell_ha"])
    m_strips = int(meta["M"])
    n_strata = int(meta["H"])
    n_declared = int(meta["N"])
    if i >= len(lines):
        raise FrameValidationError("frame file has no column header")
    header = tuple(lines[i].split(","))
    if header != FRAME_COLUMNS:
        raise FrameValidationError(
            f"unexpected column header {header}; expected {FRAME_COLUMNS}"
        )
    rows = lines[i + 1:]
    rows = [r for r in rows if r != ""]
    if len(rows) != n_declared:
        raise FrameValidationError(
            f"frame file declares N={n_declared} but contains {len(rows)} rows"
        )
    data = np.empty((len(rows), 8), dtype=float)
    for r, line in enumerate(rows):
        parts = line.split(",")
        if len(parts) != 8:
            raise FrameValidationError(f"row {r}: expected 8 fields, found {len(parts)}")
        try:
            data[r] = [float(p) for p in parts]
        except ValueError as exc:
            raise FrameValidationError(f"row {r}: {exc}") from None
    cell_id = data[:, 0].astype(np.int64)
    if not np.array_equal(cell_id, np.arange(len(rows))):
        bad = int(np.flatnonzero(cell_id != np.arange(len(rows)))[0])
        raise FrameValidationError(f"row {bad}: cell_id must run 0..N-1 in order")
    frame = PopulationFrame(
        strip_id=data[:, 1].astype(np.int64),
        stratum_id=data[:, 2].astype(np.int64),
        lidar_height=data[:, 3],
        biomass_density=data[:, 4],
        domain_proportion=data[:, 5],
        x_km=data[:, 6],
        y_km=data[:, 7],
        M=m_strips,
        H=n_strata,
        a_cell=a_cell,
    )
    if "N_i" in meta:
        declared = np.array([int(v) for v in meta["N_i"].split(",")], dtype=np.int64)
        if declared.shape != (m_strips,):
            raise FrameValidationError("metadata N_i length does not match M")
        diff = np.flatnonzero(declared != frame.N_i)
        if diff.size:
            s = int(diff[0])
            raise FrameValidationError(
                f"strip {s}: file declares N_i={declared[s]} but contains {frame.N_i[s]} cells"
            )
    if "N_h" in meta:
        declared = np.array([int(v) for v in meta["N_h"].split(",")], dtype=np.int64)
        if declared.shape != (n_strata,):
            raise FrameValidationError("metadata N_h length does not match H")
        diff = np.flatnonzero(declared != frame.N_h)
        if diff.size:
            h = int(diff[0])
            raise FrameValidationError(
                f"stratum {h}: file declares N_h={declared[h]} but contains {frame.N_h[h]} cells"
            )
    return frame
