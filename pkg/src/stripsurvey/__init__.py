"""Design-based estimation and simulation for two-stage strip-sampling surveys."""

__version__ = "0.1.0"

from .design import (
    MODE_SRS,
    MODE_SYSTEMATIC,
    DesignConfig,
    TwoStageSample,
    draw,
    draw_srs,
    draw_systematic,
)
from .errors import (
    ConfigError,
    DesignError,
    EstimationError,
    FrameValidationError,
    ModelFitError,
    SimulationError,
    SpecValidationError,
    StripSurveyError,
)
from .estimators import (
    Estimate,
    StripAggregates,
    aggregate_strips,
    ratio_area,
    ratio_area_ps,
    ratio_total,
    ratio_total_ps,
    ror_density,
    ror_density_ps,
    srs_ps_area,
    srs_ps_density,
    srs_ps_total,
)
from .frame import (
    CellRecord,
    CopulaSpec,
    GridSpec,
    MarginalSpec,
    PopulationFrame,
    TruthValues,
    enumerate_truth,
    generate_population,
    load_frame,
    save_frame,
)
from .models import (
    PlotPredictions,
    WorkingModels,
    fit_working_models,
    make_predictions,
)
from .simlab import (
    SimConfig,
    SimulationResult,
    SimulationSummary,
    compare_designs,
    plot_multiplier,
    run,
)

__all__ = [name for name in dir() if not name.startswith("_")]
