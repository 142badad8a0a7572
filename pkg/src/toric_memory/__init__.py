"""Free-fermion bounds on the lifetime of a perturbed toric-code memory."""

from .bound import (
    BoundCurve,
    BoundEvaluator,
    SingularCovarianceError,
    compute_Bn,
    det_quarter_term,
    eigenphases,
    gaussian_overlap,
    magnetization_bound,
    trace_bound_term,
)
from .decoder import aggregate_logical, decode_row, row_logical_prob, syndrome
from .fermion import NumericalError, build_h, lightcone_profile, propagator, spectral
from .model import (
    CouplingModel,
    EnsembleSpec,
    InvalidModelError,
    build_uniform,
    flip_site,
    sample_ensemble,
)
from .oracle import ResourceError, exact_magnetization, ghz_sector_phase
from .survival import bound_curve, ensemble_curve, fit_scaling, survival_time, time_grid

__version__ = "0.1.0"
