"""Simulation toolkit for itinerant microwave photon detectors.

Open quantum networks built from (S, L, H) components, driven by a
single-photon source cavity, evolved with deterministic and
homodyne-conditioned master equations, and reduced to signal-to-noise and
assignment-fidelity figures of merit.  A separate module covers the
three-level absorber on a transmission line.
"""

from . import detection, dynamics, lambda_scatter, qops, slh, sources
from .detection import (
    DetectionSummary,
    FilterSpec,
    fidelity,
    integrate_signal,
    matched_filter_template,
    optimize_threshold,
    optimize_window,
    snr_empirical,
    square_filter,
    summarize,
    template_filter,
)
from .dynamics import (
    AnalyticMoments,
    CompiledGenerator,
    HomodyneRecord,
    MeResult,
    NumericalInstabilityError,
    TimeGrid,
    TrajectoryResult,
    compile_generator,
    evolve_me,
    evolve_sme,
    excitation_probability,
    mean_signal_curve,
    run_ensemble,
    snr_analytic,
    snr_window_scan,
    states_with_count_at_most,
    two_time_correlation,
)
from .lambda_scatter import (
    LambdaConfig,
    ScanResult,
    efficiency_scan,
    scatter_efficiency,
    scatter_efficiency_pde_oracle,
    washboard_potential,
)
from .qops import Operator, SpaceLayout, basis_ket, embed, pure_dm
from .slh import (
    Generator,
    NetworkModel,
    SlhTriple,
    cascade_network,
    cascade_transmons,
    concat,
    control_band_weights,
    explicit_cascaded_generator,
    jc_unit_network,
    me_from_slh,
    series,
    single_transmon_network,
)
from .sources import Kappa, Wavepacket, kappa_of_t, make_wavepacket

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "AnalyticMoments", "CompiledGenerator", "DetectionSummary", "FilterSpec",
    "Generator", "HomodyneRecord", "Kappa", "LambdaConfig", "MeResult",
    "NetworkModel", "NumericalInstabilityError", "Operator", "ScanResult",
    "SlhTriple", "SpaceLayout", "TimeGrid", "TrajectoryResult", "Wavepacket",
    "basis_ket", "cascade_network", "cascade_transmons", "compile_generator",
    "concat", "control_band_weights", "detection", "dynamics", "embed",
    "efficiency_scan", "evolve_me", "evolve_sme", "excitation_probability",
    "explicit_cascaded_generator", "fidelity", "integrate_signal",
    "jc_unit_network", "kappa_of_t", "lambda_scatter", "make_wavepacket",
    "matched_filter_template", "me_from_slh", "mean_signal_curve",
    "optimize_threshold", "optimize_window", "pure_dm", "qops",
    "run_ensemble", "scatter_efficiency", "scatter_efficiency_pde_oracle",
    "series", "single_transmon_network", "slh", "snr_analytic",
    "snr_empirical", "snr_window_scan", "sources", "square_filter",
    "states_with_count_at_most", "summarize", "template_filter",
    "two_time_correlation", "washboard_potential",
]
