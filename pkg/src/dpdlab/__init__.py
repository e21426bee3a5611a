"""Simulation lab for adaptive digital predistortion of RF power amplifiers."""

from .estimation import UpdateConfig, fit_proactive, ila_update, ls_solve, robust_update
from .estimators import MemoryPolynomial, Predistorter, ProactiveMemoryPolynomial, ProactivePredistorter
from .models import (
    ModelStructure,
    ParameterSet,
    StateConfig,
    build_proactive_regressor,
    build_regressor,
    compute_state,
    model_output,
    proactive_output,
)
from .pa import PaConfig, PaState, pa_initial_state, pa_process, reference_pa
from .signals import (
    ComplexSignal,
    PulsedNoiseConfig,
    gen_ofdm_surrogate,
    gen_pulsed_noise,
    lowpass_filter,
    normalize_rms,
    time_align,
)
from .testbed import (
    AdaptationTrace,
    FeedbackImpairment,
    Schedule,
    apply_feedback_impairment,
    bits_to_snr_db,
    convergence_time,
    degradation_db,
    nmse_db,
    plan_windows,
    run_adaptation,
    steady_state_nmse,
    step_excursion_db,
)

__version__ = "0.1.0"
