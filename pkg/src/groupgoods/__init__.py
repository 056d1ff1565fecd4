"""Equilibria of a finite-horizon public goods game played by groups under
position uncertainty: closed-form incentive functions, equilibrium solvers,
and independent Monte Carlo / exact-enumeration verification."""

from .analytics import (
    SampleClass,
    ThresholdResult,
    classify_sample,
    delta,
    onpath_deviation_gain,
    phi_clean,
    phi_defection,
    psi,
    threshold_m_eq_1,
    threshold_m_gt_1,
    weighted_phi_sum,
)
from .core import (
    Action,
    GameConfig,
    InvalidConfig,
    Sample,
    config_violations,
    load_config,
    payoff,
    sample_of,
    save_config,
    validate_config,
)
from .equilibrium import (
    EquilibriumReport,
    InternalInconsistencyError,
    Lemma2Report,
    MixedRoots,
    PureVerdict,
    SolverSettings,
    equilibrium_report,
    find_delta_max,
    find_mixed_roots,
    find_r_sharp,
    report_to_dict,
    report_to_json,
    verify_lemma2,
    verify_pure,
)
from .simulator import (
    DeviationSpec,
    EstimateRow,
    ExactPhi,
    GameResult,
    PsiEstimate,
    SimEstimate,
    StrategyProfile,
    enumerate_exact,
    estimate_phi,
    estimate_psi,
    simulate_game,
    tremble_payoff,
    write_estimates_csv,
)

__version__ = "0.1.0"
