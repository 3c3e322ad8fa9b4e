from truss_shm.experiments.accuracy import (
    AccuracyReport,
    AccuracyRow,
    TrialRecord,
    database_family,
    run_location_only,
    run_mode_count_study,
    run_noise_sweep,
    score,
)
from truss_shm.experiments.factorial import (
    EffectTable,
    EffectTerm,
    FactorialRun,
    analyze_factorial,
    factorial_2k,
    pareto_effects,
    t_cdf,
    t_critical,
)
from truss_shm.experiments.presets import NOISE_SETS, NoiseSet

__all__ = (
    "AccuracyReport",
    "AccuracyRow",
    "TrialRecord",
    "NoiseSet",
    "NOISE_SETS",
    "score",
    "database_family",
    "run_mode_count_study",
    "run_noise_sweep",
    "run_location_only",
    "EffectTable",
    "EffectTerm",
    "FactorialRun",
    "analyze_factorial",
    "factorial_2k",
    "pareto_effects",
    "t_cdf",
    "t_critical",
)
