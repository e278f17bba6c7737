from .harness import (
    McReport,
    MethodStats,
    RunRecord,
    SweepPoint,
    bootstrap,
    bootstrap_sd,
    monte_carlo,
    summarize,
    sweep,
    sweep_rows,
)
from .methods import Constant, Cvci, ExpOnly, MethodOutput, ObsOnly, Pool, TTest, default_methods
from .scenarios import (
    ResidualFit,
    Setting,
    SimScenario,
    fit_residual_model,
    gen_linear,
    gen_no_covariate,
    gen_semisynthetic,
    generate,
)

__all__ = [
    "McReport", "MethodStats", "RunRecord", "SweepPoint", "bootstrap", "bootstrap_sd",
    "monte_carlo", "summarize", "sweep", "sweep_rows", "Constant", "Cvci", "ExpOnly",
    "MethodOutput", "ObsOnly", "Pool", "TTest", "default_methods", "ResidualFit", "Setting",
    "SimScenario", "fit_residual_model", "gen_linear", "gen_no_covariate", "gen_semisynthetic",
    "generate",
]
