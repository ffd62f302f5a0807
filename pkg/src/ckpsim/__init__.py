"""Simulation and exact verification of cumulative knowledge processes
on preferential-attachment trees.

The model: a growing rooted tree of claims labelled CT, CF or PF, with
new claims attached preferentially to checked-looking (PT) nodes, errors
introduced at rate eps, and depth-k audits at rate p that proclaim false
the path up to the first non-CT node. The package simulates the process
at scale (compiled kernels), recomputes every structural quantity
exactly on frozen states (rational arithmetic), certifies one-step drift
inequalities without tolerances, and enumerates the exact law at small
horizons to validate the sampler.
"""

from ._kernels import CT, CF, PF, NUMBA_ENABLED
from .state import (ExplicitInit, ExtinctError, GeneralRootCT,
                    InvalidStateError, KnowledgeState, Params, SimpleRootCF,
                    UnivalentInit, new_state, observable)
from .rng import Stream, split
from .evolution import (MetricsPlan, StepOutcome, Trajectory, check_path,
                        one_step_support, run, step)
from .decomposition import (Block, PTComponent, blocks, minimal_false_nodes,
                            pt_components, structure, subtree_pt_count)
from .potentials import (PotentialReading, adapted_potentials, phi_combined,
                         phi_exp, phi_exp_adapted, phi_lc, phi_reliability,
                         reading)
from .analysis import (DriftCertificate, MetricsRecord, SurvivalEstimate,
                       drift_certificate, elimination_margin, harvest_states,
                       metrics, polya_urn_oracle, reliability_ratio,
                       standard_bound, survival_estimate, survival_margin,
                       tau_statistics, wilson_interval)
from .oracle import (BudgetExceededError, HorizonDistribution,
                     TrajectoryAtom, compare, enumerate_horizon)
from .harness import RunConfig, SweepGrid, run_sweep, run_trials, write_run

__version__ = "0.1.0"

__all__ = [
    "CT", "CF", "PF", "NUMBA_ENABLED",
    "ExplicitInit", "ExtinctError", "GeneralRootCT", "InvalidStateError",
    "KnowledgeState", "Params", "SimpleRootCF", "UnivalentInit",
    "new_state", "observable",
    "Stream", "split",
    "MetricsPlan", "StepOutcome", "Trajectory", "check_path",
    "one_step_support", "run", "step",
    "Block", "PTComponent", "blocks", "minimal_false_nodes",
    "pt_components", "structure", "subtree_pt_count",
    "PotentialReading", "adapted_potentials", "phi_combined", "phi_exp",
    "phi_exp_adapted", "phi_lc", "phi_reliability", "reading",
    "DriftCertificate", "MetricsRecord", "SurvivalEstimate",
    "drift_certificate", "elimination_margin", "harvest_states", "metrics",
    "polya_urn_oracle", "reliability_ratio", "standard_bound",
    "survival_estimate", "survival_margin", "tau_statistics",
    "wilson_interval",
    "BudgetExceededError", "HorizonDistribution", "TrajectoryAtom",
    "compare", "enumerate_horizon",
    "RunConfig", "SweepGrid", "run_sweep", "run_trials", "write_run",
]
