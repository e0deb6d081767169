"""Spectral (sparse Fourier) search over Boolean-encoded configuration spaces.

Library layers, bottom up:

* :mod:`.fourier` -- parity basis, exact transforms, restrictions, exhaustive minimization
* :mod:`.recovery` -- lasso and group lasso solvers on graph-sampling matrices
* :mod:`.encoding` -- log-linear bit encoding of numeric hyperparameters
* :mod:`.hyperband` -- Successive Halving, Hyperband, and recovery-guided Hyperband
* :mod:`.conas` -- cell encoders and the multi-stage recover-and-restrict search
* :mod:`.evaluators` -- planted objectives, the subprocess protocol, history files
* :mod:`.experiments` -- phase-transition and lambda-stability harnesses
* :mod:`.cli` -- the ``spectral-search`` command
"""

__version__ = "0.1.0"

from .conas import ArchitectureSpace, CellSpec, conas_search, sample_encoder
from .encoding import Category, HyperparamSpace, group_columns
from .evaluators import (
    EvaluationHistory,
    ExternalEvaluator,
    PlantedObjective,
    ProtocolError,
    load_history,
    save_history,
)
from .experiments import PhaseConfig, lambda_stability, phase_transition
from .fourier import (
    BasisFamily,
    Restriction,
    SparsePolynomial,
    brute_force_transform,
    enumerate_basis,
    minimize_over_support,
    restrict,
)
from .hyperband import PgsrConfig, SchedulerConfig, hyperband, pgsr_hb, successive_halving
from .recovery import GroupStructure, build_sampling_matrix, group_lasso, lasso, top_s

__all__ = [
    "__version__",
    "ArchitectureSpace", "CellSpec", "conas_search", "sample_encoder",
    "Category", "HyperparamSpace", "group_columns",
    "EvaluationHistory", "ExternalEvaluator", "PlantedObjective", "ProtocolError",
    "load_history", "save_history",
    "PhaseConfig", "lambda_stability", "phase_transition",
    "BasisFamily", "Restriction", "SparsePolynomial", "brute_force_transform",
    "enumerate_basis", "minimize_over_support", "restrict",
    "PgsrConfig", "SchedulerConfig", "hyperband", "pgsr_hb", "successive_halving",
    "GroupStructure", "build_sampling_matrix", "group_lasso", "lasso", "top_s",
]
