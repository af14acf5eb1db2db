"""Outlier-robust graph matching.

Matching two graphs cluttered with outliers by minimizing unary plus
pairwise inconsistency over partial permutations whose outlier rows and
columns are exactly zero. Frank-Wolfe descent with exact k-cardinality
assignment subproblems does the optimization; assignment-mass clustering
identifies and removes outliers; alternation with closed-form transform
fits handles rigid and non-rigid deformations.
"""

from .core import (Correspondence, DegenerateGeometryError, InlierPartition,
                   MatchMetrics, MatchProblem, PointSet, build_problem,
                   load_pointset, metrics, validate_partial_permutation)
from .features import ShapeContextConfig, build_descriptors, chi2_cost, \
    pairwise_cost, shape_context
from .lap import Assignment, kernel_name, solve_klap, solve_lap, \
    solve_substochastic
from .objective import ObjectiveValue, gradient, gradient_reg, line_search, \
    objective, objective_reg
from .solver import (MatchCollapsedError, SolveReport, SolverConfig,
                     discretize, frank_wolfe_zac, frank_wolfe_zacr)
from .outliers import (JointPoint, RemovalConfig, RemovalResult,
                       joint_probabilities, match_with_removal, refine_inliers,
                       two_means)
from .deformable import (AlignedTransform, DgmConfig, DgmResult,
                         NonRigidTransform, RigidTransform, dgm_solve,
                         fit_nonrigid, fit_rigid, normalize_points,
                         transform_error)
from .bench import (Deform, ExperimentConfig, OutlierDist, SynthConfig,
                    SynthInstance, consistency_report, gen_synthetic,
                    run_experiment, template_points, verify_condition)

__version__ = "0.1.0"
