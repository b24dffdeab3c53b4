"""Data-driven reduced-order models on polynomial manifolds.

The package learns nonlinear (polynomial) state representations from
snapshot data, infers the reduced operators of the induced polynomial
dynamical system by regularized regression, and integrates the resulting
low-dimensional models. Benchmark recipes and a CLI reproduce the
bundled experiments end to end.
"""

from .features import (MonomialTable, QuadIndexing, g_eval, g_jacobian,
                       ghat_eval, ghat_jacobian, ghat_table, quad_eval)
from .learn import LearnConfig, LearnReport, learn_am, learn_pod, procrustes, solve_xi
from .manifold import (EncodeResult, EncodeSettings, PolynomialManifold,
                       decode, encode_linear, encode_nls, energy_metric,
                       load_model, relative_state_error, save_model)
from .opinf import (InferredOperators, RegressionProblem, assemble, solve,
                    time_derivatives)
from .rom import (IntegrationConfig, ReducedModel, UnstableRomError,
                  encode_initial, integrate, load_reduced_model, predict_full,
                  rhs, save_reduced_model)
from .snapshot import (CenteredSnapshots, MatrixParseError, SnapshotSet,
                       SvdSpectrum, center, load_matrix, load_snapshot_set,
                       save_matrix, save_snapshot_set, svd_spectrum)
from .tune import Grid, Hyperparameters, TuneResult, grid_search

__version__ = "0.1.0"
