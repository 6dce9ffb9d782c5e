"""Maximum consensus model fitting.

Linear residual systems, iteratively reweighted slack programs (IR-LP and
IR-QP), randomized and deterministic baselines, an exact enumeration oracle
for small problems, and a seeded benchmark harness.
"""

from .baselines import (MlesacConfig, RansacConfig, exact_maxcon, iterative_l1_fit,
                        iterative_linf_fit, lo_ransac_fit, mlesac_fit, ransac_fit)
from .errors import (DegenerateDataError, InvalidArgumentError, LimitExceededError, MaxconError,
                     ParseError, SolverError)
from .model import (GroundTruth, PointMatch, ProblemInstance, ResidualSystem, consensus,
                    linearize_fundamental, linearize_homography, normalize_matches, residuals,
                    synth_hyperplane, synth_matches)
from .reweight import (ConsensusResult, IRConfig, IterTrace, irlp_fit, irqp_fit,
                       kkt_stationarity_gap, surrogate_value, update_weights_lp, update_weights_qp)

__version__ = "0.1.0"
