"""Non-intrusive reduced models of linear systems with learned error estimates.

Reduced operators and residual-norm operators are inferred from trajectories
of a queryable full system; the state error of the reduced model is then
estimated a posteriori, either deterministically (for ``||A||_2 <= 1``) or
with probabilistic bounds sampled from Gaussian initial states.
"""

from .certify import (ErrorCertificate, NormBoundRealization,
                      deterministic_certificate, delta_w, delta_w_series,
                      intrusive_certificate, learned_certificate,
                      output_interval, power_norms, prob_lower_bound,
                      residual_norm, residual_norms, sample_norm_bounds)
from .exceptions import (CertromError, ConfigError, ConvergenceError,
                         DomainError, FactorizationError, InsufficientData,
                         ModelMismatch, ModelMismatchWarning, NotFittedError,
                         RankDeficient, StaleArtifacts)
from .learn import (OperatorInference, ReprojectedData, ResidualNormInference,
                    ResidualNormOps, build_residual_data, design_excitation,
                    infer_operators, infer_residual_operators,
                    reproject_sample)
from .numerics import RngStream, spectral_norm
from .pde import (TimeScheme, assemble_convdiff_2d, assemble_heat_1d,
                  discretize)
from .queryable import (CountingSystem, DenseLTI, QueryableSystem, Trajectory,
                        simulate)
from .reduction import (PODBasis, PodBasis, ReducedModel, intrusive_project,
                        pod_basis, simulate_reduced)

__version__ = "0.1.0"
