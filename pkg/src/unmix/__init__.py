"""Hyperspectral unmixing: VCA, SISAL and DECA estimators with geometry checks."""

# the estimator functions deca, sisal and vca live in their submodules of the
# same name; re-exporting them here would shadow those modules
from .deca import (DecaConfig, DecaState, DirichletMixture, dirichlet_logpdf, em_fit_mixture,
                   grad_loglik_noiseless, log_marginal_quadrature, loglik_noiseless, ml_objective,
                   mixture_logpdf, r_integral, r_integral_mc)
from .errors import (DegenerateDataError, DimensionError, InvalidParameterError, PreconditionError,
                     PurityInfeasibleError, RankDeficientError, SingularMatrixError, StepFailureError,
                     UnmixError)
from .evaluation import MatchReport, match_endmembers, spectral_angle
from .geometry import (AffineReduction, EndmemberSet, SimplexFrames, constrained_min_norm,
                       equality_vector, lemma1_checks, lift, min_affine_norm, pinv, reduce,
                       simplex_frames, svol, verify_gram_ratio)
from .pipeline import UnmixResult, unmix
from .scene import GroundTruth, SceneConfig, SpectralImage, generate_scene, sample_dirichlet
from .sisal import SisalConfig, SisalState, grad_neg_logdet, hinge, neg_logdet, prox_hinge
from .vca import VcaResult, ppi_select

__version__ = "0.1.0"
