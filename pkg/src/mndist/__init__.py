"""mndist: monotone convolutions, Loewner flows, homogeneous Markov kernels.

Measures on R and on the unit circle live in :mod:`mndist.measures`; the
analytic transform stack and boundary inversion in :mod:`mndist.transforms`;
the ten convolutions in :mod:`mndist.convolutions`; semigroup flows and
monotone cumulants in :mod:`mndist.loewner`; transition kernels, samplers,
and Hunt generators in :mod:`mndist.markov`; geometric-function-theory
classification in :mod:`mndist.classify`; and the finite-dimensional
increment-process model in :mod:`mndist.operator_model`.
"""

from . import (classify, convolutions, loewner, markov, measures,
               operator_model, transforms)
from .convolutions import (ConvolutionResult, antimonotone_add,
                           antimonotone_mult, boolean_add, boolean_mult,
                           classical_add, classical_mult, free_add,
                           free_mult, monotone_add, monotone_mult)
from .loewner import (CumulantSeq, GeneratingPairAdd, GeneratingPairMult,
                      HerglotzField, cumulants_to_moments, evolve_additive,
                      evolve_mult, loewner_transition, monotone_cumulants,
                      monotone_id_test, pair_from_cumulants)
from .markov import (TransitionKernel, arcsine_kernel, hunt_apply_additive,
                     hunt_apply_mult, kernel_additive, kernel_mult,
                     martingale_check, sample_path,
                     subordination_kernel_additive, subordination_kernel_mult)
from .measures import (CircleMeasure, RealMeasure, WeakDistance, arcsine,
                       haar, levy_distance, marchenko_pastur, point_mass,
                       poisson_kernel, semicircle, uniform)
from .transforms import (AnalyticMap, ConeDomain, boolean_B, cauchy_G,
                         eta_transform, f_transform, first_moment_via_F,
                         h_transform, herglotz_invert, psi_transform,
                         sigma_transform, stieltjes_invert, voiculescu_phi)

__version__ = "0.1.0"
