"""Filter, project and optimize density fields with first- and second-order subpixel-smoothed projection."""
from .calculus import JetField, jet, jet_transpose
from .ccsa import CcsaOptions, OptProblem, minimize
from .geomcon import LengthscaleConfig, constraint_solid, constraint_void, ruler_min_lengthscale
from .grid import Boundary, ConicKernel, GridSpec, filter_field, filter_transpose, make_conic_kernel
from .homogenize import MaterialPair, Tensor2, effective_tensor, homogenize_kappa, loss_and_grad
from .projection import Method, Pipeline, ProjectionConfig, forward, project, project_vjp

__version__ = "0.1.0"
