"""Lyapunov spectra and hyperbolicity certificates for polynomial flows."""

from .errors import *  # noqa: F401,F403
from .exterior import exterior_generator, exterior_power, induced_splitting, multi_indices
from .flow import OrbitSegment, VectorFieldSpec, find_singularities, integrate
from .pseudo_euclidean import QuadForm, kuhne_bounds, polar_decompose, separation_test, sigma_d
from .lyapunov import (domination_functional, lyapunov_exponents, p_sectional_exponents,
                       wojtkowski_check)
from .verifier import (Certificate, Verdict, check_dominated, check_p_singular_hyperbolic,
                       check_partial_hyperbolic, cone_certificate, estimate_splitting,
                       verify_orbit)
from .config import RunConfig

__version__ = "0.1.0"
