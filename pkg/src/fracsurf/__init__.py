"""Nonlocal perimeters, areas and curvatures of surfaces in the plane and in space."""

__version__ = "0.1.0"

from .crossing import (CrossingRecord, Degeneracy, PairClass, PairKind, SignedIndicator,
                       classify_pair, hat_chi, interior_normal_sign, ray_far_sign,
                       segment_crossings, tilde_chi)
from .curvature import (CurvatureResult, classical_curvature, directional_curvature,
                        local_limit_estimate, mean_curvature_flux, mean_curvature_volume,
                        mean_from_directional, stationarity_residual)
from .functionals import (FunctionalResult, SweepResult, interaction, s_area, s_perimeter,
                          s_perimeter_relative, scaled_limit_sweep)
from .geometry import (AnalyticArc, AnalyticCircle, GeometryError, MeshFormatError, Polyline2D,
                       TriMesh3D, load_mesh, load_polyline, make_arc, make_circle,
                       make_polyline, make_sphere_mesh)
from .quadrature import (ConvergenceError, FractionalOrder, PVEstimate, QuadratureConfig,
                         cov_near_diagonal_integral, mc_integral, mc_pair_integral,
                         pv_volume_integrate, surface_pv_integrate)
from .sets import Ball, Box, Complement, ConvexPolyhedron, HalfSpace, Intersection
