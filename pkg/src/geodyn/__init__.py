"""Metrics, connections, curvature, geodesic flow and the geospin matrix."""

__version__ = "0.1.0"

from .connection import (Christoffel, CustomConnection, christoffel, christoffel_jet, connection_form,
                         make_connection, make_vector_field, torsion)
from .curvature import CurvaturePack, curvature_pack, riemann_mixed
from .errors import GeodynError
from .flow import GeodesicState, IntegratorConfig, Trajectory, geodesic_rhs, integrate
from .geospin import GeospinMatrix, geometric_acceleration, geospin
from .matfun import constant_w_position, constant_w_velocity, expm
from .metric import MetricSpec, builtin, catalog, load_definition, make_metric

__all__ = [
    "Christoffel", "CurvaturePack", "CustomConnection", "GeodesicState", "GeodynError",
    "GeospinMatrix", "IntegratorConfig", "MetricSpec", "Trajectory", "builtin", "catalog",
    "christoffel", "christoffel_jet", "connection_form", "constant_w_position",
    "constant_w_velocity", "curvature_pack", "expm", "geodesic_rhs", "geometric_acceleration",
    "geospin", "integrate", "load_definition", "make_connection", "make_metric",
    "make_vector_field", "riemann_mixed", "torsion",
]
