"""Random walks on affine Weyl groups: local limit theory and noise sensitivity."""

from .weyl import (
    BUILTIN_NAMES,
    Group,
    GroupElement,
    GroupSpec,
    ball,
    build_group,
    builtin_group,
    embed,
    inverse,
    multiply,
    product_group,
    resolve_group,
)
from .measures import (
    Measure,
    convolve,
    delta,
    lazy_uniform,
    noised_pair,
    power,
    sample_walk,
    tv_distance,
)
from .network import QuotientNetwork, build_network, check_reversibility
from .hodge import Covariance, covariance, harmonic_embedding, harmonic_projection

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_NAMES", "Group", "GroupElement", "GroupSpec", "ball", "build_group", "builtin_group",
    "embed", "inverse", "multiply", "product_group", "resolve_group",
    "Measure", "convolve", "delta", "lazy_uniform", "noised_pair", "power", "sample_walk",
    "tv_distance",
    "QuotientNetwork", "build_network", "check_reversibility",
    "Covariance", "covariance", "harmonic_embedding", "harmonic_projection",
]
