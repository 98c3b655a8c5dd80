"""The three-source surface-crack model and its reparametrization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .psf_gram import Axis, ParamIndex, PointSource, Scene
from .qfim import Jacobian

DEFAULT_KZR = 100.0

# raw parameters: x of the left edge, x of the right edge, z of the floor
CRACK_PARAMS = (ParamIndex(0, Axis.X), ParamIndex(1, Axis.X), ParamIndex(2, Axis.Z))
CRACK_TARGETS = ("dx", "dz")


@dataclass(frozen=True)
class CrackSpec:
    delta_x: float
    delta_z: float
    kzr: float = DEFAULT_KZR

    def __post_init__(self):
        if self.delta_x < 0 or self.delta_z < 0:
            raise ValueError("crack width and depth must be non-negative")
        if self.kzr <= 0:
            raise ValueError("kzr must be positive")


def build_crack(spec: CrackSpec) -> Scene:
    """Edges at (-dx/2, 0, 0) and (+dx/2, 0, 0), floor at (0, 0, -dz)."""
    return Scene(
        (
            PointSource(-spec.delta_x / 2, 0.0, 0.0),
            PointSource(spec.delta_x / 2, 0.0, 0.0),
            PointSource(0.0, 0.0, -spec.delta_z),
        ),
        spec.kzr,
    )


def crack(delta_x: float, delta_z: float, kzr: float = DEFAULT_KZR) -> Scene:
    return build_crack(CrackSpec(delta_x, delta_z, kzr))


def flat_surface(delta_x: float, kzr: float = DEFAULT_KZR) -> Scene:
    """Null hypothesis: the floor source sits at the midpoint of the edges."""
    return crack(delta_x, 0.0, kzr)


def crack_jacobian() -> Jacobian:
    """Maps (dx1, dx2, dz3) information to (width, depth)."""
    return Jacobian(
        np.array([[-0.5, 0.5, 0.0], [0.0, 0.0, -1.0]]),
        source_params=[p.label for p in CRACK_PARAMS],
        target_params=list(CRACK_TARGETS),
    )
