"""Quantum and classical precision limits for imaging a surface crack."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DegenerateScene,
    DimensionMismatch,
    IllConditioned,
    QuadratureFailure,
    SingularInformation,
    SurfaceLimitsError,
)
from .psf_gram import Axis, BlockGram, ParamIndex, PointSource, Scene, assemble_gram
from .qfim import (
    FisherMatrix,
    Jacobian,
    crb,
    qfim_embedding_oracle,
    qfim_general,
    qfim_reduced,
    reparametrize,
    solve_sld,
)
from .modesort import ModeBasis, ModeIndex, channel_prob, fim_ms, scene_channel_table
from .direct_imaging import QuadratureGrid, chernoff_di, fim_di, intensity
from .hypothesis import (
    EmbeddedState,
    HypothesisPair,
    OverlapTriple,
    chernoff_ms,
    embed_states,
    fidelity_trace_norm,
    qcb,
    qcb_fidelity_bound,
)
from .scenes import CrackSpec, build_crack, crack, crack_jacobian, flat_surface
from .sweeps import ResultRow, SweepSpec, run_sweep
