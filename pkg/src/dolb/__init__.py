"""D3Q19 lattice Boltzmann solver with a reference (array-of-structures,
object dynamics) lattice and an accelerated (structure-of-arrays, integer
tag dispatch) lattice that reproduces it bit for bit."""
from .descriptor import D3Q19, Q, VELOCITIES, WEIGHTS, OPPOSITE, equilibrium2, equilibrium4, moments
from .collision import CollisionParams, bgk_collide, trt_collide, rr_collide, regularize
from .dynamics import (
    BGK, RR, TRT, BounceBack, DynamicsChain, MovingBounceBack, NoDynamics,
    RegularizedPressure, RegularizedVelocity, Smagorinsky, build_dynamics,
)
from .reference import ReferenceLattice
from .accelerated import AcceleratedBlock, DispatchSet, DynamicsRegistry, MissingModelError
from .multiblock import AcceleratedLattice, partition
from .bridge import mirror_to_accelerated, mirror_to_reference, show_required_models
from .cases import CaseConfig, init_cavity, init_porous, init_tgv

__version__ = "0.1.0"
