"""Benchmark setups: Taylor-Green vortex, lid-driven cavity, porous media.

Every initializer returns a :class:`~dolb.reference.ReferenceLattice`;
callers that want speed mirror it with :func:`dolb.bridge.mirror_to_accelerated`.
"""
import math
from dataclasses import dataclass, replace

import numpy as np

from .collision import CollisionParams, DEFAULT_MAGIC, omega_from_viscosity
from .descriptor import CS2
from .dynamics import (
    TRT, BounceBack, MovingBounceBack, NoDynamics, RegularizedPressure,
    RegularizedVelocity, dynamics_for,
)
from .reference import ReferenceLattice

CS = math.sqrt(CS2)
CASE_KINDS = ("tgv", "cavity", "porous")


class CaseError(ValueError):
    pass


@dataclass(frozen=True)
class CaseConfig:
    kind: str = "tgv"
    L: int = 64
    Re: float = 1600.0
    Ma: float = 0.2
    collision: str = "bgk"
    smagorinsky: float = 0.0
    precision: str = "f64"
    block_grid: tuple = (1, 1, 1)
    workers: int = 1
    tmax: str = "12tc"          # steps, or convective times with a tc suffix
    cadence: str = "0.25tc"     # diagnostics interval, same units
    drive: str = "pressure"
    geometry: str = "plates"
    H: int = 11
    omega: float = 0.0          # porous runs only; 0 means 1 (tau = 1)
    lam: float = DEFAULT_MAGIC
    omega_bulk: float = 1.0
    dump_every: str = "0"
    # porous-only knobs
    dims: tuple = ()
    dx: float = 1.0
    threshold: float = 0.5
    upstream: int = -1          # -1: 0 for plates, 40 for voxel files
    downstream: int = -1
    plate_length: int = 32
    delta_rho: float = 1e-4
    u_in: float = 1e-4
    steady_tol: float = 1e-9

    def __post_init__(self):
        if self.kind not in CASE_KINDS:
            raise CaseError(f"unknown case {self.kind!r}; valid: {', '.join(CASE_KINDS)}")
        if self.collision.lower() not in ("bgk", "trt", "rr"):
            raise CaseError(f"unknown collision {self.collision!r}; valid: bgk, trt, rr")
        if self.precision not in ("f32", "f64"):
            raise CaseError(f"unknown precision {self.precision!r}; valid: f32, f64")
        if self.drive not in ("velocity", "pressure"):
            raise CaseError(f"unknown drive {self.drive!r}; valid: velocity, pressure")
        if self.kind != "porous":
            om = self.derived_omega
            if not 0.0 < om < 2.0:
                raise CaseError(f"derived omega {om} outside (0, 2)")

    @property
    def u_lattice(self):
        return CS * self.Ma

    @property
    def length_scale(self):
        # TGV lives on a box of 2 pi reference lengths
        return self.L / (2.0 * math.pi) if self.kind == "tgv" else float(self.L)

    @property
    def viscosity(self):
        if self.kind == "porous":
            return (1.0 / self.porous_omega - 0.5) / 3.0
        return self.u_lattice * self.length_scale / self.Re

    @property
    def derived_omega(self):
        return omega_from_viscosity(self.viscosity)

    @property
    def porous_omega(self):
        return self.omega if self.omega else 1.0

    @property
    def t_c(self):
        """Steps per convective time."""
        if self.kind == "porous":
            return 1.0
        return self.length_scale / self.u_lattice

    @property
    def dtype(self):
        return np.float32 if self.precision == "f32" else np.float64

    def collision_params(self):
        om = self.porous_omega if self.kind == "porous" else self.derived_omega
        return CollisionParams(omega=om, lam=self.lam, smagorinsky_c=self.smagorinsky,
                               omega_bulk=self.omega_bulk)

    def steps(self, t):
        return int(round(t * self.t_c))


def convective_rescale(config, L_new):
    """Same Re and Ma on a new grid; viscosity, omega and t_c follow."""
    if L_new < 8:
        raise CaseError("resolution must be at least 8 cells")
    return replace(config, L=int(L_new))


def tgv_fields(L, Ma):
    """Analytic (rho, u) of the Taylor-Green initial state on cell centres."""
    u0 = CS * Ma
    x = 2.0 * math.pi * (np.arange(L) + 0.5) / L
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    u = np.zeros((3, L, L, L))
    u[0] = u0 * np.sin(X) * np.cos(Y) * np.cos(Z)
    u[1] = -u0 * np.cos(X) * np.sin(Y) * np.cos(Z)
    p = CS2 + (u0 * u0 / 16.0) * (np.cos(2 * Z) + 2.0) * (np.cos(2 * X) + np.cos(2 * Y))
    return p / CS2, u


def init_tgv(L, Ma, config=None):
    if L < 8:
        raise CaseError("Taylor-Green needs L >= 8")
    config = config or CaseConfig(kind="tgv", L=L, Ma=Ma)
    dyn = dynamics_for(config.collision, config.collision_params(), config.smagorinsky)
    lat = ReferenceLattice((L, L, L), dyn, periodic=(True, True, True), dtype=config.dtype)
    rho, u = tgv_fields(L, Ma)
    lat.initialize(rho, u)
    return lat


def init_cavity(L, Re, Ma, config=None):
    """Cubic cavity of L^3 fluid cells inside one layer of wall cells.

    The top (z) wall layer moves with ``(cs Ma, 0, 0)``.
    """
    if L < 16:
        raise CaseError("cavity needs L >= 16")
    config = config or CaseConfig(kind="cavity", L=L, Re=Re, Ma=Ma, collision="bgk")
    n = L + 2
    dyn = dynamics_for(config.collision, config.collision_params(), config.smagorinsky)
    lat = ReferenceLattice((n, n, n), dyn, periodic=(False, False, False),
                           dtype=config.dtype)
    wall = BounceBack()
    for axis in range(3):
        for end in (0, n - 1):
            region = [slice(None)] * 3
            region[axis] = end
            lat.set_chain(tuple(region), wall)
    lat.set_chain((slice(1, n - 1), slice(1, n - 1), n - 1),
                  MovingBounceBack((config.u_lattice, 0.0, 0.0)))
    lat.initialize(1.0, np.zeros(3))
    return lat


# ---------------------------------------------------------------------------
# porous media

@dataclass
class VoxelGeometry:
    dims: tuple
    solid: np.ndarray          # bool, True = solid
    dx: float = 1.0
    source: str = ""

    @property
    def porosity(self):
        return float(1.0 - self.solid.mean())


def load_voxels(path, dims, threshold=0.5, dx=1.0):
    """Raw 8-bit occupancy file, x fastest.  Values above ``threshold`` are solid.

    Files storing 0/255 are treated like 0/1.
    """
    dims = tuple(int(d) for d in dims)
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size != int(np.prod(dims)):
        raise CaseError(f"{path}: {raw.size} bytes, expected {int(np.prod(dims))}")
    vals = raw.astype(np.float64)
    if vals.max() > 1:
        vals /= 255.0
    solid = (vals > threshold).reshape(dims[::-1]).transpose(2, 1, 0)
    geom = VoxelGeometry(dims, np.ascontiguousarray(solid), dx, str(path))
    _check_porosity(geom)
    return geom


def _check_porosity(geom):
    phi = geom.porosity
    if phi <= 0.0 or phi >= 1.0:
        raise CaseError(f"degenerate medium: porosity {phi}")


def plates_geometry(H, length=32, width=1):
    """Parallel plates: solid at z = 0 and z = H + 1, fluid in between."""
    solid = np.zeros((length, width, H + 2), dtype=bool)
    solid[:, :, 0] = True
    solid[:, :, -1] = True
    return VoxelGeometry((length, width, H + 2), solid, 1.0, "plates")


@dataclass
class PorousSetup:
    lattice: ReferenceLattice
    geometry: VoxelGeometry
    fluid: np.ndarray          # bool mask over the whole domain
    medium: tuple              # x slice of the sample inside the domain
    drive: str
    omega: float
    rho_in: float
    rho_out: float
    u_in: float


def init_porous(geom, upstream=40, downstream=40, drive="pressure", omega=1.0,
                lam=DEFAULT_MAGIC, delta_rho=1e-4, u_in=1e-4, config=None,
                allow_open=False):
    """Sample between an upstream and a downstream fluid buffer along x.

    Solid voxels touching fluid bounce back; buried ones carry no dynamics.
    The inlet (x = 0) imposes the drive, the outlet imposes rho = 1.
    """
    if not allow_open:
        _check_porosity(geom)
    if drive not in ("velocity", "pressure"):
        raise CaseError(f"unknown drive {drive!r}")
    if config is not None:
        dtype = config.dtype
    else:
        dtype = np.float64
    nx, ny, nz = geom.dims
    solid = np.zeros((upstream + nx + downstream, ny, nz), dtype=bool)
    solid[upstream:upstream + nx] = geom.solid
    fluid = ~solid
    # a solid cell is a wall if any neighbour in its 3x3x3 block is fluid
    # (periodic laterally, open along x)
    wrap = np.zeros_like(fluid)
    for dy in (-1, 0, 1):
        for dz in (-1, 0, 1):
            wrap |= np.roll(fluid, (dy, dz), axis=(1, 2))
    near = wrap.copy()
    near[1:] |= wrap[:-1]
    near[:-1] |= wrap[1:]
    wall = solid & near
    deep = solid & ~near

    bulk = TRT(omega, lam)
    lat = ReferenceLattice(solid.shape, bulk, periodic=(False, True, True), dtype=dtype)
    lat.set_chain_mask(wall, BounceBack())
    lat.set_chain_mask(deep, NoDynamics())
    rho_out = 1.0
    rho_in = 1.0 + delta_rho
    if drive == "pressure":
        inlet = RegularizedPressure(bulk, 0, -1, rho_in)
    else:
        inlet = RegularizedVelocity(bulk, 0, -1, (u_in, 0.0, 0.0))
    outlet = RegularizedPressure(bulk, 0, 1, rho_out)
    n = solid.shape[0]
    in_mask = np.zeros_like(fluid)
    in_mask[0] = fluid[0]
    out_mask = np.zeros_like(fluid)
    out_mask[n - 1] = fluid[n - 1]
    lat.set_chain_mask(in_mask, inlet)
    lat.set_chain_mask(out_mask, outlet)
    lat.initialize(1.0, np.zeros(3))
    return PorousSetup(lat, geom, fluid, (upstream, upstream + nx), drive, omega,
                       rho_in, rho_out, u_in)


def porous_chains():
    """Every chain a pressure- or velocity-driven porous run may need."""
    bulk = TRT(1.0)
    return sorted({d.chain().name for d in (
        bulk, BounceBack(), NoDynamics(),
        RegularizedPressure(bulk, 0, -1, 1.0), RegularizedPressure(bulk, 0, 1, 1.0),
        RegularizedVelocity(bulk, 0, -1, (0, 0, 0)))})


def measure_permeability(setup, rho, u, window=None):
    """Darcy permeability from a steady (rho, u) field, lattice units.

    The pressure gradient is the least-squares slope of the plane-mean
    pressure over ``window`` (x range, default: the middle half of the
    sample), and the mean velocity is the superficial velocity over the
    same planes (solid cells count as zero).
    """
    lo, hi = setup.medium
    if window is None:
        span = hi - lo
        window = (lo + span // 4, hi - span // 4)
    a, b = window
    fluid = setup.fluid[a:b]
    p = CS2 * rho[a:b]
    counts = fluid.sum(axis=(1, 2))
    if np.any(counts == 0):
        raise CaseError("window contains a fully solid plane")
    p_mean = (p * fluid).sum(axis=(1, 2)) / counts
    x = np.arange(a, b, dtype=float)
    slope = np.polyfit(x, p_mean, 1)[0]
    u_mean = float(np.mean(np.where(fluid, u[0, a:b], 0.0)))
    nu = (1.0 / setup.omega - 0.5) / 3.0
    dP = -slope
    # a gradient at round-off level of the pressure itself counts as none
    if abs(dP) * (b - a) <= 1e-12 * float(np.mean(p_mean)):
        raise CaseError("zero pressure gradient: permeability is unbounded")
    if dP < 0:
        raise CaseError("pressure rises along the flow direction")
    return u_mean * nu / dP


def gap_permeability(setup, rho, u, window=None):
    """Plates: permeability with the velocity averaged over the fluid gap only."""
    k_sup = measure_permeability(setup, rho, u, window)
    return k_sup / setup.geometry.porosity
