"""Boundary links: bounce-back, moving-wall bounce-back, regularized inlets.

All kernels act on a pulled cell view: the populations a boundary cell just
received by streaming.  Populations arriving from outside the domain are
unknown and get overwritten; the rest are used to reconstruct the state.

Chain identifiers for the regularized conditions encode the flat boundary's
axis (0, 1, 2) and the sign of its outward normal (``1`` or ``M1``), so a
left-face x inlet is ``Boundary_RegularizedVelocity_0_M1``.
"""
from dataclasses import dataclass
import re

import numpy as np
from numba import njit

from .descriptor import _C, _W, OPPOSITE, Q, equilibrium2_cell

BOUNCE_BACK = "BounceBack"
MOVING_BOUNCE_BACK = "MovingBounceBack"
REG_VELOCITY = "Boundary_RegularizedVelocity"
REG_PRESSURE = "Boundary_RegularizedPressure"

KINDS = ("BounceBack", "MovingBounceBack", "RegularizedVelocity",
         "RegularizedPressure", "Periodic")

_REG_RE = re.compile(r"^Boundary_Regularized(Velocity|Pressure)_([012])_(1|M1)$")


class BoundaryConfigError(ValueError):
    pass


def orientation_tag(orient):
    return "1" if orient > 0 else "M1"


def regularized_link(kind, axis, orient):
    """Link identifier of a regularized boundary, e.g. ``..._0_M1``."""
    if kind not in ("velocity", "pressure"):
        raise BoundaryConfigError(f"unknown regularized kind {kind!r}")
    if axis not in (0, 1, 2) or orient not in (-1, 1):
        raise BoundaryConfigError(
            f"regularized boundaries need a unit axis normal, got axis={axis} "
            f"orientation={orient}")
    prefix = REG_VELOCITY if kind == "velocity" else REG_PRESSURE
    return f"{prefix}_{axis}_{orientation_tag(orient)}"


def parse_regularized_link(link):
    """Return ``(kind, axis, orient)`` or None if ``link`` is not regularized."""
    m = _REG_RE.match(link)
    if m is None:
        return None
    kind = m.group(1).lower()
    return kind, int(m.group(2)), (1 if m.group(3) == "1" else -1)


@dataclass(frozen=True)
class BoundarySpec:
    kind: str
    axis: int = 0
    orient: int = -1
    value: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise BoundaryConfigError(f"unknown boundary kind {self.kind!r}")
        if self.kind.startswith("Regularized"):
            if self.axis not in (0, 1, 2) or self.orient not in (-1, 1):
                raise BoundaryConfigError("regularized kinds need a unit axis normal")
        vals = np.atleast_1d(np.asarray(self.value, dtype=float))
        if not np.all(np.isfinite(vals)):
            raise BoundaryConfigError("boundary value must be finite")

    @property
    def link(self):
        if self.kind == "BounceBack":
            return BOUNCE_BACK
        if self.kind == "MovingBounceBack":
            return MOVING_BOUNCE_BACK
        if self.kind == "RegularizedVelocity":
            return regularized_link("velocity", self.axis, self.orient)
        if self.kind == "RegularizedPressure":
            return regularized_link("pressure", self.axis, self.orient)
        raise BoundaryConfigError("periodic boundaries are not cell links")


# ---------------------------------------------------------------------------
# cell kernels

@njit(cache=True)
def bounce_back_cell(f):
    for i in range(1, 19, 2):
        j = i + 1
        tmp = f[i]
        f[i] = f[j]
        f[j] = tmp


@njit(cache=True)
def moving_bounce_back_cell(f, ux, uy, uz):
    bounce_back_cell(f)
    for i in range(1, 19):
        cu = _C[i, 0] * ux + _C[i, 1] * uy + _C[i, 2] * uz
        f[i] += 6.0 * _W[i] * cu


@njit(cache=True)
def _known_sums(f, axis, orient):
    # returns rho_0 + 2 rho_out where rho_0 sums c_a = 0 and rho_out sums
    # c_a = orient (populations leaving through the boundary, all known)
    s = 1.0
    for i in range(19):
        ca = _C[i, axis]
        if ca == 0:
            s += f[i]
        elif ca == orient:
            s += 2.0 * f[i]
    return s


@njit(cache=True)
def _regularized_complete(f, axis, orient, rho, ux, uy, uz):
    feq = np.empty(19)
    equilibrium2_cell(rho, ux, uy, uz, feq)
    # unknown populations: bounce-back of the off-equilibrium part
    full = np.empty(19)
    for i in range(19):
        if _C[i, axis] == -orient:
            j = OPPOSITE[i]
            full[i] = feq[i] + (f[j] - feq[j])
        else:
            full[i] = f[i]
    pxx = 0.0
    pyy = 0.0
    pzz = 0.0
    pxy = 0.0
    pxz = 0.0
    pyz = 0.0
    for i in range(19):
        d = full[i] - feq[i]
        cx = _C[i, 0]
        cy = _C[i, 1]
        cz = _C[i, 2]
        pxx += cx * cx * d
        pyy += cy * cy * d
        pzz += cz * cz * d
        pxy += cx * cy * d
        pxz += cx * cz * d
        pyz += cy * cz * d
    for i in range(19):
        cx = _C[i, 0]
        cy = _C[i, 1]
        cz = _C[i, 2]
        h2 = ((cx * cx - 1.0 / 3.0) * pxx + (cy * cy - 1.0 / 3.0) * pyy
              + (cz * cz - 1.0 / 3.0) * pzz
              + 2.0 * (cx * cy * pxy + cx * cz * pxz + cy * cz * pyz))
        f[i] = feq[i] + 4.5 * _W[i] * h2


@njit(cache=True)
def regularized_velocity_cell(f, axis, orient, ux, uy, uz):
    if axis == 0:
        un = ux
    elif axis == 1:
        un = uy
    else:
        un = uz
    rho = _known_sums(f, axis, orient) / (1.0 + orient * un)
    _regularized_complete(f, axis, orient, rho, ux, uy, uz)


@njit(cache=True)
def regularized_pressure_cell(f, axis, orient, rho):
    un = orient * (_known_sums(f, axis, orient) / rho - 1.0)
    ux = un if axis == 0 else 0.0
    uy = un if axis == 1 else 0.0
    uz = un if axis == 2 else 0.0
    _regularized_complete(f, axis, orient, rho, ux, uy, uz)


# ---------------------------------------------------------------------------
# numpy-facing wrappers

def _cell_copy(cell):
    f = np.array(cell, dtype=float, copy=True)
    if f.shape != (Q,):
        raise ValueError(f"expected a single cell of {Q} populations")
    return f


def bounce_back(cell):
    f = _cell_copy(cell)
    bounce_back_cell(f)
    return f


def moving_bounce_back(cell, wall_velocity):
    f = _cell_copy(cell)
    ux, uy, uz = (float(v) for v in wall_velocity)
    moving_bounce_back_cell(f, ux, uy, uz)
    return f


def regularized_boundary(cell, spec):
    """Rebuild all populations of a flat-boundary cell from (rho, u, Pi)."""
    if spec.kind not in ("RegularizedVelocity", "RegularizedPressure"):
        raise BoundaryConfigError(f"{spec.kind} is not a regularized boundary")
    f = _cell_copy(cell)
    if spec.kind == "RegularizedVelocity":
        ux, uy, uz = (float(v) for v in spec.value)
        regularized_velocity_cell(f, spec.axis, spec.orient, ux, uy, uz)
    else:
        rho = float(np.atleast_1d(spec.value)[0])
        regularized_pressure_cell(f, spec.axis, spec.orient, rho)
    return f
