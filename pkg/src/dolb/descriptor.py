"""D3Q19 lattice constants, equilibria and moments.

Populations are stored everywhere in offset form ``fbar_i = f_i - w_i`` so the
rest state at unit density is identically zero.  Keeping the large constant
part out of the stored value preserves significant digits in single
precision.

The functions ending in ``_cell`` are numba kernels that work on one cell:
they read and write a length-19 array (the "cell view").  Both lattice
containers call exactly these kernels, whatever their memory layout.  The
plain-named functions are numpy-facing wrappers vectorised over trailing
axes.
"""
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numba import njit

Q = 19
CS2 = 1.0 / 3.0

# Canonical velocity ordering: rest, six axis directions, twelve face
# diagonals.  Opposite directions are adjacent (odd/even pairs).
VELOCITIES = np.array([
    (0, 0, 0),
    (1, 0, 0), (-1, 0, 0),
    (0, 1, 0), (0, -1, 0),
    (0, 0, 1), (0, 0, -1),
    (1, 1, 0), (-1, -1, 0),
    (1, -1, 0), (-1, 1, 0),
    (1, 0, 1), (-1, 0, -1),
    (1, 0, -1), (-1, 0, 1),
    (0, 1, 1), (0, -1, -1),
    (0, 1, -1), (0, -1, 1),
], dtype=np.int64)

WEIGHTS_EXACT = (
    [Fraction(1, 3)] + [Fraction(1, 18)] * 6 + [Fraction(1, 36)] * 12
)
WEIGHTS = np.array([float(w) for w in WEIGHTS_EXACT])


def _opposites(c):
    opp = np.empty(len(c), dtype=np.int64)
    for i, ci in enumerate(c):
        (j,) = np.nonzero((c == -ci).all(axis=1))[0]
        opp[i] = j
    return opp


OPPOSITE = _opposites(VELOCITIES)

# Second-order tensor components in the order used for Pi_neq:
# xx, yy, zz, xy, xz, yz.
TENSOR_COMPONENTS = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))

# numba freezes module-level arrays as compile-time constants
_C = VELOCITIES.astype(np.float64)
_W = WEIGHTS


class DegenerateCellError(ValueError):
    """Raised when a cell has non-positive density."""


@dataclass(frozen=True)
class LatticeDescriptor:
    q: int
    velocities: np.ndarray
    weights: np.ndarray
    opposite: np.ndarray
    cs2: float

    @property
    def weights_exact(self):
        return WEIGHTS_EXACT


D3Q19 = LatticeDescriptor(
    q=Q, velocities=VELOCITIES, weights=WEIGHTS, opposite=OPPOSITE, cs2=CS2
)


@dataclass
class CellState:
    """Macroscopic state of one cell plus its offset-form populations."""

    rho: float
    u: np.ndarray
    populations: np.ndarray

    @classmethod
    def from_populations(cls, populations):
        populations = np.asarray(populations, dtype=float)
        rho, u, _ = moments(populations)
        return cls(float(rho), np.asarray(u, dtype=float), populations)


# ---------------------------------------------------------------------------
# cell kernels

@njit(cache=True)
def density_velocity_cell(f):
    # written out per direction; the generic loop is several times slower
    s = (f[0] + f[1] + f[2] + f[3] + f[4] + f[5] + f[6] + f[7] + f[8] + f[9]
         + f[10] + f[11] + f[12] + f[13] + f[14] + f[15] + f[16] + f[17] + f[18])
    jx = f[1] - f[2] + f[7] - f[8] + f[9] - f[10] + f[11] - f[12] + f[13] - f[14]
    jy = f[3] - f[4] + f[7] - f[8] - f[9] + f[10] + f[15] - f[16] + f[17] - f[18]
    jz = f[5] - f[6] + f[11] - f[12] - f[13] + f[14] + f[15] - f[16] - f[17] + f[18]
    rho = 1.0 + s
    return rho, jx / rho, jy / rho, jz / rho


@njit(cache=True)
def pi_neq_cell(f, rho, ux, uy, uz):
    """Off-equilibrium second moment (xx, yy, zz, xy, xz, yz)."""
    pxx = 0.0
    pyy = 0.0
    pzz = 0.0
    pxy = 0.0
    pxz = 0.0
    pyz = 0.0
    for i in range(19):
        fi = f[i]
        cx = _C[i, 0]
        cy = _C[i, 1]
        cz = _C[i, 2]
        pxx += cx * cx * fi
        pyy += cy * cy * fi
        pzz += cz * cz * fi
        pxy += cx * cy * fi
        pxz += cx * cz * fi
        pyz += cy * cz * fi
    # sum_i c c fbar_eq = rho u u + (rho - 1) cs2 I
    trace_eq = (rho - 1.0) * (1.0 / 3.0)
    pxx -= rho * ux * ux + trace_eq
    pyy -= rho * uy * uy + trace_eq
    pzz -= rho * uz * uz + trace_eq
    pxy -= rho * ux * uy
    pxz -= rho * ux * uz
    pyz -= rho * uy * uz
    return pxx, pyy, pzz, pxy, pxz, pyz


@njit(cache=True)
def equilibrium2_cell(rho, ux, uy, uz, out):
    usq = 1.5 * (ux * ux + uy * uy + uz * uz)
    rm1 = rho - 1.0
    out[0] = _W[0] * (rm1 - rho * usq)
    # opposite directions come in adjacent pairs and share c.u up to sign
    for i in range(1, 19, 2):
        cu = 3.0 * (_C[i, 0] * ux + _C[i, 1] * uy + _C[i, 2] * uz)
        even = rm1 + rho * (0.5 * cu * cu - usq)
        odd = rho * cu
        out[i] = _W[i] * (even + odd)
        out[i + 1] = _W[i] * (even - odd)


@njit(cache=True)
def equilibrium4_cell(rho, ux, uy, uz, out):
    # Hermite series to third order; the D3Q19-supported third-order
    # polynomials are xxy, xxz, xyy, yyz, xzz, yzz (xxx and xyz vanish on
    # the lattice).
    usq = 1.5 * (ux * ux + uy * uy + uz * uz)
    uxxy = ux * ux * uy
    uxxz = ux * ux * uz
    uxyy = ux * uy * uy
    uyyz = uy * uy * uz
    uxzz = ux * uz * uz
    uyzz = uy * uz * uz
    for i in range(19):
        cx = _C[i, 0]
        cy = _C[i, 1]
        cz = _C[i, 2]
        cu = 3.0 * (cx * ux + cy * uy + cz * uz)
        h3 = ((cx * cx - 1.0 / 3.0) * cy * uxxy
              + (cx * cx - 1.0 / 3.0) * cz * uxxz
              + (cy * cy - 1.0 / 3.0) * cx * uxyy
              + (cy * cy - 1.0 / 3.0) * cz * uyyz
              + (cz * cz - 1.0 / 3.0) * cx * uxzz
              + (cz * cz - 1.0 / 3.0) * cy * uyzz)
        out[i] = _W[i] * ((rho - 1.0)
                          + rho * (cu + 0.5 * cu * cu - usq + 13.5 * h3))


# ---------------------------------------------------------------------------
# numpy-facing wrappers

@njit(cache=True)
def _eq_field(rho, u, out, order):
    n = rho.shape[0]
    buf = np.empty(19)
    for k in range(n):
        if order == 2:
            equilibrium2_cell(rho[k], u[0, k], u[1, k], u[2, k], buf)
        else:
            equilibrium4_cell(rho[k], u[0, k], u[1, k], u[2, k], buf)
        for i in range(19):
            out[i, k] = buf[i]


@njit(cache=True)
def _moment_field(f, rho, u, pi):
    n = f.shape[1]
    buf = np.empty(19)
    for k in range(n):
        for i in range(19):
            buf[i] = f[i, k]
        r, ux, uy, uz = density_velocity_cell(buf)
        rho[k] = r
        u[0, k] = ux
        u[1, k] = uy
        u[2, k] = uz
        p = pi_neq_cell(buf, r, ux, uy, uz)
        for m in range(6):
            pi[m, k] = p[m]


def _equilibrium(rho, u, order):
    rho = np.asarray(rho, dtype=float)
    u = np.asarray(u, dtype=float)
    shape = np.broadcast_shapes(rho.shape, u.shape[1:])
    rho_flat = np.ascontiguousarray(np.broadcast_to(rho, shape)).reshape(-1)
    u_flat = np.ascontiguousarray(
        np.broadcast_to(u, (3,) + shape)).reshape(3, -1)
    out = np.empty((Q, rho_flat.size))
    _eq_field(rho_flat, u_flat, out, order)
    return out.reshape((Q,) + shape)


def equilibrium2(rho, u):
    """Second-order weighted equilibrium in offset form.

    ``rho`` has shape ``S`` and ``u`` shape ``(3, *S)``; the result has shape
    ``(19, *S)``.
    """
    return _equilibrium(rho, u, 2)


def equilibrium4(rho, u):
    """Third-order Hermite equilibrium (the RR equilibrium) in offset form."""
    return _equilibrium(rho, u, 4)


def moments(populations, check=True):
    """Return ``(rho, u, pi_neq)`` of offset-form populations.

    ``pi_neq`` is returned as a full ``(3, 3, *S)`` tensor.
    """
    f = np.asarray(populations, dtype=float)
    shape = f.shape[1:]
    flat = np.ascontiguousarray(f.reshape(Q, -1))
    n = flat.shape[1]
    rho = np.empty(n)
    u = np.empty((3, n))
    pi6 = np.empty((6, n))
    _moment_field(flat, rho, u, pi6)
    if check and np.any(~(rho > 0)):
        bad = int(np.count_nonzero(~(rho > 0)))
        raise DegenerateCellError(f"{bad} cell(s) with non-positive density")
    pi = np.empty((3, 3, n))
    for m, (a, b) in enumerate(TENSOR_COMPONENTS):
        pi[a, b] = pi6[m]
        pi[b, a] = pi6[m]
    return rho.reshape(shape), u.reshape((3,) + shape), pi.reshape((3, 3) + shape)
