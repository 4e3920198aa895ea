"""Cell-local collision operators: BGK, TRT, recursive regularized, Smagorinsky.

Each ``*_cell`` kernel updates a single cell view (length-19 offset-form
array) in place.  The reference lattice calls them cell by cell through its
dynamics objects; the accelerated lattice calls them from its compiled step
loop.  No other copy of this arithmetic exists.
"""
from dataclasses import dataclass

import numpy as np
from numba import njit

from .descriptor import (
    _C, _W, OPPOSITE, Q, density_velocity_cell, equilibrium2_cell, equilibrium4_cell,
    pi_neq_cell,
)

COLL_BGK = "COLL_BGK"
COLL_TRT = "COLL_TRT"
COLL_RR = "COLL_RR"
LES_SMAGORINSKY = "LES_Smagorinsky"
NO_DYNAMICS = "NoDynamics"
BOUNCE_BACK = "BounceBack"

COLLISION_MODELS = (COLL_BGK, COLL_TRT, COLL_RR)

DEFAULT_MAGIC = 3.0 / 16.0

@dataclass(frozen=True)
class CollisionParams:
    """Relaxation parameters shared by the in-scope collision models.

    ``omega_bulk`` relaxes the bulk (trace) part of the second-order
    off-equilibrium in RR; the recursive third-order part always follows the
    second-order moments, so genuine higher-order off-equilibrium content is
    discarded (rate 1).
    """

    omega: float
    lam: float = DEFAULT_MAGIC
    smagorinsky_c: float = 0.0
    omega_bulk: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.omega < 2.0:
            raise ValueError(f"omega must lie in (0, 2), got {self.omega}")
        if self.lam <= 0.0:
            raise ValueError(f"magic parameter must be positive, got {self.lam}")

    @property
    def tau(self):
        return 1.0 / self.omega

    @property
    def omega_minus(self):
        return trt_omega_minus(self.omega, self.lam)

    @property
    def viscosity(self):
        return (1.0 / self.omega - 0.5) / 3.0


def omega_from_viscosity(nu):
    return 1.0 / (3.0 * nu + 0.5)


@njit(cache=True)
def trt_omega_minus(omega, lam):
    # lam = (1/omega - 1/2)(1/omega_minus - 1/2)
    return 1.0 / (lam / (1.0 / omega - 0.5) + 0.5)


@njit(cache=True)
def bgk_cell(f, omega):
    rho, ux, uy, uz = density_velocity_cell(f)
    usq = 1.5 * (ux * ux + uy * uy + uz * uz)
    rm1 = rho - 1.0
    f[0] = f[0] - omega * (f[0] - _W[0] * (rm1 - rho * usq))
    for i in range(1, 19, 2):
        cu = 3.0 * (_C[i, 0] * ux + _C[i, 1] * uy + _C[i, 2] * uz)
        even = rm1 + rho * (0.5 * cu * cu - usq)
        odd = rho * cu
        f[i] = f[i] - omega * (f[i] - _W[i] * (even + odd))
        f[i + 1] = f[i + 1] - omega * (f[i + 1] - _W[i] * (even - odd))


@njit(cache=True)
def trt_cell(f, omega, omega_minus):
    rho, ux, uy, uz = density_velocity_cell(f)
    usq = 1.5 * (ux * ux + uy * uy + uz * uz)
    rm1 = rho - 1.0
    f[0] = f[0] - omega * (f[0] - _W[0] * (rm1 - rho * usq))
    for i in range(1, 19, 2):
        cu = 3.0 * (_C[i, 0] * ux + _C[i, 1] * uy + _C[i, 2] * uz)
        # symmetric and antisymmetric parts of the pair (i, i+1)
        ep = _W[i] * (rm1 + rho * (0.5 * cu * cu - usq))
        em = _W[i] * rho * cu
        fp = 0.5 * (f[i] + f[i + 1])
        fm = 0.5 * (f[i] - f[i + 1])
        dp = omega * (fp - ep)
        dm = omega_minus * (fm - em)
        f[i] = f[i] - dp - dm
        f[i + 1] = f[i + 1] - dp + dm


@njit(cache=True)
def _regularized_rebuild(f, rho, ux, uy, uz, axx, ayy, azz, axy, axz, ayz):
    """Write feq4 + Hermite reconstruction of (a2, recursive a3) into f."""
    a_xxy = 2.0 * ux * axy + uy * axx
    a_xxz = 2.0 * ux * axz + uz * axx
    a_xyy = 2.0 * uy * axy + ux * ayy
    a_yyz = 2.0 * uy * ayz + uz * ayy
    a_xzz = 2.0 * uz * axz + ux * azz
    a_yzz = 2.0 * uz * ayz + uy * azz
    equilibrium4_cell(rho, ux, uy, uz, f)
    for i in range(19):
        cx = _C[i, 0]
        cy = _C[i, 1]
        cz = _C[i, 2]
        hxx = cx * cx - 1.0 / 3.0
        hyy = cy * cy - 1.0 / 3.0
        hzz = cz * cz - 1.0 / 3.0
        h2 = (hxx * axx + hyy * ayy + hzz * azz
              + 2.0 * (cx * cy * axy + cx * cz * axz + cy * cz * ayz))
        h3 = (hxx * cy * a_xxy + hxx * cz * a_xxz + hyy * cx * a_xyy
              + hyy * cz * a_yyz + hzz * cx * a_xzz + hzz * cy * a_yzz)
        f[i] += _W[i] * (4.5 * h2 + 13.5 * h3)


@njit(cache=True)
def rr_cell(f, omega, omega_bulk):
    rho, ux, uy, uz = density_velocity_cell(f)
    pxx, pyy, pzz, pxy, pxz, pyz = pi_neq_cell(f, rho, ux, uy, uz)
    third = (pxx + pyy + pzz) / 3.0
    sd = 1.0 - omega
    sb = 1.0 - omega_bulk
    axx = sd * (pxx - third) + sb * third
    ayy = sd * (pyy - third) + sb * third
    azz = sd * (pzz - third) + sb * third
    _regularized_rebuild(f, rho, ux, uy, uz, axx, ayy, azz,
                         sd * pxy, sd * pxz, sd * pyz)


@njit(cache=True)
def regularize_cell(f):
    """Replace f by its RR reconstruction without relaxation."""
    rho, ux, uy, uz = density_velocity_cell(f)
    pxx, pyy, pzz, pxy, pxz, pyz = pi_neq_cell(f, rho, ux, uy, uz)
    _regularized_rebuild(f, rho, ux, uy, uz, pxx, pyy, pzz, pxy, pxz, pyz)


@njit(cache=True)
def smagorinsky_tau(tau0, pi_norm, rho, c):
    # tau_eff from nu_t = (C dx)^2 |S| with |S| expressed through Pi_neq
    return 0.5 * (tau0 + np.sqrt(tau0 * tau0
                                 + 18.0 * np.sqrt(2.0) * c * c * pi_norm / rho))


@njit(cache=True)
def smagorinsky_omega_cell(f, omega, c):
    rho, ux, uy, uz = density_velocity_cell(f)
    pxx, pyy, pzz, pxy, pxz, pyz = pi_neq_cell(f, rho, ux, uy, uz)
    norm = np.sqrt(pxx * pxx + pyy * pyy + pzz * pzz
                   + 2.0 * (pxy * pxy + pxz * pxz + pyz * pyz))
    return 1.0 / smagorinsky_tau(1.0 / omega, norm, rho, c)


# ---------------------------------------------------------------------------
# numpy-facing wrappers (copy in, apply kernel column by column, copy out)

@njit(cache=True)
def _apply_columns(f, model, p0, p1, p2):
    buf = np.empty(19)
    for k in range(f.shape[1]):
        for i in range(19):
            buf[i] = f[i, k]
        if model == 0:
            bgk_cell(buf, p0)
        elif model == 1:
            trt_cell(buf, p0, p1)
        elif model == 2:
            rr_cell(buf, p0, p1)
        elif model == 3:
            regularize_cell(buf)
        elif model == 4:
            om = smagorinsky_omega_cell(buf, p0, p2)
            bgk_cell(buf, om)
        elif model == 5:
            om = smagorinsky_omega_cell(buf, p0, p2)
            trt_cell(buf, om, trt_omega_minus(om, p1))
        elif model == 6:
            om = smagorinsky_omega_cell(buf, p0, p2)
            rr_cell(buf, om, p1)
        for i in range(19):
            f[i, k] = buf[i]


def _columns(cell):
    f = np.array(cell, dtype=float, copy=True)
    if f.shape[0] != Q:
        raise ValueError(f"expected {Q} populations along axis 0, got {f.shape}")
    return f, f.reshape(Q, -1)


def _run(cell, model, p0=0.0, p1=0.0, p2=0.0):
    f, cols = _columns(cell)
    cols = np.ascontiguousarray(cols)
    _apply_columns(cols, model, float(p0), float(p1), float(p2))
    return cols.reshape(f.shape)


def bgk_collide(cell, params):
    return _run(cell, 0, params.omega)


def trt_collide(cell, params):
    return _run(cell, 1, params.omega, params.omega_minus)


def rr_collide(cell, params):
    return _run(cell, 2, params.omega, params.omega_bulk)


def regularize(cell):
    return _run(cell, 3)


_WRAPPED = {COLL_BGK: 4, COLL_TRT: 5, COLL_RR: 6}


def smagorinsky_wrap(cell, params, base=COLL_BGK):
    """Apply ``base`` with the Smagorinsky-corrected relaxation rate."""
    try:
        model = _WRAPPED[base]
    except KeyError:
        raise ValueError(f"unknown base collision {base!r}") from None
    p1 = params.lam if base == COLL_TRT else params.omega_bulk
    return _run(cell, model, params.omega, p1, params.smagorinsky_c)


def smagorinsky_omega(cell, params):
    """Effective relaxation rate of each cell column."""
    f, cols = _columns(cell)
    out = np.empty(cols.shape[1])
    for k in range(cols.shape[1]):
        out[k] = smagorinsky_omega_cell(np.ascontiguousarray(cols[:, k]),
                                        params.omega, params.smagorinsky_c)
    return out.reshape(f.shape[1:])
