"""Domain reductions and derived fields.

Reductions are post-step passes over the populations.  They use numpy's
pairwise summation on contiguous data, which fixes the combination order,
so repeated runs agree bit for bit.
"""
import csv
import math
from dataclasses import dataclass, field

import numpy as np

MILLIDARCY_M2 = 9.869233e-16

# first-derivative central stencil, offsets 1..4
FD8_COEFFS = (4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0)
FD8_REACH = 4


class DiagnosticsError(ValueError):
    pass


def kinetic_energy(u):
    """Cell mean of |u|^2 / 2 for a ``(3, nx, ny, nz)`` field."""
    u = np.asarray(u, dtype=np.float64)
    return float(0.5 * np.mean(u[0] ** 2 + u[1] ** 2 + u[2] ** 2))


def fd8_derivative(f, axis, periodic=True):
    """Eighth-order central derivative along ``axis`` (unit spacing).

    Non-periodic axes leave NaN in the four cells next to each end.
    """
    f = np.asarray(f, dtype=np.float64)
    n = f.shape[axis]
    if not periodic and n < 2 * FD8_REACH + 1:
        raise DiagnosticsError(
            f"non-periodic axis {axis} needs at least {2 * FD8_REACH + 1} cells, has {n}")
    out = np.zeros_like(f)
    for k, c in enumerate(FD8_COEFFS, start=1):
        out += c * (np.roll(f, -k, axis=axis) - np.roll(f, k, axis=axis))
    if not periodic:
        idx = [slice(None)] * f.ndim
        idx[axis] = np.r_[0:FD8_REACH, n - FD8_REACH:n]
        out[tuple(idx)] = np.nan
    return out


def vorticity_fd8(u, periodic=(True, True, True)):
    u = np.asarray(u, dtype=np.float64)

    def d(comp, axis):
        return fd8_derivative(u[comp], axis, periodic[axis])

    return np.stack([d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1)])


def enstrophy(w):
    """Cell mean of |w|^2 / 2; NaN cells (near walls) are left out."""
    w = np.asarray(w, dtype=np.float64)
    sq = 0.5 * (w[0] ** 2 + w[1] ** 2 + w[2] ** 2)
    valid = np.isfinite(sq)
    if not valid.any():
        raise DiagnosticsError("no interior cells to average")
    if valid.all():
        return float(np.mean(sq))
    return float(np.mean(sq[valid]))


def permeability(mean_velocity, nu, lx, dP):
    """Darcy permeability ``u nu lx / dP`` in lattice units."""
    if nu <= 0:
        raise DiagnosticsError("viscosity must be positive")
    if dP == 0:
        raise DiagnosticsError("zero pressure drop: permeability is unbounded")
    if dP < 0:
        raise DiagnosticsError(f"pressure drop must be positive, got {dP}")
    return mean_velocity * nu * lx / dP


def to_millidarcy(k_lattice, dx):
    return k_lattice * dx * dx / MILLIDARCY_M2


def averaged_profiles(snapshots, lines):
    """Average scalar fields sampled along lines of cells.

    ``lines`` maps a name to ``(axis, (i, j))`` where ``(i, j)`` fixes the
    two other coordinates in increasing-axis order.  Returns name ->
    ``(coord, mean)`` with ``coord = 2 (a + 1/2) / L - 1``.
    """
    snapshots = [np.asarray(s, dtype=np.float64) for s in snapshots]
    if not snapshots:
        raise DiagnosticsError("no snapshots to average")
    stack = np.stack(snapshots)
    mean = stack.mean(axis=0)
    out = {}
    for name, (axis, fixed) in lines.items():
        idx = list(fixed)
        idx.insert(axis, slice(None))
        prof = mean[tuple(idx)]
        n = prof.shape[0]
        coord = 2.0 * (np.arange(n) + 0.5) / n - 1.0
        out[name] = (coord, prof)
    return out


@dataclass
class DiagnosticsSeries:
    """Rows of (step, t / t_c, k, eps, extras...)."""

    columns: tuple = ("step", "t", "k", "eps")
    rows: list = field(default_factory=list)

    def append(self, step, t, k, eps, *extra):
        row = (int(step), float(t), float(k), float(eps)) + tuple(float(e) for e in extra)
        if len(row) != len(self.columns):
            raise DiagnosticsError(f"row has {len(row)} values, header {len(self.columns)}")
        if self.rows and row[0] <= self.rows[-1][0]:
            raise DiagnosticsError("steps must increase strictly")
        if not all(math.isfinite(v) for v in row[1:]):
            raise DiagnosticsError(f"non-finite diagnostic at step {step}")
        self.rows.append(row)

    def column(self, name):
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows])

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns)
            for r in self.rows:
                w.writerow([str(r[0])] + ["%.17g" % v for v in r[1:]])

    @classmethod
    def read_csv(cls, path):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader))
            series = cls(columns=header)
            for rec in reader:
                series.append(int(rec[0]), *(float(v) for v in rec[1:]))
        return series
