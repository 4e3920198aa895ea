"""Array-of-structures reference lattice with per-cell dynamics objects.

This container is the oracle for the accelerated one.  It favours
transparency over speed: populations live in a ``(nx, ny, nz, 19)`` array so
each cell's data is contiguous, and every cell is collided by calling the
``collide`` method of the dynamics object it references.
"""
import numpy as np

from .descriptor import Q, VELOCITIES, equilibrium2, moments
from .dynamics import ChainError, Dynamics


class ConfigurationError(ValueError):
    pass


class ReferenceLattice:
    def __init__(self, dims, dynamics, periodic=(True, True, True),
                 dtype=np.float64):
        dims = tuple(int(n) for n in dims)
        if len(dims) != 3 or min(dims) < 1:
            raise ConfigurationError(f"invalid lattice extents {dims}")
        if not isinstance(dynamics, Dynamics):
            raise ConfigurationError("default dynamics must be a Dynamics instance")
        self.dims = dims
        self.periodic = tuple(bool(p) for p in periodic)
        self.dtype = np.dtype(dtype)
        self.populations = np.zeros(dims + (Q,), dtype=self.dtype)
        self.cells = np.empty(dims, dtype=object)
        self.cells.fill(dynamics)
        self.time = 0

    @property
    def n_cells(self):
        return int(np.prod(self.dims))

    @property
    def chains(self):
        seen = {}
        for dyn in self.cells.flat:
            seen.setdefault(id(dyn), dyn)
        return list(seen.values())

    def _region(self, region):
        if region is None:
            return (slice(None),) * 3
        if len(region) != 3:
            raise ConfigurationError("region needs one slice per axis")
        out = []
        for sl, n in zip(region, self.dims):
            if isinstance(sl, (int, np.integer)):
                if not -n <= sl < n:
                    raise ConfigurationError(f"index {sl} outside extent {n}")
                sl = slice(sl, sl + 1 if sl != -1 else None)
            start, stop, step = sl.start, sl.stop, sl.step
            for v in (start, stop):
                if v is not None and not -n <= v <= n:
                    raise ConfigurationError(f"slice {sl} outside extent {n}")
            out.append(slice(start, stop, step))
        return tuple(out)

    def set_chain(self, region, dynamics):
        """Attach ``dynamics`` to every cell of ``region`` (a 3-tuple of slices)."""
        if not isinstance(dynamics, Dynamics):
            raise ConfigurationError("dynamics must be a Dynamics instance")
        self.cells[self._region(region)] = dynamics

    def set_chain_mask(self, mask, dynamics):
        if not isinstance(dynamics, Dynamics):
            raise ConfigurationError("dynamics must be a Dynamics instance")
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != self.dims:
            raise ConfigurationError("mask shape differs from lattice extents")
        self.cells[mask] = dynamics

    def initialize(self, rho, u):
        """Set populations to the second-order equilibrium of (rho, u)."""
        rho = np.broadcast_to(np.asarray(rho, dtype=float), self.dims)
        u = np.asarray(u, dtype=float)
        if u.shape == (3,):
            u = u.reshape(3, 1, 1, 1)
        u = np.broadcast_to(u, (3,) + self.dims)
        feq = equilibrium2(rho, u)
        self.populations[...] = np.moveaxis(feq, 0, -1)

    def macroscopic(self):
        """``(rho, u)`` fields of shape ``dims`` and ``(3, *dims)``."""
        rho, u, _ = moments(np.moveaxis(self.populations, -1, 0), check=False)
        return rho, u

    def validate(self):
        """Check that every referenced dynamics maps onto a known chain."""
        for dyn in self.chains:
            try:
                dyn.chain()
            except (ChainError, NotImplementedError, AttributeError) as exc:
                raise ConfigurationError(
                    f"cell dynamics {type(dyn).__name__} has no registered "
                    f"model policy: {exc}") from exc

    def _pull(self):
        src = self.populations
        ext = np.zeros(tuple(n + 2 for n in self.dims) + (Q,), dtype=self.dtype)
        ext[1:-1, 1:-1, 1:-1] = src
        for axis, per in enumerate(self.periodic):
            if not per:
                continue
            lo = [slice(None)] * 4
            hi = [slice(None)] * 4
            lo[axis], hi[axis] = 0, -1
            inner_hi = [slice(None)] * 4
            inner_lo = [slice(None)] * 4
            inner_hi[axis], inner_lo[axis] = -2, 1
            ext[tuple(lo)] = ext[tuple(inner_hi)]
            ext[tuple(hi)] = ext[tuple(inner_lo)]
        nx, ny, nz = self.dims
        out = np.empty_like(src)
        for i, (cx, cy, cz) in enumerate(VELOCITIES):
            out[..., i] = ext[1 - cx:1 - cx + nx, 1 - cy:1 - cy + ny,
                              1 - cz:1 - cz + nz, i]
        return out

    def collide_and_stream(self):
        """One step: pull every cell's populations from its neighbours, then
        collide them in place with the cell's own dynamics.

        Cells outside a non-periodic face contribute rest-state (zero offset)
        populations.
        """
        self.validate()
        work = self._pull()
        cells = self.cells
        nx, ny, nz = self.dims
        for x in range(nx):
            plane = work[x]
            dyn_plane = cells[x]
            for y in range(ny):
                row = plane[y]
                dyn_row = dyn_plane[y]
                for z in range(nz):
                    dyn_row[z].collide(row[z])
        self.populations = work
        self.time += 1

    def run(self, steps):
        for _ in range(steps):
            self.collide_and_stream()

    def total_mass(self):
        return float(self.n_cells + np.sum(self.populations, dtype=np.float64))

    def total_momentum(self):
        c = VELOCITIES.astype(float)
        flat = self.populations.reshape(-1, Q).astype(np.float64)
        return flat.sum(axis=0) @ c

    def copy(self):
        other = ReferenceLattice.__new__(ReferenceLattice)
        other.dims = self.dims
        other.periodic = self.periodic
        other.dtype = self.dtype
        other.populations = self.populations.copy()
        other.cells = self.cells.copy()
        other.time = self.time
        return other


def ref_collide_and_stream(lattice):
    lattice.collide_and_stream()
    return lattice


def ref_set_chain(lattice, region, chain):
    lattice.set_chain(region, chain)

