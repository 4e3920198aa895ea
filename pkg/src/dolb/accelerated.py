"""Structure-of-arrays block with integer-tag dispatch.

An :class:`AcceleratedBlock` holds its populations as 19 contiguous arrays
(one per direction) for a block padded with a one-cell envelope.  Each cell
carries a 32-bit tag naming its dynamics chain and an offset into a flat
parameter table owned by the :class:`DynamicsRegistry`.

The step kernel pulls a cell's 19 populations into a local buffer, runs the
tag's chain program on it and writes the buffer to the second population
array.  Only the chains named in the :class:`DispatchSet` are handed to the
kernel; a cell whose tag is not in the set is reported before anything is
written.
"""
import struct
from bisect import bisect_left

import numpy as np
from numba import njit

from . import boundaries as bc
from . import collision as coll
from .descriptor import Q, VELOCITIES
from .dynamics import (
    ChainError, DynamicsChain, link_policy, param_count, split_chain,
)

MAX_LINKS = 4

# opcodes of the chain interpreter
OP_NONE, OP_BB, OP_MBB, OP_REG_VEL, OP_REG_PRESS, OP_LES, OP_BGK, OP_TRT, OP_RR = range(9)

_FIXED_OPS = {
    coll.NO_DYNAMICS: OP_NONE,
    bc.BOUNCE_BACK: OP_BB,
    bc.MOVING_BOUNCE_BACK: OP_MBB,
    coll.LES_SMAGORINSKY: OP_LES,
    coll.COLL_BGK: OP_BGK,
    coll.COLL_TRT: OP_TRT,
    coll.COLL_RR: OP_RR,
}


class MissingModelError(RuntimeError):
    """A cell's chain is absent from the dispatch set used for a step."""

    def __init__(self, chains):
        self.chains = sorted(chains)
        super().__init__(
            "dispatch set lacks model(s) present in the block: "
            + ", ".join(self.chains))


def compile_chain(name):
    """Translate a chain string into an interpreter program ``(MAX_LINKS, 3)``."""
    links = split_chain(name)
    if len(links) > MAX_LINKS:
        raise ChainError(f"chain {name} longer than {MAX_LINKS} links")
    prog = np.zeros((MAX_LINKS, 3), dtype=np.int64)
    for k, link in enumerate(links):
        link_policy(link)
        if link in _FIXED_OPS:
            prog[k, 0] = _FIXED_OPS[link]
        else:
            kind, axis, orient = bc.parse_regularized_link(link)
            prog[k] = (OP_REG_VEL if kind == "velocity" else OP_REG_PRESS,
                       axis, orient)
    return prog, len(links)


class DynamicsRegistry:
    """Bidirectional chain-string <-> tag map plus the flat parameter table.

    Tags are indices into the sorted list of registered chain strings, so
    registering a chain that sorts before existing ones renumbers them.
    Containers that store tags subscribe via :meth:`add_listener` and get a
    remapping array whenever that happens.
    """

    def __init__(self):
        self.chains = []
        self.params_table = np.zeros(0)
        self._param_offsets = {}
        self._listeners = []

    def __len__(self):
        return len(self.chains)

    def add_listener(self, fn):
        self._listeners.append(fn)

    def tag_of(self, name):
        i = bisect_left(self.chains, name)
        if i == len(self.chains) or self.chains[i] != name:
            raise KeyError(f"chain {name!r} is not registered")
        return i

    def chain_for(self, tag):
        return self.chains[tag]

    def register(self, chain):
        """Register a :class:`DynamicsChain` (or chain string); return its tag."""
        name = chain if isinstance(chain, str) else chain.name
        if isinstance(chain, str):
            DynamicsChain(split_chain(name), (0.0,) * param_count(split_chain(name)))
        i = bisect_left(self.chains, name)
        if i < len(self.chains) and self.chains[i] == name:
            return i
        old_n = len(self.chains)
        self.chains.insert(i, name)
        remap = np.arange(old_n, dtype=np.int32)
        remap[i:] += 1
        for fn in self._listeners:
            fn(remap)
        return i

    def register_params(self, chain):
        """Store a chain instance's parameters; return its table offset."""
        if not chain.params:
            return 0
        key = (chain.name, chain.params)
        off = self._param_offsets.get(key)
        if off is None:
            off = len(self.params_table)
            self.params_table = np.concatenate(
                [self.params_table, np.asarray(chain.params, dtype=np.float64)])
            self._param_offsets[key] = off
        return off

    def chain_instance(self, tag, offset):
        name = self.chains[tag]
        links = split_chain(name)
        n = param_count(links)
        return DynamicsChain(links, tuple(self.params_table[offset:offset + n]))

    def programs(self, names):
        """Program table indexed by tag, populated only for ``names``."""
        n = max(len(self.chains), 1)
        progs = np.zeros((n, MAX_LINKS, 3), dtype=np.int64)
        lengths = np.zeros(n, dtype=np.int64)
        for name in names:
            t = self.tag_of(name)
            progs[t], lengths[t] = compile_chain(name)
        return progs, lengths


class DispatchSet:
    """Explicit subset of chains compiled into a step."""

    def __init__(self, chains):
        self.chains = frozenset(chains)
        if not self.chains:
            raise ValueError("dispatch set must not be empty")

    @classmethod
    def from_tags(cls, registry, tags):
        return cls(registry.chain_for(int(t)) for t in tags)

    @classmethod
    def full(cls, registry):
        return cls(registry.chains)

    def tags(self, registry):
        missing = [c for c in self.chains if c not in registry.chains]
        if missing:
            raise KeyError(f"dispatch set names unregistered chains {missing}")
        return sorted(registry.tag_of(c) for c in self.chains)

    def __contains__(self, name):
        return name in self.chains

    def __iter__(self):
        return iter(sorted(self.chains))

    def __len__(self):
        return len(self.chains)

    def __repr__(self):
        return f"DispatchSet({sorted(self.chains)})"


# ---------------------------------------------------------------------------
# step kernel

@njit(cache=True)
def run_chain(f, prog, nlinks, params, off):
    p = off
    les = -1.0
    for k in range(nlinks):
        op = prog[k, 0]
        if op == OP_NONE:
            pass
        elif op == OP_BB:
            bc.bounce_back_cell(f)
        elif op == OP_MBB:
            bc.moving_bounce_back_cell(f, params[p], params[p + 1], params[p + 2])
            p += 3
        elif op == OP_REG_VEL:
            bc.regularized_velocity_cell(f, prog[k, 1], prog[k, 2], params[p],
                                         params[p + 1], params[p + 2])
            p += 3
        elif op == OP_REG_PRESS:
            bc.regularized_pressure_cell(f, prog[k, 1], prog[k, 2], params[p])
            p += 1
        elif op == OP_LES:
            les = params[p]
            p += 1
        else:
            om = params[p]
            if les >= 0.0:
                om = coll.smagorinsky_omega_cell(f, om, les)
            if op == OP_BGK:
                coll.bgk_cell(f, om)
                p += 1
            elif op == OP_TRT:
                coll.trt_cell(f, om, coll.trt_omega_minus(om, params[p + 1]))
                p += 2
            else:
                coll.rr_cell(f, om, params[p + 1])
                p += 2


@njit(cache=True, nogil=True)
def _bulk_kernel(fin, fout, tags, poff, params, fast, nx, ny, nz, shifts):
    # single-link BGK/TRT cells; fast[t] is 1 for BGK, 2 for TRT, 0 otherwise
    local = np.empty(19, dtype=fin.dtype)
    for x in range(1, nx - 1):
        for y in range(1, ny - 1):
            base = (x * ny + y) * nz
            for z in range(1, nz - 1):
                k = base + z
                kind = fast[tags[k]]
                if kind == 0:
                    continue
                for i in range(19):
                    local[i] = fin[i, k - shifts[i]]
                off = poff[k]
                if kind == 1:
                    coll.bgk_cell(local, params[off])
                else:
                    coll.trt_cell(local, params[off],
                                  coll.trt_omega_minus(params[off], params[off + 1]))
                for i in range(19):
                    fout[i, k] = local[i]


@njit(cache=True, nogil=True)
def _chain_kernel(fin, fout, cells, tags, poff, params, progs, lengths, shifts):
    # every other cell goes through the chain interpreter
    local = np.empty(19, dtype=fin.dtype)
    for n in range(cells.shape[0]):
        k = cells[n]
        for i in range(19):
            local[i] = fin[i, k - shifts[i]]
        t = tags[k]
        run_chain(local, progs[t], lengths[t], params, poff[k])
        for i in range(19):
            fout[i, k] = local[i]


# ---------------------------------------------------------------------------
# block container

class AcceleratedBlock:
    """SoA block of ``interior`` cells padded by a one-cell envelope."""

    def __init__(self, interior, origin=(0, 0, 0), global_dims=None,
                 dtype=np.float64):
        self.interior = tuple(int(n) for n in interior)
        self.origin = tuple(int(o) for o in origin)
        self.global_dims = tuple(global_dims) if global_dims else self.interior
        self.dims = tuple(n + 2 for n in self.interior)
        self.dtype = np.dtype(dtype)
        n = int(np.prod(self.dims))
        self.f_in = np.zeros((Q, n), dtype=self.dtype)
        self.f_out = np.zeros((Q, n), dtype=self.dtype)
        self.tags = np.zeros(n, dtype=np.int32)
        self.param_index = np.zeros(n, dtype=np.int32)
        self.cell_index = self._global_indices()
        nx, ny, nz = self.dims
        self.shifts = np.array(
            [(cx * ny + cy) * nz + cz for cx, cy, cz in VELOCITIES],
            dtype=np.int64)

    def _global_indices(self):
        gx, gy, gz = self.global_dims
        axes = [np.arange(-1, n + 1) + o for n, o in zip(self.interior, self.origin)]
        X, Y, Z = np.meshgrid(*axes, indexing="ij")
        inside = ((X >= 0) & (X < gx) & (Y >= 0) & (Y < gy) & (Z >= 0) & (Z < gz))
        idx = (X.astype(np.int64) * gy + Y) * gz + Z
        idx[~inside] = -1
        interior = np.zeros(self.dims, dtype=bool)
        interior[1:-1, 1:-1, 1:-1] = True
        idx[~interior] = -1
        return idx.reshape(-1)

    @property
    def n_cells(self):
        return int(np.prod(self.interior))

    @property
    def precision(self):
        return 8 * self.dtype.itemsize

    def view(self, arr):
        """Reshape a flat per-cell array (or SoA pair) to padded 3-D form."""
        return arr.reshape(arr.shape[:-1] + self.dims)

    def interior_slices(self):
        return tuple(slice(1, n + 1) for n in self.interior)

    def interior_populations(self):
        return self.view(self.f_in)[(slice(None),) + self.interior_slices()]

    def interior_tags(self):
        return self.view(self.tags)[self.interior_slices()]

    def remap_tags(self, remap):
        if len(remap):
            self.tags[:] = remap[self.tags]

    def present_tags(self):
        return np.unique(self.interior_tags())

    def swap(self):
        self.f_in, self.f_out = self.f_out, self.f_in


def acc_collide_and_stream(block, registry, dispatch=None):
    """Advance one block by one step.

    The envelope of ``block.f_in`` must already hold the neighbour data.
    With ``dispatch=None`` every registered chain is included (the plain
    call).
    """
    names = registry.chains if dispatch is None else dispatch
    allowed = set(names)
    present = block.present_tags()
    missing = [registry.chain_for(int(t)) for t in present
               if registry.chain_for(int(t)) not in allowed]
    if missing:
        raise MissingModelError(missing)
    progs, lengths = registry.programs(allowed & set(registry.chains))
    nx, ny, nz = block.dims
    fast = np.zeros(len(lengths), dtype=np.int8)
    single = lengths == 1
    fast[single & (progs[:, 0, 0] == OP_BGK)] = 1
    fast[single & (progs[:, 0, 0] == OP_TRT)] = 2
    slow = np.flatnonzero((fast[block.tags] == 0) & (block.cell_index >= 0))
    _bulk_kernel(block.f_in, block.f_out, block.tags, block.param_index,
                 registry.params_table, fast, nx, ny, nz, block.shifts)
    _chain_kernel(block.f_in, block.f_out, slow, block.tags, block.param_index,
                  registry.params_table, progs, lengths, block.shifts)
    block.swap()
    return block


# ---------------------------------------------------------------------------
# field dumps

MAGIC = b"DOLB1"
_HEADER = struct.Struct("<5s3IBI")


def write_field_dump(path, populations):
    """Write ``(19, nx, ny, nz)`` populations as little-endian SoA arrays."""
    pops = np.asarray(populations)
    if pops.ndim != 4 or pops.shape[0] != Q:
        raise ValueError("expected populations of shape (19, nx, ny, nz)")
    if pops.dtype not in (np.float32, np.float64):
        raise ValueError("populations must be 32- or 64-bit floats")
    nx, ny, nz = pops.shape[1:]
    le = pops.astype(pops.dtype.newbyteorder("<"), copy=False)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, nx, ny, nz, pops.dtype.itemsize * 8, Q))
        for i in range(Q):
            fh.write(np.ascontiguousarray(le[i]).tobytes())


def read_field_dump(path):
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, nx, ny, nz, bits, q = _HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if bits not in (32, 64) or q != Q:
            raise ValueError(f"{path}: unsupported precision {bits} or q={q}")
        dtype = np.dtype("<f4" if bits == 32 else "<f8")
        data = np.frombuffer(fh.read(), dtype=dtype)
    if data.size != q * nx * ny * nz:
        raise ValueError(f"{path}: payload size mismatch")
    return data.reshape(q, nx, ny, nz).astype(dtype.newbyteorder("="))
