"""Regular block decomposition, envelope exchange and the multi-block lattice.

Envelopes are filled in three synchronous sweeps (x, then y, then z).  Each
later sweep copies slabs that include the envelope cells written by the
earlier ones, which fills edges and corners without 26-neighbour messages.
Periodic faces are ordinary messages whose destination is the wrapped
neighbour, possibly the sending block itself.

Workers own disjoint sets of blocks and talk only through a
:class:`Transport`.  A message travels as one frame::

    uint32 message index | uint64 payload length | payload

with populations packed cell by cell (row-major over the message region),
19 values per cell in descriptor order.
"""
import queue
import struct
import threading
from dataclasses import dataclass, field

import numpy as np

from .accelerated import AcceleratedBlock, DynamicsRegistry, acc_collide_and_stream
from .descriptor import Q

_FRAME = struct.Struct("<IQ")


class PartitionError(ValueError):
    pass


class ExchangeError(RuntimeError):
    """Fatal protocol violation during envelope exchange."""


@dataclass(frozen=True)
class BlockInfo:
    index: int
    coords: tuple
    origin: tuple
    extent: tuple


@dataclass
class BlockPartition:
    global_dims: tuple
    block_grid: tuple
    blocks: list
    worker_of: dict = field(default_factory=dict)

    def block_at(self, coords):
        gx, gy, gz = self.block_grid
        i, j, k = coords
        return (i * gy + j) * gz + k


def _split(n, parts):
    base, extra = divmod(n, parts)
    return [base + 1 if p < extra else base for p in range(parts)]


def partition(global_dims, block_grid, workers=1):
    """Split ``global_dims`` into a near-equal ``block_grid`` of blocks."""
    global_dims = tuple(int(n) for n in global_dims)
    block_grid = tuple(int(b) for b in block_grid)
    if len(global_dims) != 3 or len(block_grid) != 3:
        raise PartitionError("need three extents and three block counts")
    for n, b in zip(global_dims, block_grid):
        if b < 1 or b > n:
            raise PartitionError(f"cannot split extent {n} into {b} blocks")
    splits = [_split(n, b) for n, b in zip(global_dims, block_grid)]
    starts = [np.concatenate([[0], np.cumsum(s)[:-1]]) for s in splits]
    blocks = []
    for i in range(block_grid[0]):
        for j in range(block_grid[1]):
            for k in range(block_grid[2]):
                blocks.append(BlockInfo(
                    index=len(blocks), coords=(i, j, k),
                    origin=(int(starts[0][i]), int(starts[1][j]), int(starts[2][k])),
                    extent=(splits[0][i], splits[1][j], splits[2][k])))
    workers = max(1, min(int(workers), len(blocks)))
    per = _split(len(blocks), workers)
    worker_of = {}
    b = 0
    for w, count in enumerate(per):
        for _ in range(count):
            worker_of[b] = w
            b += 1
    return BlockPartition(global_dims, block_grid, blocks, worker_of)


# ---------------------------------------------------------------------------
# exchange plan

@dataclass(frozen=True)
class Message:
    index: int
    phase: int
    src_block: int
    src_region: tuple      # slices in the padded source block
    dst_block: int
    dst_region: tuple      # slices in the padded destination block
    src_global: tuple      # global coordinates (3 arrays) of the source cells

    @property
    def shape(self):
        return tuple(s.stop - s.start for s in self.src_region)

    @property
    def n_cells(self):
        return int(np.prod(self.shape))


@dataclass
class ExchangePlan:
    messages: list
    periodic: tuple

    def phase(self, p):
        return [m for m in self.messages if m.phase == p]


def _global_coords(info, region, global_dims):
    axes = []
    for sl, o, n in zip(region, info.origin, global_dims):
        axes.append((np.arange(sl.start, sl.stop) - 1 + o) % n)
    return tuple(np.meshgrid(*axes, indexing="ij"))


def build_plan(part, periodic):
    periodic = tuple(bool(p) for p in periodic)
    messages = []
    for axis in range(3):
        for info in part.blocks:
            for side in (-1, 1):
                coords = list(info.coords)
                coords[axis] += side
                nb = part.block_grid[axis]
                if not 0 <= coords[axis] < nb:
                    if not periodic[axis]:
                        continue
                    coords[axis] %= nb
                dst = part.blocks[part.block_at(coords)]
                src_region, dst_region = [], []
                for a in range(3):
                    n_src = info.extent[a]
                    if a == axis:
                        if side == 1:
                            src_region.append(slice(n_src, n_src + 1))
                            dst_region.append(slice(0, 1))
                        else:
                            src_region.append(slice(1, 2))
                            n_dst = dst.extent[a]
                            dst_region.append(slice(n_dst + 1, n_dst + 2))
                    elif a < axis:
                        # earlier sweeps already filled this axis' envelope
                        src_region.append(slice(0, n_src + 2))
                        dst_region.append(slice(0, n_src + 2))
                    else:
                        src_region.append(slice(1, n_src + 1))
                        dst_region.append(slice(1, n_src + 1))
                src_region = tuple(src_region)
                messages.append(Message(
                    index=len(messages), phase=axis, src_block=info.index,
                    src_region=src_region, dst_block=dst.index,
                    dst_region=tuple(dst_region),
                    src_global=_global_coords(info, src_region, part.global_dims)))
    return ExchangePlan(messages, periodic)


# ---------------------------------------------------------------------------
# packing

def _selection(message, predicate):
    if predicate is None:
        return np.ones(message.shape, dtype=bool)
    sel = np.asarray(predicate(*message.src_global), dtype=bool)
    return np.broadcast_to(sel, message.shape)


def message_offsets(messages, predicate=None, itemsize=8):
    """Byte offsets of each message in a packed buffer (exclusive scan).

    The returned array has ``len(messages) + 1`` entries; the last one is
    the total buffer size.
    """
    counts = np.array([np.count_nonzero(_selection(m, predicate)) for m in messages],
                      dtype=np.int64)
    sizes = counts * Q * itemsize
    offsets = np.zeros(len(messages) + 1, dtype=np.int64)
    np.cumsum(sizes, out=offsets[1:])
    return offsets


def pack_envelope(block, messages, predicate=None):
    """Pack the source regions of ``messages`` from ``block.f_in``.

    Returns ``(buffer, offsets)``.
    """
    pops = block.view(block.f_in)
    parts = []
    for m in messages:
        sel = _selection(m, predicate)
        region = pops[(slice(None),) + m.src_region]
        parts.append(np.ascontiguousarray(region[:, sel].T).tobytes())
    offsets = message_offsets(messages, predicate, block.dtype.itemsize)
    return b"".join(parts), offsets


def unpack_envelope(block, messages, buffer, offsets=None, predicate=None):
    if offsets is None:
        offsets = message_offsets(messages, predicate, block.dtype.itemsize)
    if len(buffer) != offsets[-1]:
        raise ExchangeError(
            f"buffer holds {len(buffer)} bytes, plan expects {offsets[-1]}")
    pops = block.view(block.f_in)
    for m, lo, hi in zip(messages, offsets[:-1], offsets[1:]):
        sel = _selection(m, predicate)
        data = np.frombuffer(buffer[lo:hi], dtype=block.dtype).reshape(-1, Q)
        region = pops[(slice(None),) + m.dst_region]
        region[:, sel] = data.T


# ---------------------------------------------------------------------------
# transports

class Transport:
    """Reliable, typed channels between worker pairs."""

    def send(self, src, dst, frame):
        raise NotImplementedError

    def recv(self, dst, timeout):
        """Return ``(src, frame)``; raise ``queue.Empty`` on timeout."""
        raise NotImplementedError


class InProcessTransport(Transport):
    def __init__(self, n_workers):
        self._queues = [queue.Queue() for _ in range(n_workers)]

    def send(self, src, dst, frame):
        self._queues[dst].put((src, bytes(frame)))

    def recv(self, dst, timeout):
        return self._queues[dst].get(timeout=timeout)


def encode_frame(index, payload):
    return _FRAME.pack(index, len(payload)) + payload


def decode_frame(frame):
    if len(frame) < _FRAME.size:
        raise ExchangeError("truncated frame header")
    index, length = _FRAME.unpack_from(frame)
    payload = frame[_FRAME.size:]
    if len(payload) != length:
        raise ExchangeError(
            f"frame {index}: payload length {len(payload)} != declared {length}")
    return index, payload


def exchange_worker(worker, blocks, part, plan, transport, predicate=None,
                    timeout=30.0):
    """Run every exchange sweep for the blocks owned by ``worker``."""
    mine = {b for b, w in part.worker_of.items() if w == worker}
    inbound = {m.index: m for m in plan.messages if m.dst_block in mine}
    done = set()
    early = {}      # frames from a sweep this worker has not reached yet
    for phase in range(3):
        msgs = plan.phase(phase)
        for m in msgs:
            if m.src_block in mine:
                payload, _ = pack_envelope(blocks[m.src_block], [m], predicate)
                transport.send(worker, part.worker_of[m.dst_block],
                               encode_frame(m.index, payload))
        expected = {m.index for m in msgs if m.dst_block in mine}
        for index in sorted(expected & early.keys()):
            m = inbound[index]
            unpack_envelope(blocks[m.dst_block], [m], early.pop(index), predicate=predicate)
            done.add(index)
        while not expected <= done:
            try:
                _, frame = transport.recv(worker, timeout)
            except queue.Empty:
                lost = sorted(expected - done)
                raise ExchangeError(
                    f"worker {worker}: messages {lost} lost in sweep {phase}") from None
            index, payload = decode_frame(frame)
            if index not in inbound:
                raise ExchangeError(
                    f"worker {worker}: unexpected message {index} in sweep {phase}")
            if index in done or index in early:
                raise ExchangeError(f"worker {worker}: duplicate message {index}")
            m = inbound[index]
            if m.phase > phase:
                early[index] = payload
                continue
            unpack_envelope(blocks[m.dst_block], [m], payload, predicate=predicate)
            done.add(index)


def exchange(blocks, part, plan, transport, predicate=None, timeout=30.0):
    """Fill every envelope.  Workers run concurrently when there are several."""
    workers = sorted(set(part.worker_of.values()))
    if len(workers) == 1:
        exchange_worker(workers[0], blocks, part, plan, transport, predicate, timeout)
        return
    errors = []

    def run(w):
        try:
            exchange_worker(w, blocks, part, plan, transport, predicate, timeout)
        except BaseException as exc:  # surfaced below
            errors.append(exc)

    threads = [threading.Thread(target=run, args=(w,)) for w in workers]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if errors:
        raise errors[0]


# ---------------------------------------------------------------------------
# multi-block accelerated lattice

class AcceleratedLattice:
    """A set of :class:`AcceleratedBlock` sharing one registry and one plan."""

    def __init__(self, global_dims, block_grid=(1, 1, 1), periodic=(True,) * 3,
                 workers=1, dtype=np.float64, registry=None, transport=None):
        self.partition = partition(global_dims, block_grid, workers)
        self.global_dims = self.partition.global_dims
        self.periodic = tuple(bool(p) for p in periodic)
        self.dtype = np.dtype(dtype)
        self.registry = registry if registry is not None else DynamicsRegistry()
        self.blocks = [
            AcceleratedBlock(b.extent, b.origin, self.global_dims, self.dtype)
            for b in self.partition.blocks]
        self.registry.add_listener(self._remap)
        self.plan = build_plan(self.partition, self.periodic)
        n_workers = len(set(self.partition.worker_of.values()))
        self.transport = transport or InProcessTransport(n_workers)
        self.pack_predicate = None
        self.time = 0

    @property
    def n_cells(self):
        return int(np.prod(self.global_dims))

    @property
    def n_workers(self):
        return len(set(self.partition.worker_of.values()))

    def _remap(self, remap):
        for b in self.blocks:
            b.remap_tags(remap)

    def _local(self, info, region):
        """Intersect a global region with a block; return (global, local) slices."""
        glob, loc = [], []
        for sl, o, n, N in zip(region, info.origin, info.extent, self.global_dims):
            start, stop, _ = sl.indices(N)
            lo, hi = max(start, o), min(stop, o + n)
            if hi <= lo:
                return None
            glob.append(slice(lo - start, hi - start))
            loc.append(slice(lo - o + 1, hi - o + 1))
        return tuple(glob), tuple(loc)

    def set_chain(self, chain, region=None, mask=None):
        """Assign a :class:`DynamicsChain` to a global region and/or mask."""
        tag_name = chain.name
        self.registry.register(chain)
        tag = self.registry.tag_of(tag_name)
        off = self.registry.register_params(chain)
        region = region or (slice(None),) * 3
        for info, block in zip(self.partition.blocks, self.blocks):
            hit = self._local(info, region)
            if hit is None:
                continue
            g, loc = hit
            tags = block.view(block.tags)[loc]
            poff = block.view(block.param_index)[loc]
            if mask is None:
                tags[...] = tag
                poff[...] = off
            else:
                sub = np.asarray(mask)[tuple(slice(s.start, s.stop) for s in g)]
                tags[sub] = tag
                poff[sub] = off

    def set_populations(self, pops):
        """Load global ``(19, nx, ny, nz)`` populations into the block interiors."""
        for info, block in zip(self.partition.blocks, self.blocks):
            sl = tuple(slice(o, o + n) for o, n in zip(info.origin, info.extent))
            block.interior_populations()[...] = pops[(slice(None),) + sl]

    def populations(self):
        out = np.empty((Q,) + self.global_dims, dtype=self.dtype)
        for info, block in zip(self.partition.blocks, self.blocks):
            sl = tuple(slice(o, o + n) for o, n in zip(info.origin, info.extent))
            out[(slice(None),) + sl] = block.interior_populations()
        return out

    def tag_field(self):
        out = np.empty(self.global_dims, dtype=np.int32)
        for info, block in zip(self.partition.blocks, self.blocks):
            sl = tuple(slice(o, o + n) for o, n in zip(info.origin, info.extent))
            out[sl] = block.interior_tags()
        return out

    def param_field(self):
        out = np.empty(self.global_dims, dtype=np.int32)
        for info, block in zip(self.partition.blocks, self.blocks):
            sl = tuple(slice(o, o + n) for o, n in zip(info.origin, info.extent))
            out[sl] = block.view(block.param_index)[block.interior_slices()]
        return out

    def present_chains(self):
        tags = set()
        for block in self.blocks:
            tags.update(int(t) for t in block.present_tags())
        return sorted(self.registry.chain_for(t) for t in tags)

    def exchange(self, timeout=30.0):
        exchange(self.blocks, self.partition, self.plan, self.transport,
                 self.pack_predicate, timeout)

    def collide_and_stream(self, dispatch=None):
        self.exchange()
        workers = sorted(set(self.partition.worker_of.values()))
        owned = {w: [b for b, ww in self.partition.worker_of.items() if ww == w]
                 for w in workers}
        if len(workers) == 1:
            for b in self.blocks:
                acc_collide_and_stream(b, self.registry, dispatch)
        else:
            errors = []

            def run(w):
                try:
                    for b in owned[w]:
                        acc_collide_and_stream(self.blocks[b], self.registry, dispatch)
                except BaseException as exc:
                    errors.append(exc)

            threads = [threading.Thread(target=run, args=(w,)) for w in workers]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
            if errors:
                raise errors[0]
        self.time += 1

    def run(self, steps, dispatch=None):
        for _ in range(steps):
            self.collide_and_stream(dispatch)
