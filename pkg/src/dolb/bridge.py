"""Mirror lattices between the reference and accelerated containers."""
import numpy as np

from .accelerated import DispatchSet
from .dynamics import build_dynamics
from .multiblock import AcceleratedLattice
from .reference import ReferenceLattice


def mirror_to_accelerated(ref, block_grid=(1, 1, 1), workers=1, dtype=None,
                          registry=None):
    """Build an :class:`AcceleratedLattice` holding the same state as ``ref``.

    Every distinct dynamics object becomes a chain string (its tag) plus a
    parameter offset.  Populations are copied bit for bit.
    """
    ref.validate()
    acc = AcceleratedLattice(ref.dims, block_grid, ref.periodic, workers,
                             dtype or ref.dtype, registry)
    ids = {}
    code = np.empty(ref.dims, dtype=np.int64)
    flat = code.reshape(-1)
    for n, dyn in enumerate(ref.cells.flat):
        key = id(dyn)
        if key not in ids:
            ids[key] = (len(ids), dyn)
        flat[n] = ids[key][0]
    # register every chain first so tags are final before any cell is written
    chains = [dyn.chain() for _, dyn in ids.values()]
    for ch in chains:
        acc.registry.register(ch)
    for k, ch in enumerate(chains):
        acc.set_chain(ch, mask=(code == k))
    acc.set_populations(np.moveaxis(ref.populations, -1, 0).astype(acc.dtype))
    acc.time = ref.time
    return acc


def mirror_to_reference(acc):
    """Rebuild a :class:`ReferenceLattice` from an accelerated lattice."""
    tags = acc.tag_field()
    offs = acc.param_field()
    pairs = np.stack([tags.ravel(), offs.ravel()], axis=1)
    uniq, inverse = np.unique(pairs, axis=0, return_inverse=True)
    objs = [build_dynamics(acc.registry.chain_instance(int(t), int(o)))
            for t, o in uniq]
    ref = ReferenceLattice(acc.global_dims, objs[0], acc.periodic, acc.dtype)
    cells = np.empty(len(objs), dtype=object)
    for k, obj in enumerate(objs):
        cells[k] = obj
    ref.cells = cells[inverse.reshape(-1)].reshape(acc.global_dims)
    ref.populations = np.ascontiguousarray(np.moveaxis(acc.populations(), 0, -1))
    ref.time = acc.time
    return ref


def required_models(lattice):
    """Sorted chain strings a lattice needs compiled to take one step."""
    if isinstance(lattice, ReferenceLattice):
        return sorted({dyn.chain().name for dyn in lattice.chains})
    return lattice.present_chains()


def minimal_dispatch(lattice):
    return DispatchSet(required_models(lattice))


def show_required_models(lattice):
    """Sorted, deduplicated chain strings present in ``lattice``.

    Used as a dispatch set this list is always sufficient for a step.
    """
    return required_models(lattice)


def skip_inert_cells(acc):
    """Leave NoDynamics cells out of envelope messages.

    Nothing a NoDynamics cell holds can reach a fluid cell when solids are
    wrapped in a bounce-back shell, so the messages shrink to the cells that
    matter.
    """
    try:
        inert = acc.registry.tag_of("NoDynamics")
    except KeyError:
        return
    keep = acc.tag_field() != inert
    acc.pack_predicate = lambda x, y, z: keep[x, y, z]
