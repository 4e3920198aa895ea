"""Object-oriented dynamics chains and the per-link model policies.

A cell of the reference lattice owns a :class:`Dynamics` object.  Composite
behaviour is built by wrapping: a regularized inlet wraps a Smagorinsky
model which wraps an RR collision, and so on.  Calling ``collide`` walks
that linked structure through ordinary method dispatch.

Each link type also has a *policy* (:data:`LINK_POLICIES`): the metadata
the accelerated lattice needs to turn a chain into an integer tag plus a
flat parameter vector, and to rebuild the objects from those again.
"""
from dataclasses import dataclass

from . import boundaries as bc
from . import collision as coll

SEPARATOR = "|"


class ChainError(ValueError):
    pass


@dataclass(frozen=True)
class LinkPolicy:
    role: str            # "boundary", "les", "collision" or "terminal"
    param_names: tuple


_FIXED_POLICIES = {
    coll.NO_DYNAMICS: LinkPolicy("terminal", ()),
    bc.BOUNCE_BACK: LinkPolicy("terminal", ()),
    bc.MOVING_BOUNCE_BACK: LinkPolicy("terminal", ("ux", "uy", "uz")),
    coll.LES_SMAGORINSKY: LinkPolicy("les", ("smagorinsky_c",)),
    coll.COLL_BGK: LinkPolicy("collision", ("omega",)),
    coll.COLL_TRT: LinkPolicy("collision", ("omega", "lam")),
    coll.COLL_RR: LinkPolicy("collision", ("omega", "omega_bulk")),
}


def link_policy(link):
    try:
        return _FIXED_POLICIES[link]
    except KeyError:
        pass
    parsed = bc.parse_regularized_link(link)
    if parsed is None:
        raise ChainError(f"unknown model identifier {link!r}")
    if parsed[0] == "velocity":
        return LinkPolicy("boundary", ("ux", "uy", "uz"))
    return LinkPolicy("boundary", ("rho",))


def known_links():
    """Every fixed identifier plus the regularized-boundary patterns."""
    links = list(_FIXED_POLICIES)
    for kind in ("velocity", "pressure"):
        for axis in range(3):
            for orient in (1, -1):
                links.append(bc.regularized_link(kind, axis, orient))
    return links


def validate_links(links):
    links = tuple(links)
    if not links:
        raise ChainError("empty chain")
    roles = [link_policy(link).role for link in links]
    if roles[-1] == "terminal":
        if len(links) != 1:
            raise ChainError(f"{links[-1]} replaces collision and must stand alone")
        return links
    if roles[-1] != "collision" or roles.count("collision") != 1:
        raise ChainError(f"chain {links} must end in exactly one collision model")
    order = {"boundary": 0, "les": 1, "collision": 2}
    prefix = [order.get(r, -1) for r in roles]
    if -1 in prefix or prefix != sorted(prefix) or len(set(prefix)) != len(prefix):
        raise ChainError(f"chain {links} must read boundary -> LES -> collision")
    return links


def chain_string(links):
    return SEPARATOR.join(validate_links(links))


def split_chain(name):
    return tuple(name.split(SEPARATOR))


def param_count(links):
    return sum(len(link_policy(link).param_names) for link in links)


@dataclass(frozen=True)
class DynamicsChain:
    """Flat, hashable description of a dynamics chain and its parameters."""

    links: tuple
    params: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "links", validate_links(self.links))
        params = tuple(float(p) for p in self.params)
        if len(params) != param_count(self.links):
            raise ChainError(
                f"chain {self.name} takes {param_count(self.links)} parameters, "
                f"got {len(params)}")
        object.__setattr__(self, "params", params)

    @property
    def name(self):
        return SEPARATOR.join(self.links)


# ---------------------------------------------------------------------------
# object-oriented dynamics

class Dynamics:
    link = None

    def collide(self, f, omega=None):
        raise NotImplementedError

    def own_params(self):
        return ()

    @property
    def links(self):
        return (self.link,)

    @property
    def params(self):
        return self.own_params()

    def chain(self):
        return DynamicsChain(self.links, self.params)

    def __eq__(self, other):
        return isinstance(other, Dynamics) and self.chain() == other.chain()

    def __hash__(self):
        return hash(self.chain())

    def __repr__(self):
        return f"<{type(self).__name__} {self.chain().name} {self.params}>"


class NoDynamics(Dynamics):
    link = coll.NO_DYNAMICS

    def collide(self, f, omega=None):
        pass


class BounceBack(Dynamics):
    link = bc.BOUNCE_BACK

    def collide(self, f, omega=None):
        bc.bounce_back_cell(f)


class MovingBounceBack(Dynamics):
    link = bc.MOVING_BOUNCE_BACK

    def __init__(self, wall_velocity):
        self.u = tuple(float(v) for v in wall_velocity)

    def own_params(self):
        return self.u

    def collide(self, f, omega=None):
        bc.moving_bounce_back_cell(f, self.u[0], self.u[1], self.u[2])


class BGK(Dynamics):
    link = coll.COLL_BGK

    def __init__(self, omega):
        self.omega = float(omega)

    def own_params(self):
        return (self.omega,)

    def collide(self, f, omega=None):
        coll.bgk_cell(f, self.omega if omega is None else omega)


class TRT(Dynamics):
    link = coll.COLL_TRT

    def __init__(self, omega, lam=coll.DEFAULT_MAGIC):
        self.omega = float(omega)
        self.lam = float(lam)

    def own_params(self):
        return (self.omega, self.lam)

    def collide(self, f, omega=None):
        om = self.omega if omega is None else omega
        coll.trt_cell(f, om, coll.trt_omega_minus(om, self.lam))


class RR(Dynamics):
    link = coll.COLL_RR

    def __init__(self, omega, omega_bulk=1.0):
        self.omega = float(omega)
        self.omega_bulk = float(omega_bulk)

    def own_params(self):
        return (self.omega, self.omega_bulk)

    def collide(self, f, omega=None):
        coll.rr_cell(f, self.omega if omega is None else omega, self.omega_bulk)


class _Wrapper(Dynamics):
    def __init__(self, base):
        self.base = base

    @property
    def links(self):
        return (self.link,) + self.base.links

    @property
    def params(self):
        return self.own_params() + self.base.params

    @property
    def omega(self):
        return self.base.omega


class Smagorinsky(_Wrapper):
    link = coll.LES_SMAGORINSKY

    def __init__(self, base, c):
        super().__init__(base)
        self.c = float(c)

    def own_params(self):
        return (self.c,)

    def collide(self, f, omega=None):
        om = self.base.omega if omega is None else omega
        self.base.collide(f, coll.smagorinsky_omega_cell(f, om, self.c))


class RegularizedVelocity(_Wrapper):
    def __init__(self, base, axis, orient, velocity):
        super().__init__(base)
        self.link = bc.regularized_link("velocity", axis, orient)
        self.axis = axis
        self.orient = orient
        self.u = tuple(float(v) for v in velocity)

    def own_params(self):
        return self.u

    def collide(self, f, omega=None):
        bc.regularized_velocity_cell(f, self.axis, self.orient, *self.u)
        self.base.collide(f, omega)


class RegularizedPressure(_Wrapper):
    def __init__(self, base, axis, orient, rho):
        super().__init__(base)
        self.link = bc.regularized_link("pressure", axis, orient)
        self.axis = axis
        self.orient = orient
        self.rho = float(rho)

    def own_params(self):
        return (self.rho,)

    def collide(self, f, omega=None):
        bc.regularized_pressure_cell(f, self.axis, self.orient, self.rho)
        self.base.collide(f, omega)


def build_dynamics(chain):
    """Instantiate the object structure described by a :class:`DynamicsChain`."""
    links = chain.links
    params = list(chain.params)

    def take(n):
        out = params[:n]
        del params[:n]
        return out

    head = []
    for link in links:
        head.append((link, take(len(link_policy(link).param_names))))

    link, p = head[-1]
    if link == coll.NO_DYNAMICS:
        obj = NoDynamics()
    elif link == bc.BOUNCE_BACK:
        obj = BounceBack()
    elif link == bc.MOVING_BOUNCE_BACK:
        obj = MovingBounceBack(p)
    elif link == coll.COLL_BGK:
        obj = BGK(*p)
    elif link == coll.COLL_TRT:
        obj = TRT(*p)
    else:
        obj = RR(*p)
    for link, p in reversed(head[:-1]):
        if link == coll.LES_SMAGORINSKY:
            obj = Smagorinsky(obj, *p)
            continue
        kind, axis, orient = bc.parse_regularized_link(link)
        if kind == "velocity":
            obj = RegularizedVelocity(obj, axis, orient, p)
        else:
            obj = RegularizedPressure(obj, axis, orient, p[0])
    return obj


def dynamics_for(collision, params, smagorinsky_c=0.0):
    """Convenience constructor from a model name (``bgk``, ``trt``, ``rr``)."""
    name = collision.lower()
    if name in ("bgk", coll.COLL_BGK.lower()):
        obj = BGK(params.omega)
    elif name in ("trt", coll.COLL_TRT.lower()):
        obj = TRT(params.omega, params.lam)
    elif name in ("rr", coll.COLL_RR.lower()):
        obj = RR(params.omega, params.omega_bulk)
    else:
        raise ChainError(
            f"unknown collision model {collision!r}; valid: bgk, trt, rr")
    if smagorinsky_c:
        obj = Smagorinsky(obj, smagorinsky_c)
    return obj
