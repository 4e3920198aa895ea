"""Decaying Taylor-Green vortex at a size that runs in under a minute.

Prints k/k0 and eps/eps0 every half convective time.  Raise L (and wait)
to watch the enstrophy peak sharpen.
"""
import sys

from dolb import CaseConfig, init_tgv, mirror_to_accelerated
from dolb.descriptor import moments
from dolb.diagnostics import enstrophy, kinetic_energy, vorticity_fd8

L = int(sys.argv[1]) if len(sys.argv) > 1 else 32
collision = sys.argv[2] if len(sys.argv) > 2 else "rr"

cfg = CaseConfig(kind="tgv", L=L, Re=1600, Ma=0.2, collision=collision)
lat = mirror_to_accelerated(init_tgv(L, cfg.Ma, cfg))
print(f"L={L} {collision}: omega={cfg.derived_omega:.5f}, t_c={cfg.t_c:.2f} steps")

k0 = eps0 = None
for half in range(0, 25):
    if half:
        lat.run(cfg.steps(half / 2) - cfg.steps((half - 1) / 2))
    _, u, _ = moments(lat.populations(), check=False)
    k, eps = kinetic_energy(u), enstrophy(vorticity_fd8(u))
    if k0 is None:
        k0, eps0 = k, eps
    print(f"t={half / 2:5.1f} t_c   k/k0={k / k0:.4f}   eps/eps0={eps / eps0:.4f}")
