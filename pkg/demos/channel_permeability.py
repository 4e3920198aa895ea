"""Permeability of a parallel-plate channel, pressure- and velocity-driven.

The gap holds H fluid cells; bounce-back puts the walls half a cell
outside them, so the exact answer is H^2/12.
"""
from dolb.bridge import mirror_to_accelerated
from dolb.cases import gap_permeability, init_porous, plates_geometry
from dolb.descriptor import moments

H = 11
for drive in ("pressure", "velocity"):
    setup = init_porous(plates_geometry(H), 0, 0, drive, omega=1.0)
    lat = mirror_to_accelerated(setup.lattice)
    prev = None
    for chunk in range(200):
        lat.run(250)
        rho, u, _ = moments(lat.populations())
        k = gap_permeability(setup, rho, u)
        if prev is not None and abs(k - prev) <= 1e-9 * k:
            break
        prev = k
    print(f"{drive:8s}: k = {k:.6f} after {lat.time} steps, "
          f"H^2/12 = {H * H / 12:.6f} ({k / (H * H / 12) - 1:+.3%})")
