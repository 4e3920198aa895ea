from fractions import Fraction
from itertools import product

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dolb.descriptor import (
    CS2, D3Q19, OPPOSITE, Q, VELOCITIES, WEIGHTS, WEIGHTS_EXACT, CellState,
    DegenerateCellError, equilibrium2, equilibrium4, moments,
)

small = st.floats(-0.1, 0.1, allow_nan=False)
dens = st.floats(0.8, 1.2, allow_nan=False)


def test_isotropy_exact():
    c = [tuple(int(v) for v in ci) for ci in VELOCITIES]
    w = WEIGHTS_EXACT
    assert sum(w) == 1
    for a in range(3):
        assert sum(wi * ci[a] for wi, ci in zip(w, c)) == 0
        for b in range(3):
            s = sum(wi * ci[a] * ci[b] for wi, ci in zip(w, c))
            assert s == (Fraction(1, 3) if a == b else 0)
            for g in range(3):
                assert sum(wi * ci[a] * ci[b] * ci[g] for wi, ci in zip(w, c)) == 0


def test_isotropy_float():
    np.testing.assert_allclose(
        np.einsum("i,ia,ib->ab", WEIGHTS, VELOCITIES, VELOCITIES), CS2 * np.eye(3),
        rtol=1e-15, atol=1e-16)


def test_velocity_table():
    assert Q == 19 and VELOCITIES.shape == (19, 3)
    assert np.all(np.abs(VELOCITIES) <= 1)
    assert sum(1 for ci in VELOCITIES if not ci.any()) == 1
    assert len({tuple(ci) for ci in VELOCITIES}) == 19
    assert np.all(OPPOSITE[OPPOSITE] == np.arange(19))
    assert np.all(VELOCITIES[OPPOSITE] == -VELOCITIES)
    assert D3Q19.q == 19 and D3Q19.cs2 == CS2


def _eq2_mp(rho, u):
    mpmath.mp.dps = 40
    rho = mpmath.mpf(rho)
    u = [mpmath.mpf(x) for x in u]
    out = []
    usq = sum(x * x for x in u)
    for ci, wi in zip(VELOCITIES, WEIGHTS_EXACT):
        w = mpmath.mpf(wi.numerator) / wi.denominator
        cu = sum(int(c) * x for c, x in zip(ci, u))
        out.append(w * rho * (1 + 3 * cu + 4.5 * cu * cu - 1.5 * usq) - w)
    return out


def test_equilibrium2_rest_is_zero():
    assert np.all(equilibrium2(1.0, np.zeros(3)) == 0.0)
    assert np.all(equilibrium4(1.0, np.zeros(3)) == 0.0)


def test_equilibrium2_high_precision():
    feq = equilibrium2(1.0, np.array([0.1, 0.0, 0.0]))
    ref = _eq2_mp(1.0, (0.1, 0.0, 0.0))
    for a, b in zip(feq, ref):
        assert abs(a - float(b)) < 1e-16


def _hermite_eq3(rho, u):
    """Equilibrium from an explicit Hermite sum over tensor components.

    a_n = rho u^n; the D3Q19 tensors with xxx or xyz patterns are left out
    because the lattice cannot represent them.
    """
    out = np.zeros(19)
    for i, (ci, wi) in enumerate(zip(VELOCITIES, WEIGHTS)):
        c = ci.astype(float)
        h1 = c
        h2 = np.outer(c, c) - CS2 * np.eye(3)
        s = 1.0 + np.dot(h1, u) / CS2 + np.sum(h2 * np.outer(u, u)) / (2 * CS2 ** 2)
        s3 = 0.0
        for a, b, g in product(range(3), repeat=3):
            idx = sorted((a, b, g))
            if idx[0] == idx[2] or len(set(idx)) == 3:
                continue
            h3 = (c[a] * c[b] * c[g] - CS2 * (c[a] * (b == g) + c[b] * (a == g)
                                                  + c[g] * (a == b)))
            s3 += h3 * u[a] * u[b] * u[g]
        s += s3 / (6 * CS2 ** 3)
        out[i] = wi * rho * s - wi
    return out


def test_equilibrium4_hermite_oracle():
    u = np.array([0.05, 0.02, 0.0])
    np.testing.assert_allclose(equilibrium4(1.0, u), _hermite_eq3(1.0, u), atol=1e-16)
    u = np.array([0.03, -0.04, 0.07])
    np.testing.assert_allclose(equilibrium4(1.1, u), _hermite_eq3(1.1, u), atol=1e-15)


@given(dens, small, small, small)
@settings(max_examples=200, deadline=None)
def test_equilibria_moments(rho, ux, uy, uz):
    u = np.array([ux, uy, uz])
    for eq in (equilibrium2, equilibrium4):
        f = eq(rho, u)
        r, v, pi = moments(f)
        assert abs(r - rho) <= 1e-14 * rho
        np.testing.assert_allclose(v, u, atol=1e-14)
        np.testing.assert_allclose(pi, 0.0, atol=1e-15)


def test_moments_brute_force():
    rng = np.random.default_rng(1)
    f = equilibrium2(1.02, np.array([0.03, -0.01, 0.02])) + 1e-3 * rng.standard_normal(19)
    rho, u, pi = moments(f)
    full = f + WEIGHTS
    assert rho == pytest.approx(full.sum(), rel=1e-14)
    np.testing.assert_allclose(rho * u, full @ VELOCITIES, atol=1e-15)
    feq = equilibrium2(rho, u) + WEIGHTS
    brute = np.zeros((3, 3))
    for i in range(19):
        brute += np.outer(VELOCITIES[i], VELOCITIES[i]) * (full[i] - feq[i])
    np.testing.assert_allclose(pi, brute, atol=1e-15)


def test_moments_zero_offset():
    rho, u, pi = moments(np.zeros(19))
    assert rho == 1.0 and np.all(u == 0) and np.all(pi == 0)


def test_moments_field_shapes():
    f = np.zeros((19, 4, 5))
    rho, u, pi = moments(f)
    assert rho.shape == (4, 5) and u.shape == (3, 4, 5) and pi.shape == (3, 3, 4, 5)


def test_degenerate_cell():
    f = -WEIGHTS.copy()
    with pytest.raises(DegenerateCellError):
        moments(f)
    moments(f, check=False)


def test_cell_state_round_trip():
    f = equilibrium2(1.01, np.array([0.02, 0.0, -0.01]))
    cs = CellState.from_populations(f)
    assert cs.rho == pytest.approx(1.01, rel=1e-14)
    np.testing.assert_allclose(cs.u, [0.02, 0.0, -0.01], atol=1e-15)


def test_offset_magnitude_tgv():
    from dolb.cases import tgv_fields
    rho, u = tgv_fields(16, 0.2)
    f = equilibrium2(rho, u)
    assert np.max(np.abs(f)) < 0.2
