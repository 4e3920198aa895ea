import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dolb.cases import tgv_fields
from dolb.diagnostics import (
    FD8_COEFFS, DiagnosticsError, DiagnosticsSeries, averaged_profiles, enstrophy,
    fd8_derivative, kinetic_energy, permeability, to_millidarcy, vorticity_fd8,
)
from dolb.descriptor import CS2

CS = math.sqrt(CS2)


def test_fd8_coefficients_from_taylor_system():
    # sum_k c_k (k^m - (-k)^m) / m! must equal 1 for m = 1 and 0 for m = 3, 5, 7
    A = np.array([[2.0 * k ** m for k in range(1, 5)] for m in (1, 3, 5, 7)])
    b = np.array([1.0, 0.0, 0.0, 0.0])
    c = np.linalg.solve(A, b)
    np.testing.assert_allclose(FD8_COEFFS, c, rtol=1e-13)
    assert sum(2 * k * ck for k, ck in enumerate(FD8_COEFFS, 1)) == pytest.approx(1.0)


@pytest.mark.parametrize("degree", range(0, 9))
def test_fd8_exact_on_polynomials(degree):
    x = np.arange(24, dtype=float) - 11.5
    rng = np.random.default_rng(degree)
    coef = rng.standard_normal(degree + 1)
    f = np.polyval(coef, x / 8)
    df = np.polyval(np.polyder(coef), x / 8) / 8 if degree else np.zeros_like(x)
    d = fd8_derivative(f, 0, periodic=False)
    assert np.all(np.isnan(d[:4])) and np.all(np.isnan(d[-4:]))
    np.testing.assert_allclose(d[4:-4], df[4:-4], rtol=1e-11, atol=1e-12)


def test_fd8_degree_nine_not_exact():
    x = np.arange(24, dtype=float) - 11.5
    d = fd8_derivative(x ** 9, 0, periodic=False)
    assert np.max(np.abs(d[4:-4] - 9 * x[4:-4] ** 8)) > 1e-3


def test_fd8_sine_accuracy():
    L = 64
    x = np.arange(L)
    k = 2 * math.pi / L
    d = fd8_derivative(np.sin(k * x), 0)
    err = np.max(np.abs(d - k * np.cos(k * x))) / k
    assert err <= 1e-9


def test_fd8_short_axis():
    with pytest.raises(DiagnosticsError):
        fd8_derivative(np.zeros(8), 0, periodic=False)
    fd8_derivative(np.zeros(8), 0, periodic=True)


def test_vorticity_linear_shear():
    n = 12
    x = np.arange(n, dtype=float)
    u = np.zeros((3, n, n, n))
    u[1] = x[:, None, None]
    w = vorticity_fd8(u, periodic=(False, False, False))
    inner = (slice(4, -4),) * 3
    np.testing.assert_allclose(w[2][inner], 1.0, rtol=1e-13)
    np.testing.assert_allclose(w[0][inner], 0.0, atol=1e-13)
    np.testing.assert_allclose(w[1][inner], 0.0, atol=1e-13)


def test_vorticity_sine_shear():
    L = 64
    u = np.zeros((3, L, 2, 2))
    k = 2 * math.pi / L
    u[1] = np.sin(k * np.arange(L))[:, None, None]
    w = vorticity_fd8(u)
    np.testing.assert_allclose(w[2][:, 0, 0], k * np.cos(k * np.arange(L)), atol=1e-9 * k)


def test_gradient_field_is_curl_free():
    n = 14
    g = np.arange(n, dtype=float) / n
    X, Y, Z = np.meshgrid(g, g, g, indexing="ij")
    # phi = X^3 Y^2 Z + X Y^4 Z^3; gradient has degree <= 7
    u = np.stack([3 * X ** 2 * Y ** 2 * Z + Y ** 4 * Z ** 3,
                  2 * X ** 3 * Y * Z + 4 * X * Y ** 3 * Z ** 3,
                  X ** 3 * Y ** 2 + 3 * X * Y ** 4 * Z ** 2])
    w = vorticity_fd8(u, periodic=(False, False, False))
    inner = (slice(None),) + (slice(4, -4),) * 3
    assert np.max(np.abs(w[inner])) < 1e-12


def test_kinetic_energy():
    assert kinetic_energy(np.zeros((3, 4, 4, 4))) == 0
    u = np.zeros((3, 4, 4, 4))
    u[0] = 0.3
    assert kinetic_energy(u) == pytest.approx(0.045)
    _, u = tgv_fields(32, 0.1)
    u0 = CS * 0.1
    assert kinetic_energy(u) == pytest.approx(u0 * u0 / 8, rel=1e-12)


@given(st.integers(0, 1000))
@settings(max_examples=10, deadline=None)
def test_reductions_isotropic(seed):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((3, 5, 6, 7))
    perm = rng.permutation(3)
    v = np.transpose(u[perm], (0,) + tuple(1 + perm))
    assert kinetic_energy(v) == pytest.approx(kinetic_energy(u), rel=1e-14)
    assert enstrophy(v) == pytest.approx(enstrophy(u), rel=1e-14)


def test_enstrophy_basics():
    assert enstrophy(np.zeros((3, 3, 3, 3))) == 0
    w = np.zeros((3, 3, 3, 3))
    w[2] = 0.4
    assert enstrophy(w) == pytest.approx(0.08)
    w[:, 0] = np.nan
    assert enstrophy(w) == pytest.approx(0.08)
    with pytest.raises(DiagnosticsError):
        enstrophy(np.full((3, 2, 2, 2), np.nan))


def test_enstrophy_tgv_analytic():
    L = 64
    Ma = 0.1
    _, u = tgv_fields(L, Ma)
    u0 = CS * Ma
    k = 2 * math.pi / L
    x = k * (np.arange(L) + 0.5)
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    w = np.stack([-u0 * k * np.cos(X) * np.sin(Y) * np.sin(Z),
                  -u0 * k * np.sin(X) * np.cos(Y) * np.sin(Z),
                  2 * u0 * k * np.sin(X) * np.sin(Y) * np.cos(Z)])
    quad = 0.5 * np.mean(np.sum(w * w, axis=0))
    assert quad == pytest.approx(3 / 8 * u0 ** 2 * k ** 2, rel=1e-12)
    assert enstrophy(vorticity_fd8(u)) == pytest.approx(quad, rel=1e-9)


def test_permeability():
    assert permeability(0.0, 0.1, 10, 1e-3) == 0.0
    assert permeability(2e-4, 1 / 6, 30, 1e-4) == pytest.approx(2e-4 / 6 * 30 / 1e-4)
    with pytest.raises(DiagnosticsError, match="unbounded"):
        permeability(1e-4, 0.1, 10, 0.0)
    with pytest.raises(DiagnosticsError):
        permeability(1e-4, 0.1, 10, -1e-4)
    with pytest.raises(DiagnosticsError):
        permeability(1e-4, 0.0, 10, 1e-4)
    assert to_millidarcy(1.0, 1e-6) == pytest.approx(1e-12 / 9.869233e-16)


def test_averaged_profiles():
    rng = np.random.default_rng(0)
    snaps = [rng.standard_normal((4, 5, 6)) for _ in range(7)]
    lines = {"vx": (2, (1, 2)), "xline": (0, (3, 4))}
    out = averaged_profiles(snaps, lines)
    brute = sum(s[1, 2, :] for s in snaps) / 7
    np.testing.assert_allclose(out["vx"][1], brute, rtol=1e-14)
    np.testing.assert_allclose(out["vx"][0], 2 * (np.arange(6) + 0.5) / 6 - 1)
    assert out["xline"][1].shape == (4,)
    one = averaged_profiles(snaps[:1], lines)
    np.testing.assert_array_equal(one["vx"][1], snaps[0][1, 2, :])
    pm = averaged_profiles([snaps[0], -snaps[0]], lines)
    assert np.all(pm["vx"][1] == 0)
    with pytest.raises(DiagnosticsError):
        averaged_profiles([], lines)


def test_series_csv_round_trip(tmp_path):
    s = DiagnosticsSeries(columns=("step", "t", "k", "eps", "extra"))
    s.append(0, 0.0, 1 / 3, 0.1, 7.0)
    s.append(10, 0.25, 0.123456789012345678, 1e-300, -2.5)
    path = tmp_path / "series.csv"
    s.write_csv(path)
    back = DiagnosticsSeries.read_csv(path)
    assert back.columns == s.columns
    assert back.rows == s.rows
    np.testing.assert_array_equal(back.column("k"), [1 / 3, 0.123456789012345678])
    with pytest.raises(DiagnosticsError):
        s.append(10, 0.5, 0.0, 0.0, 0.0)
    with pytest.raises(DiagnosticsError):
        s.append(11, 0.5, np.nan, 0.0, 0.0)
    with pytest.raises(DiagnosticsError):
        s.append(12, 0.5, 0.0, 0.0)
