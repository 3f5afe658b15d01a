"""Tests for the orthonormal time bases.

Oracles: closed forms for the first Klibanov function (e^{t-T/2} normalized
by sqrt(sinh T)), an independent values-space Gram-Schmidt on monomial seeds
for the first few functions, analytic trig integrals, and central finite
differences for the derivative evaluations.
"""
import numpy as np
import pytest

from qrtomo import time_basis as tb

T = 2.0


def klibanov(n, quad=None):
    return tb.build_basis("klibanov", n, T, quad or (2 * n + 20))


# ---------------------------------------------------------------- build
def test_first_function_closed_form():
    # psi_1 = e^{t-1}/sqrt(sinh 2);  int_0^2 e^{2t-2} dt = sinh(2) ~ 3.626860
    assert abs(np.sinh(2.0) - 3.626860407847019) < 1e-12
    b = klibanov(1)
    for t in (0.0, 0.7, 1.0, 2.0):
        want = np.exp(t - 1.0) / np.sqrt(np.sinh(2.0))
        assert abs(tb.eval_basis(b, t, 0)[0] - want) < 1e-12


def test_midpoint_value_is_inverse_sqrt_sinh():
    for length in (2.0, 4.0):
        b = tb.build_basis("klibanov", 1, length, 40)
        got = tb.eval_basis(b, length / 2, 0)[0]
        assert abs(got - 1.0 / np.sqrt(np.sinh(length))) < 1e-12


def test_matches_independent_gram_schmidt():
    """Values-space modified GS on the monomial seeds t^n e^{t-T/2} with a
    fine quadrature -- a fully independent construction, valid while the
    monomial family is still numerically well separated (n <= 8)."""
    n = 8
    x, w = np.polynomial.legendre.leggauss(400)
    t = 0.5 * T * (x + 1.0)
    w = 0.5 * T * w
    fam = np.array([t ** k * np.exp(t - T / 2) for k in range(n)])
    q = []
    for v in fam:
        v = v.copy()
        for u in q:
            v -= np.sum(w * v * u) * u
        for u in q:
            v -= np.sum(w * v * u) * u
        q.append(v / np.sqrt(np.sum(w * v * v)))
    b = klibanov(n)
    got = tb.eval_basis(b, t, 0)
    assert np.max(np.abs(got - np.array(q))) < 1e-9


def test_orthonormality_full_size():
    b = klibanov(35, quad=130)
    vals = tb.eval_basis(b, b.quad_nodes, 0)
    gram = (vals * b.quad_weights) @ vals.T
    assert np.max(np.abs(gram - np.eye(35))) < 1e-8


def test_trig_orthonormality():
    b = tb.build_basis("trigonometric", 35, T, 130)
    vals = tb.eval_basis(b, b.quad_nodes, 0)
    gram = (vals * b.quad_weights) @ vals.T
    assert np.max(np.abs(gram - np.eye(35))) < 1e-8


def test_polynomial_degree_structure():
    # the polynomial factor of the (n+1)-th function has exact degree n
    b = klibanov(12)
    c = b.poly_coeffs
    for n in range(12):
        assert np.all(c[n, n + 1:] == 0.0)
        assert abs(c[n, n]) > 1e-12
        assert c[n, n] > 0  # Gram-Schmidt sign convention


def test_build_validation():
    with pytest.raises(ValueError):
        tb.build_basis("chebyshev", 3, T, 60)
    with pytest.raises(ValueError):
        tb.build_basis("klibanov", 0, T, 60)
    with pytest.raises(ValueError):
        tb.build_basis("klibanov", 3, -1.0, 60)
    with pytest.raises(ValueError):
        tb.build_basis("klibanov", 10, T, 39)  # below 2N+20


def test_breakdown_raises():
    # a 3-node quadrature cannot support 5 independent functions
    x, w = np.polynomial.legendre.leggauss(3)
    with pytest.raises(tb.OrthogonalizationError):
        tb._klibanov_coeffs(5, T, x + 1.0, w)


# ---------------------------------------------------------------- eval
def test_trig_functions_closed_form():
    b = tb.build_basis("trigonometric", 5, T, 40)
    t = np.linspace(0.0, T, 33)
    vals = tb.eval_basis(b, t, 0)
    want = np.array([np.full_like(t, 1 / np.sqrt(2.0)), np.cos(np.pi * t),
                     np.sin(np.pi * t), np.cos(2 * np.pi * t),
                     np.sin(2 * np.pi * t)])
    assert np.max(np.abs(vals - want)) < 1e-14


def test_trig_constant_derivatives_vanish():
    b = tb.build_basis("trigonometric", 5, T, 40)
    assert np.all(tb.eval_basis(b, 0.3, 1)[0] == 0.0)
    assert np.all(tb.eval_basis(b, 0.3, 2)[0] == 0.0)


@pytest.mark.parametrize("kind", ["klibanov", "trigonometric"])
def test_derivatives_match_finite_differences(kind):
    b = tb.build_basis(kind, 35, T, 130)
    rng = np.random.default_rng(0)
    pts = rng.uniform(0.05, T - 0.05, 50)

    def fd_check(order, h):
        lo = tb.eval_basis(b, pts - h, 0)
        hi = tb.eval_basis(b, pts + h, 0)
        if order == 1:
            fd = (hi - lo) / (2 * h)
        else:
            fd = (hi - 2 * tb.eval_basis(b, pts, 0) + lo) / h ** 2
        d = tb.eval_basis(b, pts, order)
        scale = np.maximum(1.0, np.max(np.abs(d), axis=1))
        return np.max(np.abs(d - fd) / scale[:, None])

    assert fd_check(1, 1e-5) < 1e-6
    assert fd_check(2, 2e-5) < 1e-6  # balances h^2 truncation vs u/h^2 roundoff


def test_eval_validation():
    b = klibanov(3)
    with pytest.raises(ValueError):
        tb.eval_basis(b, -0.1, 0)
    with pytest.raises(ValueError):
        tb.eval_basis(b, T + 0.1, 0)
    with pytest.raises(ValueError):
        tb.eval_basis(b, 1.0, 3)


def test_eval_shapes():
    b = klibanov(4)
    assert tb.eval_basis(b, 1.0, 0).shape == (4,)
    assert tb.eval_basis(b, np.linspace(0, T, 7), 1).shape == (4, 7)


# ---------------------------------------------------------------- mass matrices
def test_first_diagonal_of_B_closed_form():
    # B_11 = int psi_1' psi_1 = [psi_1^2]_0^T / 2 = sinh(T)/sinh(T) = 1
    m = tb.mass_matrices(klibanov(1))
    assert abs(m.B[0, 0] - 1.0) < 1e-12


def test_klibanov_B_unit_upper_triangular():
    m = tb.mass_matrices(klibanov(35, quad=130))
    assert np.max(np.abs(np.diag(m.B) - 1.0)) < 1e-6
    assert np.max(np.abs(np.tril(m.B, -1))) < 1e-6


def test_psi0_matches_eval_at_zero():
    b = klibanov(6)
    m = tb.mass_matrices(b)
    assert np.array_equal(m.psi0, tb.eval_basis(b, 0.0, 0))


def test_trig_A_matrix_structure():
    b = tb.build_basis("trigonometric", 7, T, 60)
    m = tb.mass_matrices(b)
    freqs = np.array([0.0] + [-(2 * np.pi * ((i + 1) // 2) / T) ** 2
                              for i in range(1, 7)])
    assert np.max(np.abs(np.diag(m.A) - freqs)) < 1e-10
    assert np.max(np.abs(m.A - np.diag(np.diag(m.A)))) < 1e-10
    assert np.max(np.abs(m.A[0])) < 1e-10          # constant row
    assert np.max(np.abs(m.A[:, 0])) < 1e-10       # constant column
    # spot value: the cos_2 entry at T=2 is -(2 pi)^2
    assert abs(m.A[3, 3] + (2 * np.pi) ** 2) < 1e-10


def test_trig_B_antisymmetric():
    # periodic boundary values make the bilinear form skew for this family
    m = tb.mass_matrices(tb.build_basis("trigonometric", 9, T, 60))
    assert np.max(np.abs(m.B + m.B.T)) < 1e-10


def test_A_entry_against_independent_quadrature():
    b = klibanov(8)
    m = tb.mass_matrices(b)
    x, w = np.polynomial.legendre.leggauss(300)
    t = 0.5 * T * (x + 1.0)
    w = 0.5 * T * w
    val = np.sum(w * tb.eval_basis(b, t, 2)[5] * tb.eval_basis(b, t, 0)[3])
    assert abs(m.A[3, 5] - val) < 1e-9


# ---------------------------------------------------------------- projection
def test_project_recovers_unit_vectors():
    b = klibanov(6)
    t = np.linspace(0.0, T, 201)
    coeff = tb.project_time_series(tb.eval_basis(b, t, 0)[2], b)
    assert np.max(np.abs(coeff - np.eye(6)[2])) < 1e-4


def test_project_zero_and_linearity():
    b = klibanov(6)
    t = np.linspace(0.0, T, 201)
    assert np.all(tb.project_time_series(np.zeros(201), b) == 0.0)
    vals = tb.eval_basis(b, t, 0)
    coeff = tb.project_time_series(vals[0] + 2.0 * vals[1], b)
    want = np.zeros(6)
    want[0], want[1] = 1.0, 2.0
    assert np.max(np.abs(coeff - want)) < 1e-4


def test_project_odd_panel_count():
    # 202 samples -> 201 panels: Simpson plus a trapezoid tail
    b = klibanov(6)
    t = np.linspace(0.0, T, 202)
    coeff = tb.project_time_series(tb.eval_basis(b, t, 0)[2], b)
    assert np.max(np.abs(coeff - np.eye(6)[2])) < 1e-3


def test_project_batched_and_validation():
    b = klibanov(4)
    t = np.linspace(0.0, T, 101)
    stack = np.stack([tb.eval_basis(b, t, 0)[1], tb.eval_basis(b, t, 0)[3]])
    out = tb.project_time_series(stack, b)
    assert out.shape == (2, 4)
    assert np.max(np.abs(out - np.eye(4)[[1, 3]])) < 1e-3
    with pytest.raises(ValueError):
        tb.project_time_series(np.zeros(2), b)


def test_simpson_weights_integrate_cubics_exactly():
    # even panel count: Simpson is exact on cubics
    for nt in (5, 201):
        tgrid = np.linspace(0.0, T, nt)
        w = tb._simpson_weights(nt, tgrid[1] - tgrid[0])
        assert abs(np.sum(w * tgrid ** 3) - T ** 4 / 4) < 1e-12
        assert abs(np.sum(w) - T) < 1e-12
