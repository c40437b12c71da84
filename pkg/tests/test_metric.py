import math

import numpy as np
import pytest

from ptqm import (
    BROKEN,
    UNBROKEN,
    BrokenPhase,
    CPTFrame,
    DimensionMismatch,
    EpsilonFamily,
    Matrix2x2,
    MetricNotPositive,
    classify_spectrum,
    construct_frame,
    inner_cpt,
    inner_eta,
    solve_model,
    verify_frame,
)
from ptqm.models import make_grid
from ptqm.serialization import decode_cmatrix

TAU_DISC = 1e-6


def fro(a):
    return np.linalg.norm(a)


def kept_span_vectors(frame, rng, count):
    coords = rng.standard_normal((frame.modes_kept, count)) + 1j * rng.standard_normal((frame.modes_kept, count))
    return frame.right @ coords


def gram(frame):
    return frame.weight * frame.right.conj().T @ frame.apply_eta(frame.right)


# --------------------------------------------------------------- 2x2 model


def test_two_by_two_classification(sol_2x2, oracles):
    cls = sol_2x2.classification
    assert cls.phase == UNBROKEN
    assert np.allclose(cls.kept_values, oracles["matrix2x2_r1_s1_theta_pi6"]["eigenvalues"], atol=1e-12)
    assert np.allclose(cls.kept_values, [0, math.sqrt(3)], atol=1e-12)


def test_two_by_two_broken():
    sol = solve_model(Matrix2x2(2.0, 1.0, math.pi / 2))
    assert sol.classification.phase == BROKEN
    assert np.allclose(sorted(sol.classification.values.imag), [-math.sqrt(3), math.sqrt(3)], atol=1e-12)
    with pytest.raises(BrokenPhase):
        sol.frame()


def test_two_by_two_c_and_metric(frame_2x2, oracles):
    ref = oracles["matrix2x2_r1_s1_theta_pi6"]
    c = decode_cmatrix(ref["c"])
    assert np.allclose(frame_2x2.c, c, atol=1e-12)
    assert np.allclose(frame_2x2.c, [[0.57735j, 1.15470], [1.15470, -0.57735j]], atol=1e-5)
    assert np.allclose(frame_2x2.eta, [[1.15470, -0.57735j], [0.57735j, 1.15470]], atol=1e-5)
    assert np.allclose(np.linalg.eigvalsh(frame_2x2.eta), ref["eta_eigenvalues"], atol=1e-12)
    assert fro(frame_2x2.c @ frame_2x2.c - np.eye(2)) <= 1e-12
    h = frame_2x2.hamiltonian
    assert fro(frame_2x2.c @ h - h @ frame_2x2.c) <= 1e-12
    assert frame_2x2.order_convention == "PC"


def test_two_by_two_inner_products(frame_2x2):
    e0, e1 = np.eye(2)
    assert inner_eta(frame_2x2, e0, e1) == pytest.approx(-0.57735j, abs=1e-5)
    phi0 = frame_2x2.right[:, 0]
    z = inner_cpt(frame_2x2, phi0, phi0)
    assert abs(z.imag) <= 1e-12 and z.real > 0
    assert z == pytest.approx(inner_eta(frame_2x2, phi0, phi0), abs=1e-12)


def test_inner_product_dimension_check(frame_2x2):
    with pytest.raises(DimensionMismatch):
        inner_eta(frame_2x2, np.ones(3), np.ones(2))
    with pytest.raises(DimensionMismatch):
        inner_cpt(frame_2x2, np.ones(2), np.ones(3))


def test_trivial_frame_inner_product(rng):
    frame = CPTFrame.trivial(4)
    u, v = rng.standard_normal((2, 4)) + 1j * rng.standard_normal((2, 4))
    assert inner_eta(frame, u, v) == pytest.approx(np.vdot(u, v), abs=1e-14)


def test_point_supported_cpt_product():
    n, dx = 7, 0.25
    eye = np.eye(n, dtype=complex)
    par = eye[::-1].copy()
    base = dict(hamiltonian=np.zeros((n, n)), signs=np.ones(n, dtype=int), projector=eye,
                left=eye, values=np.zeros(n), weight=dx, lattice=True)
    # C = I: the CPT image of a point source is its mirror node
    c_identity = CPTFrame(par=par, c=eye, eta=par, eta_inv=par, right=eye, **base)
    # C = Par (right factor Par, left factor I): the two reflections cancel
    c_parity = CPTFrame(par=par, c=par, eta=eye, eta_inv=eye, right=par, **base)
    for j in range(n):
        for k in range(n):
            u = 2j * eye[j]
            v = 3.0 * eye[k]
            assert inner_cpt(c_identity, u, v) == pytest.approx(dx * np.conj(2j) * 3 * (n - 1 - j == k))
            assert inner_cpt(c_parity, u, v) == pytest.approx(dx * np.conj(2j) * 3 * (j == k))


# --------------------------------------------------------------- lattices


def test_oscillator_levels_match_oracle(sol_eps0, oracles):
    ref = np.array(oracles["lattice_eps0.0_n201_L8"])[:, 0]
    assert np.allclose(sol_eps0.classification.kept_values.real, ref, rtol=1e-9)
    coarse = np.abs(sol_eps0.classification.kept_values.real[:5] - [1, 3, 5, 7, 9])
    fine = np.abs(np.array(oracles["lattice_eps0.0_n401_L8"])[:5, 0] - [1, 3, 5, 7, 9])
    # second-order stencil: doubling the resolution cuts the error about fourfold
    assert np.all(fine < coarse / 3)


@pytest.mark.parametrize("eps, key", [(0.5, "lattice_eps0.5_n201_L8"), (1.0, "lattice_eps1.0_n201_L8")])
def test_lattice_levels_match_oracle(eps, key, oracles, request):
    sol = request.getfixturevalue({0.5: "sol_eps05", 1.0: "sol_eps1"}[eps])
    ref = np.array(oracles[key])
    got = sol.classification.kept_values
    assert sol.classification.phase == UNBROKEN
    # the upper kept levels of the non-normal lattice are only conditioned to ~1e-8
    assert np.allclose(got.real, ref[:, 0], rtol=TAU_DISC)
    assert np.max(np.abs(got.imag)) <= 1e-8 * np.max(np.abs(sol.eigensystem.values))


def test_oscillator_c_collapses_onto_parity(frame_eps0):
    f = frame_eps0
    n = f.dim
    dx = f.weight
    x = (np.arange(n) - (n - 1) / 2) * dx
    h = (np.diag(2.0 + dx**2 * x**2) - np.eye(n, k=1) - np.eye(n, k=-1)) / dx**2
    w, v = np.linalg.eigh(h)
    v = v[:, :f.modes_kept] / math.sqrt(dx)
    signs = (-1.0) ** np.arange(f.modes_kept)
    oracle_c = dx * (v * signs) @ v.T
    assert fro(f.c - oracle_c) <= TAU_DISC * fro(oracle_c)
    # on the kept span C acts as Par, and eta = Par C is the orthogonal projector
    assert fro(f.c - f.par @ f.projector) <= TAU_DISC * fro(f.c)
    assert fro(f.eta - f.projector) <= TAU_DISC * fro(f.projector)
    assert np.array_equal(f.signs, signs.astype(int))


@pytest.mark.parametrize("name", ["frame_2x2", "frame_eps0", "frame_eps05", "frame_eps1"])
def test_frame_invariants(name, request):
    f = request.getfixturevalue(name)
    res = verify_frame(f)
    for key in ("c_squared", "commutes_h", "pt_commutes", "eta_hermitian", "pseudo_hermitian"):
        assert res[key] <= TAU_DISC, key
    assert res["eta_min_eigenvalue"] > 0
    assert np.allclose(f.par @ f.right.conj(), f.right, atol=1e-9 * fro(f.right))
    assert fro(f.left.conj().T @ f.right - np.eye(f.modes_kept)) <= TAU_DISC


@pytest.mark.parametrize("name", ["frame_2x2", "frame_eps0", "frame_eps05", "frame_eps1"])
def test_gram_matrix_is_positive_diagonal(name, request):
    f = request.getfixturevalue(name)
    g = gram(f)
    d = np.diag(g)
    assert np.all(d.real > 0)
    off = g - np.diag(d)
    assert np.max(np.abs(off)) <= TAU_DISC * np.max(np.abs(d))


@pytest.mark.parametrize("name", ["frame_2x2", "frame_eps05", "frame_eps1"])
def test_apply_c_is_the_dense_c(name, request, rng):
    f = request.getfixturevalue(name)
    v = kept_span_vectors(f, rng, 3)
    assert fro(f.apply_c(v) - f.c @ v) <= 1e-9 * fro(f.c @ v)
    assert fro(f.apply_eta(v) - f.eta @ v) <= 1e-9 * fro(f.eta @ v)


@pytest.mark.parametrize("name", ["frame_2x2", "frame_eps0", "frame_eps05", "frame_eps1"])
def test_sign_flip_breaks_positivity(name, request):
    f = request.getfixturevalue(name)
    for k in range(f.modes_kept):
        s = f.signs.copy()
        s[k] = -s[k]
        c = (f.right * s) @ f.left.conj().T
        g = f.right.conj().T @ (f.par @ (f.right * s))
        lowest = np.linalg.eigvalsh(0.5 * (g + g.conj().T))[0]
        broken_c2 = fro(c @ c - f.projector) > TAU_DISC * fro(f.projector)
        assert lowest < 0 or broken_c2


@pytest.mark.parametrize("name", ["frame_2x2", "frame_eps0", "frame_eps05", "frame_eps1"])
def test_inner_products_coincide_on_kept_span(name, request, rng):
    f = request.getfixturevalue(name)
    us = kept_span_vectors(f, rng, 100)
    vs = kept_span_vectors(f, rng, 100)
    for u, v in zip(us.T, vs.T):
        scale = f.weight * np.linalg.norm(u) * np.linalg.norm(v)
        a, b = inner_eta(f, u, v), inner_cpt(f, u, v)
        assert abs(a - b) <= TAU_DISC * scale
        assert inner_eta(f, v, u) == pytest.approx(np.conj(a), abs=1e-12 * scale)
        assert inner_eta(f, u, u).real > 0


def test_negative_epsilon_is_broken():
    sol = solve_model(EpsilonFamily(-0.5))
    assert sol.classification.phase == BROKEN
    with pytest.raises(BrokenPhase):
        sol.frame()


def test_frame_above_cubic():
    # complex lattice artifacts appear near level 8 once eps > 1; the lowest five are clean
    assert solve_model(EpsilonFamily(1.5)).classification.phase == BROKEN
    f = solve_model(EpsilonFamily(1.5), modes=5).frame()
    assert f.order_convention == "PC"
    verify_frame(f)


def test_shifted_square_metric_not_positive(sol_shifted):
    assert sol_shifted.classification.phase == UNBROKEN
    with pytest.raises(MetricNotPositive) as info:
        sol_shifted.frame()
    assert "PC" in str(info.value) and "CP" in str(info.value)


def test_partial_mode_selection(sol_eps1):
    cls = classify_spectrum(sol_eps1.eigensystem, m=4)
    assert len(cls.kept) == 4
    f = construct_frame(sol_eps1.hamiltonian, sol_eps1.par, sol_eps1.eigensystem, cls,
                        weight=sol_eps1.hamiltonian.weight, lattice=True)
    assert f.modes_kept == 4
    verify_frame(f)


def test_small_grid_frame_still_verifies():
    sol = solve_model(EpsilonFamily(1.0), grid=make_grid(61, 6.0), modes=5)
    verify_frame(sol.frame())
