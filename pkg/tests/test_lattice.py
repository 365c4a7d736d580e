import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from topolattice import models
from topolattice.lattice import (
    ConfigurationError,
    DisorderConfig,
    HoppingKernel,
    LatticeSpec,
    MagneticField,
    OperatorRep,
    build_hamiltonian,
    build_magnetic_translation,
    check_flux,
    dress_phase,
    strip_phase,
)

from conftest import random_kernel


def _torus_field(n1, n2, k):
    return MagneticField.perpendicular(2 * np.pi * k / (n1 * n2))


def test_lattice_validation():
    with pytest.raises(ConfigurationError):
        LatticeSpec((0, 3))
    with pytest.raises(ConfigurationError):
        LatticeSpec((4, 4, 4, 4))
    with pytest.raises(ConfigurationError):
        LatticeSpec((4, 4), ("open", "weird"))
    with pytest.raises(ConfigurationError):
        LatticeSpec((8, 8), margin=4)
    lat = LatticeSpec((3, 5), "periodic", 2)
    assert lat.dim == 30 and lat.periodic == (True, True)
    assert lat.row_coords.shape == (30, 2)


def test_field_matrix_antisymmetric():
    B = MagneticField((0.1, -0.4, 0.7))
    M = B.matrix(3)
    np.testing.assert_array_equal(M, -M.T)
    assert M[0, 1] == 0.7 and M[1, 2] == 0.1 and M[2, 0] == -0.4
    assert B.matrix(2).shape == (2, 2) and not B.matrix(1).any()


def test_flux_check_names_violation():
    lat = LatticeSpec((6, 6), "periodic")
    check_flux(lat, _torus_field(6, 6, 5))
    with pytest.raises(ConfigurationError, match="flux"):
        check_flux(lat, MagneticField.perpendicular(1.0))
    # open lattices accept any real field
    check_flux(LatticeSpec((6, 6)), MagneticField.perpendicular(np.sqrt(2)))


def test_kernel_rejects_non_hermitian():
    with pytest.raises(ConfigurationError):
        HoppingKernel({(1,): [[1.0]], (-1,): [[2.0]]})
    with pytest.raises(ConfigurationError):
        HoppingKernel.from_half({(0,): [[0, 1], [0, 0]]})


def test_translation_zero_shift_is_identity():
    lat = LatticeSpec((6, 6), "periodic", 2)
    U = build_magnetic_translation(lat, _torus_field(6, 6, 1), (0, 0))
    np.testing.assert_allclose(U.matrix, np.eye(lat.dim), atol=1e-14)


def test_translation_without_field_is_shift_permutation():
    lat = LatticeSpec((5, 4), "periodic")
    U = build_magnetic_translation(lat, MagneticField(), (1, 2)).matrix
    c = lat.coords
    for n in range(lat.n_sites):
        src = lat.flat_index(((c[n] - (1, 2)) % (5, 4))[None])[0]
        assert U[n, src] == 1
    assert np.abs(U).sum() == lat.n_sites


def test_translation_partial_isometry_open():
    lat = LatticeSpec((5, 5))
    U = build_magnetic_translation(lat, MagneticField.perpendicular(0.3), (2, 0)).matrix
    s = np.linalg.svd(U, compute_uv=False)
    assert np.allclose(np.sort(s)[-15:], 1) and np.allclose(np.sort(s)[:10], 0)
    with pytest.raises(ConfigurationError):
        build_magnetic_translation(lat, MagneticField(), (5, 0))


def _brute_force_phase(lat, B, a, b):
    """Global phase of U_a U_b U_{a+b}^{-1} from the site-level phases."""
    Ua = build_magnetic_translation(lat, B, a).matrix
    Ub = build_magnetic_translation(lat, B, b).matrix
    Uab = build_magnetic_translation(lat, B, tuple(np.add(a, b))).matrix
    M = Ua @ Ub @ Uab.conj().T
    d = np.diag(M)
    return M, d[0]


def test_translation_composition_is_global_phase():
    lat = LatticeSpec((6, 6), "periodic")
    # shifts commute with the periods only when the flux per cell is a multiple of 2 pi / 6
    B = _torus_field(6, 6, 6)
    b3 = B.components[2]
    for a in [(x, y) for x in range(-2, 3) for y in range(-2, 3)]:
        for b in [(1, 0), (0, 1), (2, -1), (-2, 2)]:
            M, phase = _brute_force_phase(lat, B, a, b)
            np.testing.assert_allclose(M, phase * np.eye(lat.dim), atol=1e-12)
            # product of the two half-phases of the cocycle: exp(i/2 a.B b)
            expected = np.exp(0.5j * b3 * (a[0] * b[1] - a[1] * b[0]))
            assert abs(phase - expected) < 1e-12


def test_ring_spectrum_closed_form():
    N = 11
    lat = LatticeSpec((N,), "periodic")
    H = build_hamiltonian(lat, MagneticField(), HoppingKernel.from_half({(1,): [[1.0]]}))
    E = np.linalg.eigvalsh(H.matrix)
    np.testing.assert_allclose(E, np.sort(2 * np.cos(2 * np.pi * np.arange(N) / N)), atol=1e-12)


def test_zero_kernel_diagonal_disorder():
    lat = LatticeSpec((4, 3), internal_dim=2)
    kernel = HoppingKernel({(0, 0): np.zeros((2, 2))})
    dis = DisorderConfig("hermitian", 1.5, 7)
    H = build_hamiltonian(lat, MagneticField.perpendicular(0.4), kernel, dis).matrix
    V = dis.site_potential(lat)
    for s in range(lat.n_sites):
        np.testing.assert_allclose(H[2 * s:2 * s + 2, 2 * s:2 * s + 2], V[s], atol=1e-15)
    off = H.copy()
    for s in range(lat.n_sites):
        off[2 * s:2 * s + 2, 2 * s:2 * s + 2] = 0
    assert not off.any()


def test_disorder_determinism_and_hermiticity():
    lat = LatticeSpec((5, 5), internal_dim=3)
    a = DisorderConfig("hermitian", 2.0, 123).site_potential(lat)
    b = DisorderConfig("hermitian", 2.0, 123).site_potential(lat)
    c = DisorderConfig("hermitian", 2.0, 124).site_potential(lat)
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    np.testing.assert_array_equal(a, np.conj(np.transpose(a, (0, 2, 1))))
    u = DisorderConfig("uniform", 1.0, 3).site_potential(lat)
    assert np.all(np.abs(u) <= 0.5)


def test_covariance_on_torus(rng):
    lat = LatticeSpec((6, 6), "periodic", 2)
    B = _torus_field(6, 6, 12)
    kernel = random_kernel(rng)
    dis = DisorderConfig("hermitian", 1.0, 11)
    H = build_hamiltonian(lat, B, kernel, dis).matrix
    for a in [(1, 0), (0, 1), (2, -3)]:
        U = build_magnetic_translation(lat, B, a).matrix
        Hs = build_hamiltonian(lat, B, kernel, dis.shifted(a)).matrix
        assert np.abs(U @ H @ U.conj().T - Hs).max() < 1e-12


def test_covariance_open_interior(rng):
    lat = LatticeSpec((10, 10), internal_dim=1)
    B = MagneticField.perpendicular(0.37)
    kernel = random_kernel(rng, L=1)
    dis = DisorderConfig("uniform", 1.0, 5)
    H = build_hamiltonian(lat, B, kernel, dis).matrix
    a = (1, 1)
    U = build_magnetic_translation(lat, B, a).matrix
    Hs = build_hamiltonian(lat, B, kernel, dis.shifted(a)).matrix
    inner = np.all((lat.coords >= 2) & (lat.coords < 8), axis=1)
    R = (U @ H @ U.conj().T - Hs)[np.ix_(inner, inner)]
    assert np.abs(R).max() < 1e-12


def test_strip_phase_field_independent(rng):
    lat = LatticeSpec((6, 5), internal_dim=2)
    kernel = random_kernel(rng)
    S1 = strip_phase(build_hamiltonian(lat, MagneticField.perpendicular(0.2), kernel))
    S2 = strip_phase(build_hamiltonian(lat, MagneticField.perpendicular(-1.1), kernel))
    S0 = build_hamiltonian(lat, MagneticField(), kernel)
    assert np.abs(S1 - S2).max() < 1e-12
    np.testing.assert_array_equal(strip_phase(S0), S0.matrix)


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**32))
def test_strip_dress_roundtrip(b1, b2, b3, seed):
    lat = LatticeSpec((3, 2, 2), internal_dim=2)
    r = np.random.default_rng(seed)
    B = MagneticField((b1, b2, b3))
    A = OperatorRep(r.normal(size=(lat.dim, lat.dim)) + 1j * r.normal(size=(lat.dim, lat.dim)), lat, B)
    back = dress_phase(strip_phase(A), lat, B)
    assert np.abs(back.matrix - A.matrix).max() < 1e-13


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32), st.floats(-2, 2), st.sampled_from(["none", "uniform", "hermitian"]))
def test_hamiltonian_always_hermitian(seed, b3, kind):
    r = np.random.default_rng(seed)
    lat = LatticeSpec((5, 4), internal_dim=2)
    H = build_hamiltonian(lat, MagneticField.perpendicular(b3), random_kernel(r), DisorderConfig(kind, 1.0, seed))
    assert np.abs(H.matrix - H.matrix.conj().T).max() <= 1e-12 * max(1.0, np.linalg.norm(H.matrix, 2))


def test_model_builders():
    h = models.haldane(t2=0.0)
    H = h.hamiltonian(h.lattice((4, 4)))
    assert np.abs(H.matrix.imag).max() < 1e-15  # t2 = 0 has only real hopping
    hof = models.hofstadter()
    lat = LatticeSpec((6, 6))
    assert np.abs(strip_phase(hof.hamiltonian(lat)) - strip_phase(hof.hamiltonian(lat, MagneticField()))).max() < 1e-14
    rm = models.rice_mele()
    k0, k1 = rm.kernel(0.0), rm.kernel(2 * np.pi)
    for m in k0.terms:
        np.testing.assert_allclose(k0.terms[m], k1.terms[m], atol=1e-14)
    with pytest.raises(ConfigurationError):
        models.haldane(t1=1j)
    with pytest.raises(ConfigurationError):
        models.rice_mele(delta0=0.0)
    assert set(models.CATALOG) >= {"haldane", "hofstadter", "rice_mele", "anderson"}
