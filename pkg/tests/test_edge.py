import numpy as np
import pytest

from topolattice import edge, models, observables
from topolattice.algebra import GaplessError
from topolattice.lattice import ConfigurationError, LatticeSpec


def haldane_cylinder(rows=24, nk=48, **kw):
    return edge.cylinder_bloch(models.haldane(**kw).kernel, rows, nk)


def test_bump_is_normalized_and_supported():
    b = edge.Bump(0.3, 0.4)
    assert abs(b.integral() - 1) < 1e-10
    assert b(np.array([-0.1, 0.7, 2.0])).tolist() == [0.0, 0.0, 0.0]
    g = edge.Bump.in_gap((-1.0, 0.5), 0.8)
    assert g.center == -0.25 and abs(g.width - 0.6) < 1e-15
    with pytest.raises(ValueError):
        edge.Bump(0.0, 0.0)


def test_restriction_keeping_everything_is_identity():
    model = models.haldane()
    lat = LatticeSpec((6, 5), ("periodic", "open"), 2)
    H = model.hamiltonian(lat)
    half = edge.restrict_half_space(H, 1)
    assert np.array_equal(half.matrix, H.matrix)
    assert np.abs(half.matrix - half.matrix.conj().T).max() == 0
    with pytest.raises(ConfigurationError):
        edge.restrict_half_space(H, 0)


def test_restriction_removes_lower_rows():
    lat = LatticeSpec((4, 6), ("periodic", "open"), 2)
    H = models.haldane().hamiltonian(lat)
    half = edge.restrict_half_space(H, 1, start=2)
    keep = lat.row_coords[:, 1] >= 2
    assert np.array_equal(half.matrix, H.matrix[np.ix_(keep, keep)])
    assert half.lattice.extents == (4, 4)


def test_zero_hopping_spectrum_is_onsite():
    model = models.atomic_insulator(gap=3.0)
    H = model.hamiltonian(LatticeSpec((4, 5), ("periodic", "open"), 2))
    spec = edge.restrict_half_space(H, 1, start=1).spectrum()
    assert np.all(np.min(np.abs(spec[:, None] - np.array([-1.5, 1.5])[None, :]), axis=1) < 1e-14)


def test_edge_trace_elementary():
    half = haldane_cylinder(rows=12, nk=8)
    assert edge.edge_trace(half, np.zeros_like(half.blocks)).value == 0
    # projector onto the first boundary cell
    P = np.zeros_like(half.blocks)
    P[:, 0, 0] = P[:, 1, 1] = 1
    tr = edge.edge_trace(half, P)
    assert tr.value == 2 and tr.shell == 0 and tr.decays
    assert edge.edge_trace(half, P, edge="upper").value == 0
    with pytest.raises(ValueError):
        edge.edge_trace(half, P, edge="side")


def test_cylinder_blocks_match_bulk_bands():
    kernel = models.haldane().kernel
    half = edge.cylinder_bloch(kernel, 1, 16)
    assert np.abs(half.blocks - half.blocks.conj().transpose(0, 2, 1)).max() < 1e-14
    # k-derivative of the blocks against finite differences in k
    big = edge.cylinder_bloch(kernel, 6, 400)
    fd = (big.blocks[1] - big.blocks[-1]) / (2 * 2 * np.pi / 400)
    assert np.abs(fd - big.block_derivs[0]).max() < 1e-3
    assert half.spectrum().shape == (16, 2)


def test_haldane_edge_matches_bulk_chern():
    kernel = models.haldane().kernel
    bulk = observables.plaquette_chern(kernel, [0], 48)
    cur = edge.edge_current(haldane_cylinder())
    assert abs(cur.value - bulk) < 2e-2 and abs(bulk - 1) < 2e-2
    assert cur.cancellation <= 1e-3
    assert cur.shell <= 1e-3 and cur.imag < 1e-5


def test_reversed_flux_and_trivial_phase():
    neg = edge.edge_current(haldane_cylinder(phi=-np.pi / 2))
    assert abs(neg.value + 1) < 2e-2
    triv = edge.edge_current(haldane_cylinder(t2=0.1, m_stag=1.0))
    assert abs(triv.value) < 2e-2


def test_bump_independence():
    half = haldane_cylinder()
    gap = edge.bulk_gap(half.kernel, 0.0)
    a = edge.edge_current(half, edge.Bump.in_gap(gap, 0.8)).value
    lo, hi = gap
    b = edge.edge_current(half, edge.Bump(lo + 0.3 * (hi - lo), 0.15 * (hi - lo))).value
    assert abs(a - b) < 2e-2


def test_bump_outside_gap_rejected():
    half = haldane_cylinder(rows=12, nk=8)
    gap = edge.bulk_gap(half.kernel, 0.0)
    with pytest.raises(GaplessError):
        edge.edge_current(half, edge.Bump(gap[1], 0.1))
    with pytest.raises(GaplessError):
        edge.bulk_gap(half.kernel, 50.0)


def test_current_density_decays_into_bulk():
    half = haldane_cylinder()
    gap = edge.bulk_gap(half.kernel, 0.0)
    A = edge._current_operator(half, edge.Bump.in_gap(gap))
    prof = np.abs(edge.row_profile(half, A))[:10]
    rate = -np.polyfit(np.arange(10), np.log(prof + 1e-300), 1)[0]
    assert rate > 0.5
    shallow = edge.edge_current(half, depth=6).value
    deep = edge.edge_current(half, depth=12).value
    assert abs(shallow - deep) <= 1e-3


def test_real_space_fallback_and_axis_orientation():
    model = models.haldane()
    gap = edge.bulk_gap(model.kernel, 0.0)
    lat = LatticeSpec((24, 16), ("periodic", "open"), 2)
    cur = edge.edge_current(edge.restrict_half_space(model.hamiltonian(lat), 1), gap=gap)
    assert abs(cur.value - 1) < 3e-2 and cur.cancellation < 1e-3
    # restricting the other axis uses the opposite ordering of the Chern pair
    other = edge.cylinder_bloch(model.kernel, 24, 48, axis=0)
    assert abs(edge.edge_current(other).value - 1) < 2e-2
