"""One test per acceptance criterion, each printing a PASS/FAIL line with the measured values."""
import json
import time

import numpy as np
import pytest
from scipy.linalg import expm, sqrtm

from topolattice import cli, dynamics as dy, edge, models, observables as ob
from topolattice.algebra import (
    SpectralDecomposition,
    TraceWindow,
    fermi_projection,
    grad,
    ito_derivative_fd,
    ito_exponential,
)
from topolattice.lattice import LatticeSpec, OperatorRep, build_hamiltonian

from conftest import random_kernel
from test_algebra import B0, OPEN, TORUS, T, _interior, ito_residuals, torus_operators


def test_criterion_1_algebra_identities(report):
    start = time.perf_counter()
    worst = {}

    def note(key, val):
        worst[key] = max(worst.get(key, 0.0), float(val))

    for seed in range(5):
        H, A, B = torus_operators(seed)
        scale = max(1.0, abs(T(A @ B)))
        note("normalization", abs(T(OperatorRep.identity(TORUS)) - TORUS.internal_dim))
        AA = T(A.dag() @ A)
        note("positivity", max(0.0, -AA.real) + abs(AA.imag))
        note("conjugation", abs(T(A.dag()) - np.conj(T(A))))
        AB = (A @ B).matrix
        bound = T(sqrtm(AB.conj().T @ AB)).real - A.norm() * T(sqrtm(B.matrix.conj().T @ B.matrix)).real
        note("norm_bound", max(0.0, bound))
        note("cyclicity", abs(T(A @ B) - T(B @ A)) / scale)
        for j in (0, 1):
            note("invariance", abs(T(grad(A, j))))
            note("partial_integration", abs(T(A @ grad(B, j)) + T(grad(A, j) @ B)) / scale)
        note("mixed_gradient_symmetry", abs(T(grad(A, 0) @ grad(B, 1)) - T(grad(A, 1) @ grad(B, 0))) / scale)
        S = SpectralDecomposition.of(H)
        x = S.energies / S.norm
        rng = np.random.default_rng(seed)
        c1, c2 = rng.uniform(-1, 1, 4), rng.uniform(-1, 1, 4)
        f, g = S.operator(np.polyval(c1, x)), S.operator(np.polyval(c2, x))
        for j in (0, 1):
            note("equilibrium_current", abs(T(g @ grad(f, j))))
    elapsed = time.perf_counter() - start
    ok = max(worst.values()) <= 1e-10 and elapsed < 10
    detail = ", ".join(f"{k}={v:.1e}" for k, v in worst.items())
    report(1, ok, f"max residuals {detail} (<= 1e-10), {elapsed:.1f}s")


@pytest.fixture(scope="module")
def ito_builders():
    r = np.random.default_rng(7)
    K1, K2 = random_kernel(r, L=1), random_kernel(r, L=1)
    return (lambda B: build_hamiltonian(OPEN, B, K1)), (lambda B: build_hamiltonian(OPEN, B, K2))


def test_criterion_2_ito_calculus(report, ito_builders):
    start = time.perf_counter()
    coarse = ito_residuals(*ito_builders, 1e-2)
    fine = ito_residuals(*ito_builders, 5e-3)
    ratios = {k: coarse[k] / fine[k] for k in ("dH2", "product", "commutator")}
    h1 = ito_builders[0]
    S = SpectralDecomposition.of(h1(B0))
    pair = (grad(S.source, 0), grad(S.source, 1))
    z = -0.7j
    exact = ito_exponential(S, pair, z)
    fd = ito_derivative_fd(lambda B: h1(B).like(expm(z * h1(B).matrix)), B0, 3, 2.5e-3)
    rel = _interior(exact - fd) / _interior(exact)
    elapsed = time.perf_counter() - start
    ok = (fine["dH"] < 1e-11 and all(3.5 <= r <= 4.5 for r in ratios.values())
          and fine["adjoint"] < 1e-10 and fine["grad"] < 1e-10 and rel <= 1e-4 and elapsed < 60)
    ratio_txt = ", ".join(f"{k} {v:.3f}" for k, v in ratios.items())
    report(2, ok, f"dH={fine['dH']:.1e}; halving ratios {ratio_txt} (4 +- 0.5); "
                  f"adjoint and grad commutation {fine['adjoint']:.1e},{fine['grad']:.1e}; ito_exponential rel {rel:.1e} (<= 1e-4); "
                  f"{elapsed:.1f}s")


def _ensemble_chern(W, seeds, **params):
    clean = models.haldane(**params)
    gap = edge.bulk_gap(clean.kernel, 0.0)
    mu = 0.5 * sum(gap)
    values = []
    for seed in seeds:
        m = models.haldane(disorder=W, seed=seed, **params)
        S = SpectralDecomposition.of(m.hamiltonian(m.lattice((24, 24), margin=6)))
        values.append(ob.chern_number(fermi_projection(S, mu)).value)
    oracle = ob.plaquette_chern(clean.kernel, [0], 48)
    return float(np.mean(values)), oracle


def test_criterion_3_chern_integrality(report):
    start = time.perf_counter()
    topo, topo_oracle = _ensemble_chern(0.5, range(10))
    triv, triv_oracle = _ensemble_chern(0.5, range(10), t2=0.1, m_stag=1.0)
    elapsed = time.perf_counter() - start
    ok = (abs(abs(topo) - 1) <= 2e-2 and abs(topo - topo_oracle) <= 2e-2
          and abs(triv) <= 2e-2 and abs(triv_oracle) < 1e-6 and elapsed < 300)
    report(3, ok, f"topological mean {topo:.5f} (oracle {topo_oracle:.5f}), trivial mean {triv:.2e} "
                  f"(oracle {triv_oracle:.1e}), 10 seeds W=0.5, {elapsed:.1f}s")


def test_criterion_4_magnetization_routes(report):
    start = time.perf_counter()
    m = models.haldane(phi=1.2)
    S = SpectralDecomposition.of(m.hamiltonian(m.lattice((24, 24), margin=6)))
    bands = ob.bloch_bands(m.kernel, 48)
    mu = 0.5 * (bands.energies[..., 0].max() + bands.energies[..., 1].min())
    w = TraceWindow.central(S.lattice)
    t0 = ob.magnetization_T0(S, mu, w).value
    ccm = ob.current_current_measure(S, w)
    c50 = ob.magnetization_ccm(ccm, 50.0, mu).value
    b50 = ob.magnetization_bloch(bands, 50.0, mu)
    diffs = [abs(ob.magnetization_ccm(ccm, beta, mu).value - t0) for beta in (5.0, 10.0, 20.0, 40.0)]
    monotone = all(a > b for a, b in zip(diffs, diffs[1:]))
    trs = models.haldane(t2=0.0, m_stag=0.5)
    St = SpectralDecomposition.of(trs.hamiltonian(trs.lattice((12, 12))))
    m_trs = max(abs(ob.magnetization_T0(St, 0.0).value),
                abs(ob.magnetization_ccm(ob.current_current_measure(St), 50.0, 0.0).value))
    elapsed = time.perf_counter() - start
    ok = abs(t0 - b50) <= 3e-2 and abs(c50 - b50) <= 3e-2 and monotone and m_trs <= 1e-8 and elapsed < 300
    report(4, ok, f"T=0 trace {t0:.6f}, Bloch(50) {b50:.6f}, ccm(50) {c50:.6f}; "
                  f"|ccm-T0| over beta 5,10,20,40 = {', '.join(f'{d:.2e}' for d in diffs)} (monotone {monotone}); "
                  f"TRS |M| {m_trs:.1e}; {elapsed:.1f}s")


def test_criterion_5_streda(report):
    start = time.perf_counter()
    m = models.hofstadter()
    lat = m.lattice((24, 24))
    mu = -1.5
    st = ob.streda_check(m.family(lat), m.field, mu)
    d = ob.dmu_magnetization(SpectralDecomposition.of(m.hamiltonian(lat)), mu, 1e-2)
    vals = {"dB_IDS": st.lhs, "-Ch/2pi": st.rhs, "dmu_M": d.slope}
    spread = max(vals.values()) - min(vals.values())
    elapsed = time.perf_counter() - start
    ok = spread <= 2e-2 and elapsed < 300
    report(5, ok, ", ".join(f"{k} {v:.5f}" for k, v in vals.items()) + f"; spread {spread:.1e} (<= 2e-2); {elapsed:.1f}s")


def test_criterion_6_pump(report):
    start = time.perf_counter()
    ring = LatticeSpec((32,), "periodic", 2)
    path = dy.TimePath(models.rice_mele(), ring, flatness=4)
    rev = dy.TimePath(models.rice_mele(), ring, flatness=4, reverse=True)
    ch = dy.pump_chern(dy.loop_projections(path), path.horizon, ring)[0]
    ch_rev = dy.pump_chern(dy.loop_projections(rev), rev.horizon, ring)[0]
    kv = dy.polarization_kv(path)[0]
    eps = [0.1, 0.05, 0.025]
    runs = [dy.polarization_dynamic(path, e) for e in eps]
    diffs = [abs(r.value[0] - kv) for r in runs]
    slope = dy.ScalingReport.slope(eps, diffs)
    elapsed = time.perf_counter() - start
    ok = (abs(abs(ch) - 1) <= 5e-2 and slope >= 2 and abs(ch + ch_rev) <= 1e-12
          and max(r.identity_residual for r in runs) <= 1e-6 and elapsed < 600)
    report(6, ok, f"pump_chern {ch:.12f}, reversed {ch_rev:.12f}; |dynamic - kv| "
                  f"{', '.join(f'{d:.2e}' for d in diffs)} at eps {eps}, slope {slope:.2f} (>= 2); {elapsed:.1f}s")


def test_criterion_7_superadiabatic(report):
    start = time.perf_counter()
    eps = [0.2, 0.1, 0.05, 0.025]
    paths = {
        "two-level": dy.TimePath(models.avoided_crossing(), LatticeSpec((1,), "open", 2)),
        "16-site ring": dy.TimePath(models.rice_mele(), LatticeSpec((8,), "periodic", 2), horizon=2 * np.pi),
    }
    ok, parts = True, []
    for name, path in paths.items():
        for N in (0, 1, 2):
            s = dy.superadiabatic_verify(path, N, eps).slopes
            good = abs(s["eom_residual"] - (N + 1)) <= 0.3 and s["tracking_error"] >= N - 0.2
            txt = f"{name} N={N}: eom {s['eom_residual']:.2f}, tracking {s['tracking_error']:.2f}"
            if N >= 1:
                good &= abs(s["distance_to_p0"] - 1) <= 0.2
                res = dy.construction_residuals(dy.superadiabatic_construct(path, N, 0.05))
                worst = max(vars(res).values())
                good &= worst <= 1e-8
                txt += f", distance {s['distance_to_p0']:.2f}, residuals {worst:.1e}"
            ok &= good
            parts.append(txt)
    elapsed = time.perf_counter() - start
    ok &= elapsed < 600
    report(7, ok, "; ".join(parts) + f"; {elapsed:.1f}s")


def test_criterion_8_bulk_edge(report):
    start = time.perf_counter()
    kernel = models.haldane().kernel
    bulk = ob.plaquette_chern(kernel, [0], 48)
    half = edge.cylinder_bloch(kernel, 24, 48)
    gap = edge.bulk_gap(kernel, 0.0)
    a = edge.edge_current(half, edge.Bump.in_gap(gap, 0.8))
    lo, hi = gap
    b = edge.edge_current(half, edge.Bump(lo + 0.3 * (hi - lo), 0.15 * (hi - lo)))
    elapsed = time.perf_counter() - start
    ok = (abs(a.value - bulk) <= 2e-2 and a.cancellation <= 1e-3 and abs(a.value - b.value) <= 2e-2
          and elapsed < 300)
    report(8, ok, f"edge current {a.value:.5f} vs bulk Chern {bulk:.5f}, opposite edge {a.opposite:.5f} "
                  f"(cancellation {a.cancellation:.1e}), second bump {b.value:.5f}; {elapsed:.1f}s")


def test_criterion_9_reproducibility(report, tmp_path):
    configs = {
        "chern": {"schema_version": 1, "experiment": "chern",
                  "model": {"name": "haldane", "params": {"disorder": 0.5}},
                  "lattice": {"extents": [12, 12]}, "numerics": {"margin": 3},
                  "ensemble": {"n_seeds": 4, "base_seed": 3}},
        "pump": {"schema_version": 1, "experiment": "pump", "model": {"name": "rice_mele"},
                 "lattice": {"extents": [32], "boundary": "periodic"}, "dynamics": {"eps": [0.2, 0.1]}},
    }
    same = {}
    for name, cfg in configs.items():
        cli.run(cfg, str(tmp_path / name / "a"), workers=1)
        cli.run(cfg, str(tmp_path / name / "b"))
        a = (tmp_path / name / "a" / "results.json").read_bytes()
        b = (tmp_path / name / "b" / "results.json").read_bytes()
        records = json.loads(a)["records"]
        same[name] = a == b and all(r["error"] is None for r in records)
    report(9, all(same.values()), "bit-identical results.json on rerun (serial vs parallel): "
                                  + ", ".join(f"{k} {v}" for k, v in same.items()))
