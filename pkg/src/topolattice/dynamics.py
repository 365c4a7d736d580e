"""Adiabatic dynamics: time paths, Liouville evolution, polarization and charge pumps."""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from functools import cached_property
from typing import Callable, Iterator

import numpy as np
import sympy as sp
from scipy.integrate import simpson

from .algebra import GaplessError, TraceWindow, displacement
from .lattice import DisorderConfig, LatticeSpec, MagneticField, OperatorRep, build_hamiltonian
from .models import KernelFamily


class RefinementError(RuntimeError):
    """The time step is too coarse for the requested invariant tolerance."""


def smoothstep(order: int) -> sp.Expr:
    """Polynomial switch ``s(u)`` on ``[0, 1]`` with ``s(0) = 0``, ``s(1) = 1`` and derivatives
    ``1..order`` vanishing at both ends (normalized incomplete beta function)."""
    u = sp.Symbol("u", real=True)
    if order == 0:
        return u
    # kept in powers of (1 - u) so endpoint derivatives cancel exactly in floating point
    return u ** (order + 1) * sp.Add(*[sp.binomial(order + j, j) * (1 - u) ** j for j in range(order + 1)])


@dataclass(frozen=True, eq=False)
class TimePath:
    """``t in [0, horizon] -> H(t)`` built from a kernel family along ``theta(t)``.

    ``theta(t) = start + (end - start) s(t / horizon)`` where ``s`` is the identity when
    ``flatness`` is None and :func:`smoothstep` of that order otherwise, so that all
    time derivatives up to ``flatness`` vanish at both endpoints.
    """

    family: KernelFamily
    lattice: LatticeSpec
    horizon: float = 1.0
    mu: float | Callable[[float], float] = 0.0
    flatness: int | None = None
    theta_range: tuple[float, float] | None = None
    reverse: bool = False
    field: MagneticField = dc_field(default_factory=MagneticField)

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.flatness is not None and self.flatness < 0:
            raise ValueError("flatness must be >= 0")

    @property
    def span(self) -> tuple[float, float]:
        lo, hi = self.theta_range or self.family.theta_range
        return (hi, lo) if self.reverse else (lo, hi)

    @property
    def periodic(self) -> bool:
        """Closed loop: the family is a loop and the path covers its whole range."""
        lo, hi = self.theta_range or self.family.theta_range
        full = self.family.theta_range
        return self.family.loop and np.isclose(abs(hi - lo), abs(full[1] - full[0]))

    @cached_property
    def _components(self) -> list[np.ndarray]:
        clean = DisorderConfig()
        mats = [build_hamiltonian(self.lattice, self.field, self.family.base, clean).matrix]
        for comp in self.family.components:
            mats.append(build_hamiltonian(self.lattice, self.field, comp, clean).matrix)
        return mats

    @cached_property
    def _time_symbol(self) -> sp.Symbol:
        return sp.Symbol("t", real=True)

    @cached_property
    def _theta_expr(self) -> sp.Expr:
        t = self._time_symbol
        start, end = self.span
        u = t / self.horizon
        if self.flatness is None:
            return start + (end - start) * u
        s = smoothstep(self.flatness)
        sym = sp.Symbol("u", real=True)
        # s(u) = 1 - s(1 - u): the reflected form keeps the end point exact as well
        return sp.Piecewise(
            (start + (end - start) * s.subs(sym, u), u <= sp.Rational(1, 2)),
            (end - (end - start) * s.subs(sym, 1 - u), True),
        )

    @cached_property
    def _derivative_cache(self) -> dict:
        return {}

    def _coefficients(self, order: int) -> Callable:
        cache = self._derivative_cache
        if order not in cache:
            t = self._time_symbol
            exprs = [sp.diff(c.subs(self.family.theta, self._theta_expr), t, order)
                     for c in self.family.coefficients]
            cache[order] = sp.lambdify(t, exprs, "numpy")
        return cache[order]

    def theta(self, t: float) -> float:
        return float(self._theta_expr.subs(self._time_symbol, t))

    def chemical_potential(self, t: float) -> float:
        return float(self.mu(t)) if callable(self.mu) else float(self.mu)

    def derivative(self, t: float, order: int = 1) -> np.ndarray:
        """``d^order H / dt^order`` at ``t`` (``order = 0`` gives ``H(t)``)."""
        comps = self._components
        coeffs = np.atleast_1d(np.asarray(self._coefficients(order)(t), dtype=float))
        out = comps[0].copy() if order == 0 else np.zeros_like(comps[0])
        for c, M in zip(coeffs, comps[1:]):
            out = out + c * M
        return out

    def hamiltonian(self, t: float) -> np.ndarray:
        return self.derivative(t, 0)

    def operator(self, t: float) -> OperatorRep:
        return OperatorRep(self.hamiltonian(t), self.lattice, self.field, hermitian=True)

    def endpoint_flatness(self, order: int) -> float:
        """Largest ``||d^n H / dt^n||`` over ``n = 1..order`` at ``t = 0`` and ``t = horizon``."""
        vals = [np.abs(self.derivative(t, n)).max() for n in range(1, order + 1) for t in (0.0, self.horizon)]
        return max(vals, default=0.0)

    def ground_state(self, t: float) -> "InstantaneousProjection":
        return InstantaneousProjection.at(self, t)

    def min_gap(self, times) -> float:
        """Smallest distance of the spectrum to the chemical potential over ``times``."""
        out = np.inf
        for t in times:
            E = np.linalg.eigvalsh(self.hamiltonian(t))
            out = min(out, np.abs(E - self.chemical_potential(t)).min())
        return float(out)


@dataclass(frozen=True)
class InstantaneousProjection:
    """Eigen-data of ``H(t)`` with the Fermi projection ``P0(t)`` onto energies below ``mu(t)``."""

    energies: np.ndarray
    vectors: np.ndarray
    inside: np.ndarray

    @classmethod
    def at(cls, path: TimePath, t: float, min_gap: float = 1e-8) -> "InstantaneousProjection":
        E, V = np.linalg.eigh(path.hamiltonian(t))
        mu = path.chemical_potential(t)
        if np.abs(E - mu).min() < min_gap:
            raise GaplessError(f"spectrum touches mu = {mu} at t = {t}")
        return cls(E, V, E < mu)

    @property
    def projection(self) -> np.ndarray:
        V = self.vectors[:, self.inside]
        return V @ V.conj().T

    def off_diagonal_solve(self, X: np.ndarray) -> np.ndarray:
        """The ``Y`` with ``[H, Y] = X`` on the inside/outside blocks and zero diagonal blocks."""
        Xe = self.vectors.conj().T @ X @ self.vectors
        mixed = self.inside[:, None] != self.inside[None, :]
        dE = self.energies[:, None] - self.energies[None, :]
        Ye = np.where(mixed, Xe / np.where(mixed, dE, 1.0), 0.0)
        return self.vectors @ Ye @ self.vectors.conj().T

    def derivative(self, H_dot: np.ndarray) -> np.ndarray:
        """``dP0/dt`` from ``dH/dt`` via the resolvent formula (residues on mixed pairs)."""
        return self.off_diagonal_solve(self.projection @ H_dot - H_dot @ self.projection)


# ------------------------------------------------------------------ evolution


@dataclass(frozen=True, eq=False)
class EvolvedState:
    times: np.ndarray
    states: np.ndarray
    unitary: np.ndarray
    lattice: LatticeSpec
    field: MagneticField

    def state(self, i: int) -> OperatorRep:
        return OperatorRep(self.states[i], self.lattice, self.field)


def _norm(A: np.ndarray) -> float:
    return float(np.linalg.norm(A, 2))


def _step_unitary(path: TimePath, t: float, dt: float, eps: float, order: int) -> np.ndarray:
    if order == 2:
        gen = path.hamiltonian(t + 0.5 * dt) * dt / eps
    else:
        c = np.sqrt(3) / 6
        H1 = path.hamiltonian(t + (0.5 - c) * dt)
        H2 = path.hamiltonian(t + (0.5 + c) * dt)
        # i Omega for Omega = dt/2 (A1 + A2) + sqrt(3) dt^2 / 12 [A2, A1], A = -i H / eps
        gen = 0.5 * dt / eps * (H1 + H2) - 1j * np.sqrt(3) * dt**2 / (12 * eps**2) * (H2 @ H1 - H1 @ H2)
        gen = 0.5 * (gen + gen.conj().T)
    w, V = np.linalg.eigh(gen)
    return (V * np.exp(-1j * w)) @ V.conj().T


def _substeps(path: TimePath, t_grid: np.ndarray, eps: float, c_step: float) -> np.ndarray:
    hnorm = max(_norm(path.hamiltonian(t)) for t in np.linspace(t_grid[0], t_grid[-1], 9))
    dt_max = c_step * eps / max(hnorm, 1e-12)
    return np.maximum(1, np.ceil(np.diff(t_grid) / dt_max).astype(int))


def propagate(path: TimePath, eps: float, t_grid, c_step: float = 0.05, order: int = 4) -> Iterator[tuple[float, np.ndarray]]:
    """Yield ``(t, U(t))`` on ``t_grid`` for ``eps dU/dt = -i H(t) U`` with ``U(t_grid[0]) = 1``.

    Each grid interval is split into equal Magnus steps of length at most ``c_step eps / ||H||``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if order not in (2, 4):
        raise ValueError("Magnus order must be 2 or 4")
    t_grid = np.asarray(t_grid, float)
    U = np.eye(path.hamiltonian(t_grid[0]).shape[0], dtype=complex)
    yield float(t_grid[0]), U
    for (a, b), n in zip(zip(t_grid[:-1], t_grid[1:]), _substeps(path, t_grid, eps, c_step)):
        dt = (b - a) / n
        for k in range(n):
            U = _step_unitary(path, a + k * dt, dt, eps, order) @ U
        yield float(b), U


def evolve_liouville(path: TimePath, rho0: OperatorRep | np.ndarray, eps: float, t_grid,
                     c_step: float = 0.05, order: int = 4, tol: float = 1e-8) -> EvolvedState:
    """Solve ``eps d rho/dt = i [rho, H(t)]`` as ``rho(t) = U rho0 U^*``."""
    R0 = rho0.matrix if isinstance(rho0, OperatorRep) else np.asarray(rho0)
    times, states = [], []
    U = None
    for t, U in propagate(path, eps, t_grid, c_step, order):
        times.append(t)
        states.append(U @ R0 @ U.conj().T)
    states = np.array(states)
    # unitary steps keep projections exact up to roundoff, so this only guards accumulation
    if np.abs(R0 @ R0 - R0).max() < 1e-10:
        drift = max(np.abs(r @ r - r).max() for r in states)
        if drift > tol:
            raise RefinementError(f"projection drift {drift:.3g} exceeds {tol:.1g}; reduce c_step")
    return EvolvedState(np.array(times), states, U, path.lattice, path.field)


# --------------------------------------------------------------- polarization


def _grad_matrices(path: TimePath) -> list[np.ndarray]:
    lat = path.lattice
    return [1j * displacement(lat, k, wrapped=lat.periodic[k]) for k in range(lat.dimension)]


def _wtrace(window: TraceWindow, A: np.ndarray, B: np.ndarray) -> complex:
    r = window.rows
    return complex(np.einsum("ij,ji->", A[r, :], B[:, r]) / window.n_cells)


def _open_window(path: TimePath, window: TraceWindow | None) -> TraceWindow:
    return window or TraceWindow.central(path.lattice)


@dataclass(frozen=True)
class PolarizationResult:
    """Pumped polarization per axis, with the largest current-identity residual along the way."""

    value: np.ndarray
    identity_residual: float
    imag: float


def polarization_dynamic(path: TimePath, eps: float, rho0: np.ndarray | None = None,
                         window: TraceWindow | None = None, c_step: float = 0.05,
                         samples_per_eps: int = 40, identity_tol: float = 1e-6) -> PolarizationResult:
    """``(1/eps) int_0^T T(rho(t) grad H(t)) dt`` along the Liouville trajectory.

    The current is compared at every sample with ``i eps T(rho [d_t rho, grad rho])``,
    where ``d_t rho = (i/eps)[rho, H]``; the largest deviation is returned and must stay
    below ``identity_tol``.
    """
    window = _open_window(path, window)
    if rho0 is None:
        rho0 = path.ground_state(0.0).projection
    n = int(np.ceil(samples_per_eps * path.horizon / eps))
    n += n % 2
    t_grid = np.linspace(0.0, path.horizon, n + 1)
    D = _grad_matrices(path)
    currents = np.zeros((len(t_grid), len(D)), dtype=complex)
    residual = 0.0
    for i, (t, U) in enumerate(propagate(path, eps, t_grid, c_step)):
        rho = U @ rho0 @ U.conj().T
        H = path.hamiltonian(t)
        rho_dot = (1j / eps) * (rho @ H - H @ rho)
        for k, Dk in enumerate(D):
            j = _wtrace(window, rho, Dk * H)
            gr = Dk * rho
            alt = 1j * eps * _wtrace(window, rho, rho_dot @ gr - gr @ rho_dot)
            residual = max(residual, abs(j - alt))
            currents[i, k] = j
    if residual > identity_tol:
        raise RuntimeError(f"current identity violated by {residual:.3g}")
    total = simpson(currents, x=t_grid, axis=0) / eps
    return PolarizationResult(total.real, residual, float(np.abs(total.imag).max()))


def _kv_integrand(path: TimePath, t: float, window: TraceWindow, D: list[np.ndarray]) -> np.ndarray:
    inst = path.ground_state(t)
    P = inst.projection
    P_dot = inst.derivative(path.derivative(t, 1))
    out = np.zeros(len(D), dtype=complex)
    for k, Dk in enumerate(D):
        gr = Dk * P
        out[k] = 1j * _wtrace(window, P, P_dot @ gr - gr @ P_dot)
    return out


def polarization_kv(path: TimePath, n_t: int = 256, window: TraceWindow | None = None) -> np.ndarray:
    """``i int_0^T T(P0 [d_t P0, grad P0]) dt`` with ``d_t P0`` from the analytic ``dH/dt``.

    Trapezoid rule on a closed loop (spectrally accurate), Simpson otherwise.
    """
    window = _open_window(path, window)
    D = _grad_matrices(path)
    n_t += n_t % 2
    ts = np.linspace(0.0, path.horizon, n_t + 1)
    vals = np.array([_kv_integrand(path, t, window, D) for t in ts])
    if path.periodic:
        total = vals[:-1].sum(axis=0) * (ts[1] - ts[0])
    else:
        total = simpson(vals, x=ts, axis=0)
    return total.real


def pump_chern(projections: np.ndarray, horizon: float, lattice: LatticeSpec,
               window: TraceWindow | None = None) -> np.ndarray:
    """Pump Chern number ``i int_0^T T(P [d_t P, grad P]) dt`` from samples of a periodic loop.

    ``projections[k]`` is ``P0(k T / n)`` for ``k = 0..n-1`` (the endpoint is not repeated);
    the time derivative is taken spectrally by FFT, so the loop must close smoothly.
    """
    P = np.asarray(projections)
    n = P.shape[0]
    if n < 4:
        raise ValueError("need at least four samples on the loop")
    window = window or TraceWindow.central(lattice)
    freqs = 2j * np.pi * np.fft.fftfreq(n, d=horizon / n)
    P_dot = np.fft.ifft(freqs[:, None, None] * np.fft.fft(P, axis=0), axis=0)
    D = [1j * displacement(lattice, k, wrapped=lattice.periodic[k]) for k in range(lattice.dimension)]
    out = np.zeros(len(D))
    for k, Dk in enumerate(D):
        acc = 0.0
        for Pt, Pd in zip(P, P_dot):
            gr = Dk * Pt
            acc += 1j * _wtrace(window, Pt, Pd @ gr - gr @ Pd)
        out[k] = (acc * horizon / n).real
    return out


def loop_projections(path: TimePath, n: int = 128) -> np.ndarray:
    """Fermi projections at ``n`` equispaced times on a closed path (endpoint excluded)."""
    if not path.periodic:
        raise ValueError("pump Chern numbers need a closed loop")
    return np.array([path.ground_state(t).projection for t in np.arange(n) * path.horizon / n])


# ------------------------------------------------------------- superadiabatic


def chebyshev_nodes(n: int, horizon: float) -> np.ndarray:
    """Chebyshev-Gauss-Lobatto points on ``[0, horizon]`` in increasing order."""
    return 0.5 * horizon * (1 - np.cos(np.pi * np.arange(n + 1) / n))


def chebyshev_diff_matrix(n: int, horizon: float) -> np.ndarray:
    """Differentiation matrix on :func:`chebyshev_nodes` (exact for polynomials of degree <= n)."""
    x = np.cos(np.pi * np.arange(n + 1) / n)
    c = np.ones(n + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(n + 1)
    dX = x[:, None] - x[None, :]
    Dm = np.outer(c, 1 / c) / (dX + np.eye(n + 1))
    Dm -= np.diag(Dm.sum(axis=1))
    # nodes were reversed (t increases as x decreases) and rescaled from [-1, 1]
    return -Dm * 2 / horizon


def _spectral_derivative(Dm: np.ndarray, values: np.ndarray) -> np.ndarray:
    return np.tensordot(Dm, values, axes=(1, 0))


@dataclass(frozen=True, eq=False)
class SuperadiabaticSeries:
    """Coefficients ``P_n`` of the superadiabatic expansion sampled on Chebyshev nodes.

    ``coefficients[n]`` has shape ``(nodes, dim, dim)``; ``aux[m]`` holds ``G_{m+1}`` for
    ``m = 0..N`` and ``derivs[m]`` the time derivative of ``P_m``.
    """

    order: int
    eps: float
    times: np.ndarray
    hamiltonians: np.ndarray
    coefficients: list[np.ndarray]
    derivs: list[np.ndarray]
    aux: list[np.ndarray]
    assembled: np.ndarray
    projected: np.ndarray
    diff_matrix: np.ndarray

    @property
    def p0(self) -> np.ndarray:
        return self.coefficients[0]

    def interpolate(self, values: np.ndarray, t) -> np.ndarray:
        """Barycentric interpolation of node data to times ``t``."""
        from scipy.interpolate import BarycentricInterpolator

        shape = values.shape[1:]
        interp = BarycentricInterpolator(self.times, values.reshape(len(self.times), -1))
        return interp(np.atleast_1d(t)).reshape((-1,) + shape)

    def projection_at(self, t) -> np.ndarray:
        return self.interpolate(self.projected, t)


def _partial_sum(coeffs: list[np.ndarray], eps: float, m: int) -> np.ndarray:
    return sum(eps**n * coeffs[n] for n in range(m + 1))


def _aux(coeffs: list[np.ndarray], m: int) -> np.ndarray:
    # G_{m+1} = sum_{n=1}^{m} P_n P_{m+1-n}
    G = np.zeros_like(coeffs[0])
    for n in range(1, m + 1):
        G = G + coeffs[n] @ coeffs[m + 1 - n]
    return G


def superadiabatic_construct(path: TimePath, order: int, eps: float, nodes: int = 96) -> SuperadiabaticSeries:
    """Build ``P_0..P_N`` by the order-by-order recursion and project the truncated sum.

    Diagonal blocks of ``P_{m+1}`` come from ``G_{m+1}``; off-diagonal blocks solve
    ``[H, P_{m+1}] = i dP_m/dt``.  ``dP_0/dt`` is analytic, higher derivatives are spectral.
    """
    if order < 0:
        raise ValueError("order must be >= 0")
    ts = chebyshev_nodes(nodes, path.horizon)
    Dm = chebyshev_diff_matrix(nodes, path.horizon)
    inst = [path.ground_state(t) for t in ts]
    Hs = np.array([path.hamiltonian(t) for t in ts])
    P0 = np.array([s.projection for s in inst])
    coeffs = [P0]
    derivs = [np.array([s.derivative(path.derivative(t, 1)) for s, t in zip(inst, ts)])]
    aux = []
    for m in range(order):
        G = _aux(coeffs, m)
        nxt = np.empty_like(P0)
        for k, s in enumerate(inst):
            P = P0[k]
            Q = np.eye(len(P)) - P
            nxt[k] = Q @ G[k] @ Q - P @ G[k] @ P + s.off_diagonal_solve(1j * derivs[m][k])
        aux.append(G)
        coeffs.append(nxt)
        derivs.append(_spectral_derivative(Dm, nxt))
    aux.append(_aux(coeffs, order))
    assembled = _partial_sum(coeffs, eps, order)
    projected = np.empty_like(assembled)
    for k, A in enumerate(assembled):
        A = 0.5 * (A + A.conj().T)
        w, V = np.linalg.eigh(A)
        if np.any((w > 0.25) & (w < 0.75)) or np.any(w < -0.25) or np.any(w > 1.25):
            raise ValueError(f"eps = {eps} too large: truncated series is not close to a projection at t = {ts[k]:.4g}")
        Vin = V[:, w > 0.5]
        projected[k] = Vin @ Vin.conj().T
    return SuperadiabaticSeries(order, eps, ts, Hs, coeffs, derivs, aux, assembled, projected, Dm)


@dataclass(frozen=True)
class IdentityResiduals:
    """Largest residuals of the exact order-by-order identities of the construction."""

    commutes_with_p0: float
    diagonal_blocks: float
    off_diagonal: float
    eom: float
    idempotent: float


def construction_residuals(series: SuperadiabaticSeries) -> IdentityResiduals:
    """``[P0, G_{m+1}] = 0``; ``P0 dP_m P0 = i P0 [H, G_{m+1}] P0`` (and the complement);
    ``G_{m+1} + P0 P_{m+1} + P_{m+1} P0 = P_{m+1}``; ``i dP_m - [H, P_{m+1}] = 0``;
    and the equation of motion ``[i eps d_t - H, P~_m] = i eps^{m+1} dP_m``."""
    P0, H, eps = series.p0, series.hamiltonians, series.eps
    I = np.eye(P0.shape[-1])
    Q0 = I - P0
    c1 = c2 = c59 = c61 = c56 = 0.0
    for m in range(series.order):
        G = series.aux[m]
        Pm_dot = series.derivs[m]
        Pn = series.coefficients[m + 1]
        comm_HG = H @ G - G @ H
        c1 = max(c1, np.abs(P0 @ G - G @ P0).max())
        c2 = max(c2, np.abs(P0 @ Pm_dot @ P0 - 1j * P0 @ comm_HG @ P0).max(),
                 np.abs(Q0 @ Pm_dot @ Q0 + 1j * Q0 @ comm_HG @ Q0).max())
        c59 = max(c59, np.abs(G + P0 @ Pn + Pn @ P0 - Pn).max())
        c61 = max(c61, np.abs(1j * Pm_dot - (H @ Pn - Pn @ H)).max())
    for m in range(series.order + 1):
        Pt = _partial_sum(series.coefficients, eps, m)
        Pt_dot = _partial_sum(series.derivs, eps, m)
        lhs = 1j * eps * Pt_dot - (H @ Pt - Pt @ H)
        c56 = max(c56, np.abs(lhs - 1j * eps ** (m + 1) * series.derivs[m]).max())
    P = series.projected
    idem = float(np.abs(P @ P - P).max())
    return IdentityResiduals(float(c1), float(c2), float(max(c59, c61)), float(c56), idem)


@dataclass(frozen=True)
class ScalingReport:
    """Per-eps norms and their fitted log-log slopes."""

    order: int
    eps: np.ndarray
    distance_to_p0: np.ndarray
    eom_residual: np.ndarray
    tracking_error: np.ndarray
    idempotency_defect: np.ndarray

    @staticmethod
    def slope(eps, values) -> float:
        return float(np.polyfit(np.log(eps), np.log(values), 1)[0])

    @property
    def slopes(self) -> dict:
        out = {"distance_to_p0": self.slope(self.eps, self.distance_to_p0),
               "eom_residual": self.slope(self.eps, self.eom_residual),
               "tracking_error": self.slope(self.eps, self.tracking_error)}
        if np.all(self.idempotency_defect > 0):
            out["idempotency_defect"] = self.slope(self.eps, self.idempotency_defect)
        return out

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("epsilon,N,norm_53,norm_54,norm_cor5\n")
            for row in zip(self.eps, self.distance_to_p0, self.eom_residual, self.tracking_error):
                fh.write(f"{float(row[0])!r},{self.order},{float(row[1])!r},{float(row[2])!r},{float(row[3])!r}\n")


def superadiabatic_verify(path: TimePath, order: int, eps_list, nodes: int = 96,
                          n_track: int = 41, c_step: float = 0.01) -> ScalingReport:
    """Measure the three scaling laws of the superadiabatic projections over ``eps_list``.

    ``distance_to_p0`` is ``max_t ||P_N - P0||``, ``eom_residual`` is
    ``max_t ||[i eps d_t - H, P_N]||`` and ``tracking_error`` is ``max_t ||rho(t) - P_N(t)||``
    for the Liouville solution started at ``P_N(0)``.  Operator norms throughout.
    """
    eps_arr = np.asarray(sorted(eps_list, reverse=True), float)
    d53, d54, dcor, didem = [], [], [], []
    for eps in eps_arr:
        s = superadiabatic_construct(path, order, eps, nodes)
        PN = s.projected
        PN_dot = _spectral_derivative(s.diff_matrix, PN)
        H = s.hamiltonians
        d53.append(max(_norm(a - b) for a, b in zip(PN, s.p0)))
        d54.append(max(_norm(1j * eps * pd - (h @ p - p @ h)) for pd, h, p in zip(PN_dot, H, PN)))
        A = s.assembled
        didem.append(max(_norm(a @ a - a) for a in A))
        t_track = np.linspace(0.0, path.horizon, n_track)
        evo = evolve_liouville(path, PN[0], eps, t_track, c_step=c_step)
        targets = s.projection_at(t_track)
        dcor.append(max(_norm(r - p) for r, p in zip(evo.states, targets)))
    return ScalingReport(order, eps_arr, np.array(d53), np.array(d54), np.array(dcor), np.array(didem))
