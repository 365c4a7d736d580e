"""Equilibrium observables: Chern numbers, magnetization routes, Streda, DOS and friends."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as npoly

from .algebra import (
    GaplessError,
    SpectralDecomposition,
    TraceWindow,
    abs_shift,
    fermi,
    fermi_projection,
    field_pair,
    grad,
    local_density,
    log_partition,
    trace_product,
)
from .lattice import HoppingKernel, MagneticField, OperatorRep


@dataclass(frozen=True)
class Estimate:
    """A windowed real number with its diagnostics.

    ``imag`` is the discarded imaginary part and ``sensitivity`` the change when the
    window margin grows by two cells.
    """

    value: float
    imag: float = 0.0
    sensitivity: float = 0.0

    def __float__(self) -> float:
        return self.value


def _windowed(window: TraceWindow, density: np.ndarray, scale: complex = 1.0) -> tuple[complex, complex]:
    """Mean of a per-cell density on ``window`` and on the window shrunk by two cells."""
    inner = window.shrunk(2).site_mask[window.site_mask]
    total = scale * density.mean()
    return total, scale * density[inner].mean() - total


def _check_projection(P: OperatorRep, tol: float = 1e-8) -> None:
    M = P.matrix
    if np.abs(M @ M - M).max() > tol:
        raise ValueError("operator is not a projection")


def _require_open(lattice, axes) -> None:
    for a in axes:
        if lattice.periodic[a]:
            raise ValueError(f"axis {a} is periodic; position derivatives need open boundaries")


def chern_number(P: OperatorRep, window: TraceWindow | None = None, component: int = 3) -> Estimate:
    """``2 pi i T(P [grad_a P, grad_b P])`` with ``(a, b)`` the axes paired with ``component``."""
    a, b = field_pair(component)
    _require_open(P.lattice, (a, b))
    _check_projection(P)
    window = window or TraceWindow.central(P.lattice)
    ga, gb = grad(P, a).matrix, grad(P, b).matrix
    dens = local_density(window, P, ga, gb) - local_density(window, P, gb, ga)
    val, sens = _windowed(window, dens, 2j * np.pi)
    return Estimate(val.real, val.imag, sens.real)


# ---------------------------------------------------------------- kernels g


def _logistic_polys(order: int) -> list[np.ndarray]:
    # derivatives of s(x) = 1/(1+e^x) as polynomials in s, using s' = s^2 - s
    polys = [np.array([0.0, 1.0])]
    ds = np.array([0.0, -1.0, 1.0])
    for _ in range(order):
        polys.append(npoly.polymul(npoly.polyder(polys[-1]), ds))
    return polys


_LOGISTIC = _logistic_polys(5)


def _logistic_derivative(x, k: int):
    return npoly.polyval(fermi(x, 1.0, 0.0), _LOGISTIC[k])


def _softplus_neg(x):
    """``Phi(x) = -ln(1 + e^{-x})`` split as ``min(x, 0) - log1p(e^{-|x|})``."""
    return np.minimum(x, 0.0), np.log1p(np.exp(-np.abs(x)))


_SERIES_X = 1e-2


def _ghat(x, xp, dx, F, dF, d3F, d5F):
    # [dx (F'(x) + F'(x')) - 2 (F(x') - F(x))] / (2 dx^2) with a midpoint series near dx = 0
    out = np.empty(np.shape(dx))
    near = np.abs(dx) < _SERIES_X
    far = ~near
    c = 0.5 * (x + xp)
    out[near] = d3F(c[near]) * dx[near] / 12 + d5F(c[near]) * dx[near] ** 3 / 480
    d = dx[far]
    out[far] = (d * (dF(x[far]) + dF(xp[far])) - 2 * F(x[far], xp[far], d)) / (2 * d * d)
    return out


def _delta_phi(x, xp, dx):
    lin_x, log_x = _softplus_neg(x)
    lin_p, log_p = _softplus_neg(xp)
    lin = np.where((x <= 0) & (xp <= 0), dx, lin_p - lin_x)
    return lin - (log_p - log_x)


def g_kernel(E, Ep, beta: float, mu: float):
    """Finite-temperature magnetization kernel, antisymmetric and vanishing on the diagonal.

    ``g(E, E') = (f(E) + f(E')) / (2 (E' - E)) + (L(E') - L(E)) / (beta (E' - E)^2)`` with
    ``L(E) = ln(1 + exp(-beta (E - mu)))``.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    if np.isinf(beta):
        return g_kernel_inf(E, Ep, mu)
    E, Ep = np.broadcast_arrays(np.asarray(E, float), np.asarray(Ep, float))
    x, xp = beta * (E - mu), beta * (Ep - mu)
    dx = beta * (Ep - E)
    out = _ghat(
        x, xp, dx,
        _delta_phi,
        lambda y: fermi(y, 1.0, 0.0),
        lambda y: _logistic_derivative(y, 2),
        lambda y: _logistic_derivative(y, 4),
    )
    return beta * out


def g_kernel_inf(E, Ep, mu: float):
    """Zero-temperature limit ``(E + E' - 2 mu)(chi(E - mu) - chi(E' - mu)) / (2 (E' - E)^2)``."""
    E, Ep = np.broadcast_arrays(np.asarray(E, float), np.asarray(Ep, float))
    chi = (E <= mu).astype(float) - (Ep <= mu).astype(float)
    out = np.zeros(E.shape)
    nz = chi != 0
    out[nz] = (E[nz] + Ep[nz] - 2 * mu) * chi[nz] / (2 * (Ep[nz] - E[nz]) ** 2)
    return out


def g_kernel_dmu(E, Ep, beta: float, mu: float):
    """``d g / d mu = (f(E') - f(E)) / (E' - E)^2 - (f'(E) + f'(E')) / (2 (E' - E))``, ``f' = df/dE``."""
    E, Ep = np.broadcast_arrays(np.asarray(E, float), np.asarray(Ep, float))
    x, xp = beta * (E - mu), beta * (Ep - mu)
    dx = beta * (Ep - E)
    out = _ghat(
        x, xp, dx,
        lambda a, b, d: fermi(b, 1.0, 0.0) - fermi(a, 1.0, 0.0),
        lambda y: _logistic_derivative(y, 1),
        lambda y: _logistic_derivative(y, 3),
        lambda y: _logistic_derivative(y, 5),
    )
    return -beta * beta * out


# ------------------------------------------------------- current-current measure


@dataclass(frozen=True, eq=False)
class CCMeasure:
    """Binned current-current correlation measure.

    ``weights[i, j, b, b']`` is the windowed trace of ``P_b grad_i H P_b' grad_j H``.
    When built with ``exact=True`` the unbinned eigenpair weights of every pair are kept in
    ``pair_weights`` and integrals use exact eigenvalues.
    """

    edges: np.ndarray
    weights: np.ndarray
    energies: np.ndarray
    pair_weights: dict
    bin_index: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def trace_part(self) -> np.ndarray:
        return np.einsum("jjab->ab", self.weights)

    @property
    def total_mass(self) -> complex:
        return complex(self.trace_part.sum())

    def integrate(self, kernel: Callable, i: int, j: int) -> complex:
        """``sum m_{ij}(E, E') kernel(E, E')``, eigenpair-exact when available."""
        if (i, j) in self.pair_weights:
            E = self.energies
            return complex(np.sum(kernel(E[:, None], E[None, :]) * self.pair_weights[(i, j)]))
        c = self.centers
        return complex(np.sum(kernel(c[:, None], c[None, :]) * self.weights[i, j]))

    def to_csv(self, path, i: int = 0, j: int = 0) -> None:
        c = self.centers
        rows = ["E,Ep,re,im"]
        for a in range(len(c)):
            for b in range(len(c)):
                w = self.weights[i, j, a, b]
                if w != 0:
                    rows.append(f"{float(c[a])!r},{float(c[b])!r},{float(w.real)!r},{float(w.imag)!r}")
        with open(path, "w") as fh:
            fh.write("\n".join(rows) + "\n")


def default_bins(S: SpectralDecomposition, n_bins: int = 200) -> np.ndarray:
    lo, hi = S.energies[0], S.energies[-1]
    pad = 1e-9 * max(1.0, hi - lo)
    if hi - lo < 1e-12:
        return np.array([lo - 0.5, hi + 0.5])
    return np.linspace(lo - pad, hi + pad, n_bins + 1)


def current_current_measure(
    S: SpectralDecomposition,
    window: TraceWindow | None = None,
    bins: np.ndarray | int = 200,
    grads: list[OperatorRep] | None = None,
    exact: bool = True,
) -> CCMeasure:
    lattice = S.lattice
    window = window or TraceWindow.central(lattice)
    d = lattice.dimension
    if grads is None:
        grads = [grad(S.source, k) for k in range(d)]
    edges = default_bins(S, bins) if np.isscalar(bins) else np.asarray(bins, float)
    if S.energies[0] < edges[0] or S.energies[-1] > edges[-1]:
        raise ValueError("bins do not cover the spectrum")
    idx = np.clip(np.searchsorted(edges, S.energies, side="right") - 1, 0, len(edges) - 2)
    nb = len(edges) - 1
    V = S.vectors
    Vw = V[window.rows, :]
    G = [S.in_eigenbasis(g) for g in grads]
    # Y_j[b, a] = sum_{n in window} <b|grad_j H|n><n|a>
    Y = [V.conj().T @ g.matrix[:, window.rows] @ Vw for g in grads]
    onehot = np.zeros((len(S.energies), nb))
    onehot[np.arange(len(S.energies)), idx] = 1.0
    weights = np.zeros((d, d, nb, nb), dtype=complex)
    exact_weights = {}
    for i in range(d):
        for j in range(d):
            W = G[i] * Y[j].T / window.n_cells
            weights[i, j] = onehot.T @ W @ onehot
            if exact:
                exact_weights[(i, j)] = W
    return CCMeasure(edges, weights, S.energies.copy(), exact_weights, idx)


def magnetization_ccm(ccm: CCMeasure, beta: float, mu: float, component: int = 3) -> Estimate:
    """``i sum m_{j+1, j+2}(E, E') g_beta(E, E')``."""
    a, b = field_pair(component)
    val = 1j * ccm.integrate(lambda E, Ep: g_kernel(E, Ep, beta, mu), a, b)
    return Estimate(val.real, val.imag)


def dmu_magnetization_ccm(ccm: CCMeasure, beta: float, mu: float, component: int = 3) -> Estimate:
    """Chemical-potential derivative of :func:`magnetization_ccm` through the kernel."""
    a, b = field_pair(component)
    val = 1j * ccm.integrate(lambda E, Ep: g_kernel_dmu(E, Ep, beta, mu), a, b)
    return Estimate(val.real, val.imag)


def magnetization_T0(S: SpectralDecomposition, mu: float, window: TraceWindow | None = None,
                     component: int = 3, check: bool = True) -> Estimate:
    """``-(i/2) T(|mu - H| [grad P, grad P])`` for the Fermi projection ``P`` at ``mu``."""
    a, b = field_pair(component)
    _require_open(S.lattice, (a, b))
    window = window or TraceWindow.central(S.lattice)
    P = fermi_projection(S, mu)
    ga, gb = grad(P, a).matrix, grad(P, b).matrix
    A = abs_shift(S, mu).matrix
    dens = local_density(window, A, ga, gb) - local_density(window, A, gb, ga)
    val, sens = _windowed(window, dens, -0.5j)
    if check:
        # (mu - H)(1 - 2P) equals |mu - H| as a function of H
        B = S.operator((mu - S.energies) * (1 - 2 * (S.energies < mu))).matrix
        alt = 0.5j * (trace_product(window, B, ga, gb) - trace_product(window, B, gb, ga))
        if abs(alt - val) > 1e-10 * max(1.0, abs(val)):
            raise RuntimeError(f"equivalent zero-temperature forms disagree: {val} vs {alt}")
    return Estimate(val.real, val.imag, sens.real)


# ---------------------------------------------------------------- Bloch route


@dataclass(frozen=True, eq=False)
class BlochBandData:
    """Band data on the grid ``k = 2 pi m / nk``; arrays are indexed ``[k..., band, ...]``."""

    kernel: HoppingKernel
    kgrid: np.ndarray
    energies: np.ndarray
    projectors: np.ndarray
    omega: np.ndarray
    rw: np.ndarray

    @property
    def n_bands(self) -> int:
        return self.energies.shape[-1]

    def band_chern(self, component: int = 3) -> np.ndarray:
        """``(1/2 pi) int Omega d^2k`` per band, averaged over any remaining k-axes."""
        a, b = field_pair(component)
        axes = tuple(range(self.kgrid.shape[-1]))
        return 2 * np.pi * self.omega[..., a, b].mean(axis=axes)


def _band_projectors(Hk: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    E, V = np.linalg.eigh(Hk)
    P = np.einsum("...il,...jl->...lij", V, V.conj())
    return E, P


def bloch_bands(kernel: HoppingKernel, nk: int = 48, dk: float = 1e-4, min_gap: float = 1e-6) -> BlochBandData:
    """Band energies, projectors, Berry curvature and the Rammal-Wilkinson tensor."""
    d = kernel.dimension
    axes = [2 * np.pi * np.arange(nk) / nk] * d
    K = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    Hk = kernel.bloch(K)
    E, P = _band_projectors(Hk)
    if E.shape[-1] > 1:
        gaps = np.diff(E, axis=-1)
        if gaps.min() < min_gap:
            loc = np.unravel_index(np.argmin(gaps), gaps.shape)
            raise GaplessError(f"bands {loc[-1]} and {loc[-1] + 1} touch near k={K[loc[:-1]]}")
    dP = []
    for i in range(d):
        step = np.zeros(d)
        step[i] = dk
        _, Pp = _band_projectors(kernel.bloch(K + step))
        _, Pm = _band_projectors(kernel.bloch(K - step))
        dP.append((Pp - Pm) / (2 * dk))
    L = E.shape[-1]
    omega = np.zeros(E.shape + (d, d))
    rw = np.zeros(E.shape + (d, d))
    eye = np.eye(L)
    for i in range(d):
        for j in range(i + 1, d):
            comm = dP[i] @ dP[j] - dP[j] @ dP[i]
            om = 1j * np.einsum("...ij,...ji->...", P, comm)
            shifted = Hk[..., None, :, :] - E[..., :, None, None] * eye
            t1 = np.einsum("...ab,...bc,...cd,...de->...", P, dP[i], shifted, dP[j], optimize=True)
            t2 = np.einsum("...ab,...bc,...cd,...de->...", P, dP[j], shifted, dP[i], optimize=True)
            r = 0.5j * (t1 - t2)
            if max(np.abs(om.imag).max(), np.abs(r.imag).max()) > 1e-6:
                raise RuntimeError("band geometry is not real; projector derivatives inaccurate")
            omega[..., i, j], omega[..., j, i] = om.real, -om.real
            rw[..., i, j], rw[..., j, i] = r.real, -r.real
    return BlochBandData(kernel, K, E, P, omega, rw)


def magnetization_bloch(data: BlochBandData, beta: float, mu: float, component: int = 3) -> float:
    """Grid average of ``f(E_l) R^l - (1/beta) ln(1 + e^{-beta(E_l - mu)}) Omega^l`` summed over bands.

    The minus sign goes with ``Omega = i Tr(P [d P, d P])`` (positive integral for a Chern +1
    band); it is the sign that agrees with the trace and current-current routes.
    """
    a, b = field_pair(component)
    E = data.energies
    if np.isinf(beta):
        occ = (E < mu).astype(float)
        grand = np.maximum(mu - E, 0.0)
    else:
        occ = fermi(E, beta, mu)
        grand = log_partition(E, beta, mu) / beta
    integrand = occ * data.rw[..., a, b] - grand * data.omega[..., a, b]
    return float(integrand.sum(axis=-1).mean())


def magnetization_bloch_pairs(data: BlochBandData, beta: float, mu: float, component: int = 3) -> float:
    """Interband form ``i sum_{l != n} g(E_l, E_n) Tr(P_l d_a H P_n d_b H)`` averaged over k."""
    a, b = field_pair(component)
    dHa = data.kernel.bloch_derivative(data.kgrid, a)
    dHb = data.kernel.bloch_derivative(data.kgrid, b)
    E, P = data.energies, data.projectors
    total = 0.0
    L = data.n_bands
    for l in range(L):
        for n in range(L):
            if l == n:
                continue
            g = g_kernel(E[..., l], E[..., n], beta, mu)
            tr = np.einsum("...ij,...jk,...kl,...li->...", P[..., l, :, :], dHa, P[..., n, :, :], dHb, optimize=True)
            total = total + (g * tr).mean()
    val = 1j * total
    return float(np.real(val))


def plaquette_chern(kernel: HoppingKernel, bands, nk: int = 48, component: int = 3) -> float:
    """Lattice-gauge Chern number of a band set from link determinants on the k-grid.

    Normalized so that it agrees with ``(1/2 pi) int Omega``.
    """
    a, b = field_pair(component)
    d = kernel.dimension
    if d != 2:
        raise ValueError("plaquette oracle implemented for d = 2")
    ks = 2 * np.pi * np.arange(nk) / nk
    K = np.stack(np.meshgrid(ks, ks, indexing="ij"), axis=-1)
    _, V = np.linalg.eigh(kernel.bloch(K))
    V = V[..., list(bands)]

    def link(shift_axis):
        Vn = np.roll(V, -1, axis=shift_axis)
        return np.linalg.det(np.einsum("...ia,...ib->...ab", V.conj(), Vn))

    U1, U2 = link(a), link(b)
    flux = np.angle(U1 * np.roll(U2, -1, axis=a) / (np.roll(U1, -1, axis=b) * U2))
    return float(-flux.sum() / (2 * np.pi))


# -------------------------------------------------------- DOS and thermodynamics


@dataclass(frozen=True)
class DOSHistogram:
    edges: np.ndarray
    mass: np.ndarray

    @property
    def ids(self) -> np.ndarray:
        """Integrated density of states at the right edge of every bin."""
        return np.cumsum(self.mass)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("lo,hi,mass,ids\n")
            for lo, hi, m, c in zip(self.edges[:-1], self.edges[1:], self.mass, self.ids):
                fh.write(f"{float(lo)!r},{float(hi)!r},{float(m)!r},{float(c)!r}\n")


def _spectral_weights(S: SpectralDecomposition, window: TraceWindow) -> np.ndarray:
    V = S.vectors[window.rows, :]
    return (np.abs(V) ** 2).sum(axis=0) / window.n_cells


def dos(S: SpectralDecomposition, window: TraceWindow | None = None, bins: np.ndarray | int = 200) -> DOSHistogram:
    window = window or TraceWindow.central(S.lattice)
    edges = default_bins(S, bins) if np.isscalar(bins) else np.asarray(bins, float)
    mass, _ = np.histogram(S.energies, bins=edges, weights=_spectral_weights(S, window))
    return DOSHistogram(edges, mass)


def pressure(S: SpectralDecomposition, beta: float, mu: float, window: TraceWindow | None = None) -> float:
    window = window or TraceWindow.central(S.lattice)
    return float(np.dot(_spectral_weights(S, window), log_partition(S.energies, beta, mu)) / beta)


def particle_density(S: SpectralDecomposition, beta: float, mu: float, window: TraceWindow | None = None) -> float:
    window = window or TraceWindow.central(S.lattice)
    occ = (S.energies < mu).astype(float) if np.isinf(beta) else fermi(S.energies, beta, mu)
    return float(np.dot(_spectral_weights(S, window), occ))


def localization_length(ccm: CCMeasure, lo: float, hi: float) -> tuple[float, float]:
    """``2 sum m(b, b') / (E_b - E_b')^2`` over bins with ``E_b`` in ``[lo, hi]``.

    Returns the estimate with same-bin pairs excluded and a variant softened by the bin
    width, ``1 / (dE^2 + width^2)``.
    """
    c = ccm.centers
    width = np.diff(ccm.edges).mean()
    m = ccm.trace_part.real
    rows = (c >= lo) & (c <= hi)
    dE = c[:, None] - c[None, :]
    mask = rows[:, None] & (np.abs(dE) >= width * 0.5)
    excluded = 2 * np.sum(np.where(mask, m / np.where(mask, dE, 1.0) ** 2, 0.0))
    soft = 2 * np.sum(np.where(rows[:, None], m / (dE ** 2 + width ** 2), 0.0))
    return float(excluded), float(soft)


# ------------------------------------------------------------ field derivatives


@dataclass(frozen=True)
class StredaResult:
    lhs: float
    rhs: float

    @property
    def discrepancy(self) -> float:
        return abs(self.lhs - self.rhs)


def streda_check(
    family: Callable[[MagneticField], OperatorRep],
    field: MagneticField,
    mu: float,
    h: float = 1e-4,
    window: TraceWindow | None = None,
    component: int = 3,
) -> StredaResult:
    """Field derivative of the windowed density of states below ``mu`` versus ``-Ch / 2 pi``."""
    dens = []
    for s in (+1, -1):
        S = SpectralDecomposition.of(family(field.shifted(component, s * h)))
        S.check_gap(mu, tol=1e-9)
        window = window or TraceWindow.central(S.lattice)
        dens.append(particle_density(S, np.inf, mu, window))
    lhs = (dens[0] - dens[1]) / (2 * h)
    S = SpectralDecomposition.of(family(field))
    ch = chern_number(fermi_projection(S, mu), window, component)
    return StredaResult(lhs, -ch.value / (2 * np.pi))


@dataclass(frozen=True)
class MuDerivative:
    slope: float
    commutator: float


def dmu_magnetization(S: SpectralDecomposition, mu: float, dmu: float = 1e-3,
                      window: TraceWindow | None = None, component: int = 3) -> MuDerivative:
    """Central difference of the zero-temperature magnetization in ``mu`` (same gap required).

    ``commutator`` is ``i T(P [grad P, grad P])`` at ``mu``.
    """
    lo, hi = S.gap_at(mu)
    if not (lo < mu - dmu and mu + dmu < hi):
        raise GaplessError(f"mu +- dmu leaves the gap ({lo:.6g}, {hi:.6g})")
    window = window or TraceWindow.central(S.lattice)
    plus = magnetization_T0(S, mu + dmu, window, component, check=False).value
    minus = magnetization_T0(S, mu - dmu, window, component, check=False).value
    ch = chern_number(fermi_projection(S, mu), window, component).value
    return MuDerivative((plus - minus) / (2 * dmu), ch / (2 * np.pi))


def susceptibility_fd(
    family: Callable[[MagneticField], OperatorRep],
    field: MagneticField,
    beta: float,
    mu: float,
    h: float = 1e-3,
    window: TraceWindow | None = None,
    component: int = 3,
) -> float:
    """Central difference in ``B_component`` of the finite-temperature magnetization."""
    vals = []
    for s in (+1, -1):
        S = SpectralDecomposition.of(family(field.shifted(component, s * h)))
        ccm = current_current_measure(S, window or TraceWindow.central(S.lattice))
        vals.append(magnetization_ccm(ccm, beta, mu, component).value)
    return (vals[0] - vals[1]) / (2 * h)
