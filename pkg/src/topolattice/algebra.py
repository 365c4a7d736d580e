"""Trace per unit volume, derivations, functional calculus and field derivatives."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.linalg import expm
from scipy.special import expit

from .lattice import LatticeSpec, MagneticField, OperatorRep, dress_phase, strip_phase


class GaplessError(ValueError):
    """Raised when a chemical potential sits on the spectrum."""


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    energies: np.ndarray
    vectors: np.ndarray
    source: OperatorRep

    @classmethod
    def of(cls, H: OperatorRep) -> "SpectralDecomposition":
        E, V = np.linalg.eigh(H.matrix)
        return cls(E, V, H)

    @property
    def lattice(self) -> LatticeSpec:
        return self.source.lattice

    @property
    def field(self) -> MagneticField:
        return self.source.field

    @property
    def spectral_width(self) -> float:
        return float(self.energies[-1] - self.energies[0])

    @property
    def norm(self) -> float:
        return float(np.abs(self.energies).max())

    def operator(self, values: np.ndarray, hermitian: bool = True) -> OperatorRep:
        """``V diag(values) V^dagger``."""
        V = self.vectors
        return self.source.like((V * values) @ V.conj().T, hermitian and np.isrealobj(values))

    def in_eigenbasis(self, A: OperatorRep | np.ndarray) -> np.ndarray:
        mat = A.matrix if isinstance(A, OperatorRep) else A
        return self.vectors.conj().T @ mat @ self.vectors

    def gap_at(self, mu: float) -> tuple[float, float]:
        """Nearest eigenvalues below and above ``mu``."""
        i = np.searchsorted(self.energies, mu)
        lo = self.energies[i - 1] if i > 0 else -np.inf
        hi = self.energies[i] if i < len(self.energies) else np.inf
        return float(lo), float(hi)

    def check_gap(self, mu: float, tol: float = 1e-12) -> None:
        if np.min(np.abs(self.energies - mu)) <= tol:
            lo, hi = self.gap_at(mu)
            raise GaplessError(f"mu={mu} lies on the spectrum (neighbouring levels {lo:.6g}, {hi:.6g})")


def apply_function(S: SpectralDecomposition, f: Callable[[np.ndarray], np.ndarray]) -> OperatorRep:
    return S.operator(np.asarray(f(S.energies)))


def fermi(E, beta: float, mu: float):
    """Fermi-Dirac occupation ``1 / (1 + exp(beta (E - mu)))``, overflow-safe."""
    return expit(-beta * (np.asarray(E, dtype=float) - mu))


def log_partition(E, beta: float, mu: float):
    """``ln(1 + exp(-beta (E - mu)))``, overflow-safe."""
    x = -beta * (np.asarray(E, dtype=float) - mu)
    return np.logaddexp(0.0, x)


def fermi_projection(S: SpectralDecomposition, mu: float) -> OperatorRep:
    S.check_gap(mu)
    occ = S.vectors[:, S.energies < mu]
    return S.source.like(occ @ occ.conj().T, hermitian=True)


def fermi_dirac(S: SpectralDecomposition, beta: float, mu: float) -> OperatorRep:
    return S.operator(fermi(S.energies, beta, mu))


def abs_shift(S: SpectralDecomposition, mu: float) -> OperatorRep:
    return S.operator(np.abs(mu - S.energies))


def pressure_weight(S: SpectralDecomposition, beta: float, mu: float) -> OperatorRep:
    return S.operator(log_partition(S.energies, beta, mu))


@dataclass(frozen=True)
class TraceWindow:
    """Box ``ranges[k] = (lo, hi)`` (half-open) of cells averaged by the trace."""

    lattice: LatticeSpec
    ranges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        for (lo, hi), n in zip(self.ranges, self.lattice.extents):
            if not 0 <= lo < hi <= n:
                raise ValueError(f"empty or out-of-range window {self.ranges}")

    @classmethod
    def central(cls, lattice: LatticeSpec, margin: int | None = None) -> "TraceWindow":
        """Cells at least ``margin`` away from every open boundary (default: lattice margin)."""
        ranges = []
        for k, n in enumerate(lattice.extents):
            w = lattice.axis_margin(k) if margin is None or lattice.periodic[k] else margin
            ranges.append((w, n - w))
        return cls(lattice, tuple(ranges))

    @classmethod
    def full(cls, lattice: LatticeSpec) -> "TraceWindow":
        return cls(lattice, tuple((0, n) for n in lattice.extents))

    def shrunk(self, by: int = 2) -> "TraceWindow":
        """Window moved ``by`` cells further from every open boundary (for sensitivity checks)."""
        ranges = []
        for (lo, hi), per in zip(self.ranges, self.lattice.periodic):
            if per or hi - lo <= 2 * by:
                ranges.append((lo, hi))
            else:
                ranges.append((lo + by, hi - by))
        return TraceWindow(self.lattice, tuple(ranges))

    @property
    def n_cells(self) -> int:
        return int(np.prod([hi - lo for lo, hi in self.ranges]))

    @cached_property
    def site_mask(self) -> np.ndarray:
        c = self.lattice.coords
        mask = np.ones(len(c), dtype=bool)
        for k, (lo, hi) in enumerate(self.ranges):
            mask &= (c[:, k] >= lo) & (c[:, k] < hi)
        return mask

    @cached_property
    def rows(self) -> np.ndarray:
        return np.flatnonzero(np.repeat(self.site_mask, self.lattice.internal_dim))


def _mat(A) -> np.ndarray:
    return A.matrix if isinstance(A, OperatorRep) else np.asarray(A)


def trace_per_volume(A: OperatorRep | np.ndarray, window: TraceWindow) -> complex:
    """``(1/|window|) sum_{n in window} Tr <n|A|n>``."""
    M = _mat(A)
    r = window.rows
    return complex(M[r, r].sum() / window.n_cells)


def trace_product(window: TraceWindow, *factors) -> complex:
    """Windowed trace of a product, computing only the diagonal rows that are needed."""
    rows = window.rows
    mats = [_mat(f) for f in factors]
    right = mats[-1][:, rows]
    for M in reversed(mats[1:-1]):
        right = M @ right
    first = mats[0][rows, :]
    return complex(np.einsum("ij,ji->", first, right) / window.n_cells)


def local_density(window: TraceWindow, *factors) -> np.ndarray:
    """Per-cell ``Tr <n|A_1 ... A_k|n>`` for cells in ``window`` (site order)."""
    rows = window.rows
    mats = [_mat(f) for f in factors]
    right = mats[-1][:, rows]
    for M in reversed(mats[1:-1]):
        right = M @ right
    diag = np.einsum("ij,ji->i", mats[0][rows, :], right)
    return diag.reshape(-1, window.lattice.internal_dim).sum(axis=1)


def displacement(lattice: LatticeSpec, axis: int, wrapped: bool = False) -> np.ndarray:
    """Matrix ``x_l - x_n`` (row n, column l) of coordinate differences along ``axis``.

    ``wrapped`` replaces the difference by its minimal image on a periodic axis.
    """
    x = lattice.row_coords[:, axis]
    d = x[None, :] - x[:, None]
    if wrapped and lattice.periodic[axis]:
        n = lattice.extents[axis]
        d = d - n * np.round(d / n)
    return d


def grad(A: OperatorRep, axis: int, wrapped: bool = False) -> OperatorRep:
    """``i [A, X_axis]`` (axes counted from 0).

    On a periodic axis the literal coordinate is used unless ``wrapped`` is set, in which
    case matrix elements are weighted by the minimal-image displacement instead.
    """
    return A.like(1j * displacement(A.lattice, axis, wrapped) * A.matrix, A.hermitian)


def field_pair(component: int) -> tuple[int, int]:
    """Axes ``(j+1, j+2)`` (0-based) paired with field component ``j`` in {1, 2, 3}."""
    return (component % 3, (component + 1) % 3)


def ito_derivative_fd(
    builder: Callable[[MagneticField], OperatorRep],
    field: MagneticField,
    component: int,
    h: float = 1e-4,
) -> OperatorRep:
    """Field derivative of the phase-stripped kernel by a central difference.

    ``component`` is 1, 2 or 3 (the field component varied); the result is dressed at ``field``.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    plus = builder(field.shifted(component, h))
    minus = builder(field.shifted(component, -h))
    if any(plus.lattice.periodic):
        raise ValueError("field derivatives need open boundaries")
    S = (strip_phase(plus) - strip_phase(minus)) / (2 * h)
    return dress_phase(S, plus.lattice, field)


def exp_divided_difference2(z: complex, a, b, c, tol: float) -> np.ndarray:
    """``g[a, b, c]`` for ``g(E) = exp(z E)`` in a cancellation-safe form."""

    def dd1(x, y):
        m, h = 0.5 * (x + y), 0.5 * (y - x)
        return z * np.exp(z * m) * _sinhc(z * h)

    x = np.sort(np.stack(np.broadcast_arrays(a, b, c)), axis=0)
    x0, x1, x2 = x
    spread = x2 - x0
    out = np.empty(x0.shape, dtype=complex)
    far = spread > tol
    out[far] = (dd1(x1[far], x2[far]) - dd1(x0[far], x1[far])) / spread[far]
    near = ~far
    if np.any(near):
        m = (x0[near] + x1[near] + x2[near]) / 3
        out[near] = 0.5 * z * z * np.exp(z * m)
    return out


def _sinhc(w):
    w = np.asarray(w, dtype=complex)
    out = np.ones_like(w)
    big = np.abs(w) > 1e-4
    out[big] = np.sinh(w[big]) / w[big]
    small = ~big
    out[small] = 1 + w[small] ** 2 / 6 + w[small] ** 4 / 120
    return out


def ito_exponential(
    S: SpectralDecomposition,
    grad_pair: tuple[OperatorRep, OperatorRep],
    z: complex,
    tol: float | None = None,
) -> OperatorRep:
    """Field derivative of ``exp(z H)`` for a field-independent kernel.

    In the eigenbasis the entry ``(a, c)`` is
    ``(i/2) sum_b (G1_ab G2_bc - G2_ab G1_bc) e[E_a, E_b, E_c]`` with ``e[...]`` the second
    divided difference of ``E -> exp(z E)``; this is the double time integral of the
    DuHamel expansion evaluated exactly.
    """
    if tol is None:
        tol = 1e-6 * max(S.norm, 1.0)
    E = S.energies
    G1 = S.in_eigenbasis(grad_pair[0])
    G2 = S.in_eigenbasis(grad_pair[1])
    n = len(E)
    out = np.empty((n, n), dtype=complex)
    Eb, Ec = np.meshgrid(E, E, indexing="ij")
    for a in range(n):
        dd = exp_divided_difference2(z, np.full_like(Eb, E[a]), Eb, Ec, tol)
        out[a] = G1[a] @ (dd * G2) - G2[a] @ (dd * G1)
    V = S.vectors
    return S.source.like(0.5j * V @ out @ V.conj().T)


def spin_rotation(spin: float) -> np.ndarray:
    """``exp(i pi s_y)`` in the spin-``s`` representation (``s = 0`` gives ``[[1]]``)."""
    dim = int(round(2 * spin + 1))
    if abs(dim - (2 * spin + 1)) > 1e-12 or dim < 1:
        raise ValueError("spin must be a non-negative half-integer")
    if dim == 1:
        return np.ones((1, 1), dtype=complex)
    m = spin - np.arange(dim)
    # s_y from ladder operators: s_+ |m> = sqrt(s(s+1) - m(m+1)) |m+1>
    sp_ = np.zeros((dim, dim), dtype=complex)
    for k in range(1, dim):
        sp_[k - 1, k] = np.sqrt(spin * (spin + 1) - m[k] * (m[k] + 1))
    sy = (sp_ - sp_.conj().T) / 2j
    return expm(1j * np.pi * sy)


def time_reversal(A: OperatorRep, spin: float = 0.0) -> OperatorRep:
    """``I^{-1} conj(A) I`` on the stripped kernel, re-dressed at ``-B``.

    The internal space is ``orbitals x spin`` with the spin factor last.
    """
    rot = spin_rotation(spin)
    L = A.lattice.internal_dim
    if L % rot.shape[0]:
        raise ValueError("internal dimension is not a multiple of the spin multiplicity")
    I = np.kron(np.eye(L // rot.shape[0]), rot)
    Iall = np.kron(np.eye(A.lattice.n_sites), I)
    S = Iall.conj().T @ strip_phase(A).conj() @ Iall
    return dress_phase(S, A.lattice, -A.field, A.hermitian)


def sobolev_seminorm(A: OperatorRep, window: TraceWindow, wrapped: bool = False) -> float:
    """``(T(A^dagger A) + sum_j T((grad_j A)^dagger grad_j A))^{1/2}``."""
    total = trace_product(window, A.matrix.conj().T, A.matrix).real
    for j in range(A.lattice.dimension):
        g = grad(A, j, wrapped).matrix
        total += trace_product(window, g.conj().T, g).real
    return float(np.sqrt(max(total, 0.0)))
