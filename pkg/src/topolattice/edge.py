"""Half-space restrictions, edge traces and the edge current of a gapped bulk."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .algebra import GaplessError, displacement
from .lattice import ConfigurationError, HoppingKernel, LatticeSpec, OperatorRep


@dataclass(frozen=True, eq=False)
class HalfSpaceOp:
    """A Hamiltonian restricted to ``n_axis >= 0`` with Dirichlet conditions.

    Either ``matrix`` holds the real-space restriction on ``lattice``, or ``blocks`` holds
    transverse Bloch blocks ``H(k)`` (shape ``(nk, rows * L, rows * L)``) with their exact
    ``k``-derivatives in ``block_derivs``.  ``axis`` is the restricted axis and
    ``transverse`` the axis along which the current flows.
    """

    axis: int
    transverse: int
    rows: int
    internal_dim: int
    depth: int
    matrix: np.ndarray | None = None
    lattice: LatticeSpec | None = None
    blocks: np.ndarray | None = None
    block_derivs: np.ndarray | None = None
    kernel: HoppingKernel | None = None

    @property
    def is_bloch(self) -> bool:
        return self.blocks is not None

    def row_of_index(self) -> np.ndarray:
        """Restricted-axis coordinate of every basis index."""
        if self.is_bloch:
            return np.repeat(np.arange(self.rows), self.internal_dim)
        return self.lattice.row_coords[:, self.axis].astype(int)

    def spectrum(self) -> np.ndarray:
        if self.is_bloch:
            return np.linalg.eigvalsh(self.blocks)
        return np.linalg.eigvalsh(self.matrix)


def restrict_half_space(bulk: OperatorRep, axis: int, start: int = 0, depth: int | None = None) -> HalfSpaceOp:
    """Keep the sites with ``n_axis >= start`` (Dirichlet restriction, coordinates shifted to 0)."""
    lat = bulk.lattice
    if lat.periodic[axis]:
        raise ConfigurationError(f"axis {axis} is periodic; restriction needs an open axis")
    keep = lat.row_coords[:, axis] >= start
    extents = list(lat.extents)
    extents[axis] -= start
    if extents[axis] < 1:
        raise ConfigurationError("restriction removes every site")
    sub = LatticeSpec(tuple(extents), lat.boundary, lat.internal_dim)
    M = bulk.matrix[np.ix_(keep, keep)]
    rows = extents[axis]
    transverse = next((k for k in range(lat.dimension) if k != axis), axis)
    return HalfSpaceOp(axis, transverse, rows, lat.internal_dim, depth or max(1, rows // 3), M, sub)


def cylinder_bloch(kernel: HoppingKernel, rows: int, nk: int = 48, axis: int = 1,
                   depth: int | None = None) -> HalfSpaceOp:
    """Transverse Bloch blocks of a clean two-dimensional kernel on ``rows`` open rows.

    ``H(k)[r, r'] = sum_{m: m_axis = r - r'} T_m exp(-i k m_t)`` with ``t`` the other axis, so
    ``dH/dk`` is exact.
    """
    if kernel.dimension != 2:
        raise ConfigurationError("cylinder geometry needs a two-dimensional kernel")
    t_axis = 1 - axis
    L = kernel.internal_dim
    ks = 2 * np.pi * np.arange(nk) / nk
    H = np.zeros((nk, rows, L, rows, L), dtype=complex)
    dH = np.zeros_like(H)
    for m, T in kernel.terms.items():
        shift = m[axis]
        phase = np.exp(-1j * ks * m[t_axis])
        for r in range(max(0, shift), min(rows, rows + shift)):
            H[:, r, :, r - shift, :] += phase[:, None, None] * T
            dH[:, r, :, r - shift, :] += (-1j * m[t_axis]) * phase[:, None, None] * T
    n = rows * L
    return HalfSpaceOp(axis, t_axis, rows, L, depth or max(1, rows // 3),
                       blocks=H.reshape(nk, n, n), block_derivs=dH.reshape(nk, n, n), kernel=kernel)


# -------------------------------------------------------------- bump function


@lru_cache(maxsize=None)
def _bump_norm() -> float:
    val, _ = quad(lambda x: np.exp(-1.0 / (1.0 - x * x)), -1.0, 1.0)
    return 1.0 / val


@dataclass(frozen=True)
class Bump:
    """Unit-integral ``C^infinity`` bump ``(c / width) exp(-1 / (1 - x^2))``, ``x = (E - center) / width``."""

    center: float
    width: float

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("bump width must be positive")

    @property
    def support(self) -> tuple[float, float]:
        return (self.center - self.width, self.center + self.width)

    def __call__(self, E):
        x = (np.asarray(E, float) - self.center) / self.width
        inside = np.abs(x) < 1
        out = np.zeros(x.shape)
        out[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
        return out * _bump_norm() / self.width

    def integral(self) -> float:
        val, _ = quad(self, *self.support, limit=200)
        return float(val)

    @classmethod
    def in_gap(cls, gap: tuple[float, float], fraction: float = 0.8) -> "Bump":
        lo, hi = gap
        return cls(0.5 * (lo + hi), fraction * 0.5 * (hi - lo))


def bulk_gap(kernel: HoppingKernel, energy: float, nk: int = 48) -> tuple[float, float]:
    """Spectral gap of the clean bulk around ``energy`` from a Bloch grid."""
    d = kernel.dimension
    ks = [2 * np.pi * np.arange(nk) / nk] * d
    K = np.stack(np.meshgrid(*ks, indexing="ij"), axis=-1)
    E = np.linalg.eigvalsh(kernel.bloch(K)).ravel()
    below, above = E[E < energy], E[E > energy]
    if below.size == 0 or above.size == 0:
        raise GaplessError(f"{energy} is outside the bulk spectrum")
    return float(below.max()), float(above.min())


# ----------------------------------------------------------------- edge trace


@dataclass(frozen=True)
class EdgeTrace:
    """Edge trace truncated at ``depth`` and the part coming from rows ``[depth, 2 depth)``."""

    value: complex
    shell: complex
    depth: int

    @property
    def decays(self) -> bool:
        return abs(self.shell) <= 1e-3 * max(1.0, abs(self.value))


def _row_diagonal(half: HalfSpaceOp, diag: np.ndarray, window: np.ndarray | None) -> np.ndarray:
    """Sum a diagonal per restricted-axis row, averaged over the transverse window."""
    rows = half.row_of_index()
    if window is not None:
        diag = np.where(window, diag, 0.0)
    out = np.zeros(half.rows, dtype=complex)
    np.add.at(out, rows, diag)
    return out


def _edge_rows(profile: np.ndarray, depth: int, edge: str) -> tuple[complex, complex]:
    p = profile if edge == "lower" else profile[::-1]
    return complex(p[:depth].sum()), complex(p[depth:2 * depth].sum())


def edge_trace(half: HalfSpaceOp, operator: np.ndarray, depth: int | None = None, edge: str = "lower",
               transverse_window: tuple[int, int] | None = None) -> EdgeTrace:
    """``sum_{0 <= n_axis < depth} Tr <n|A|n>`` per unit transverse length (not divided by depth).

    ``operator`` is a real-space matrix, or an array of Bloch blocks averaged over ``k``.
    """
    depth = depth or half.depth
    if edge not in ("lower", "upper"):
        raise ValueError("edge must be 'lower' or 'upper'")
    profile = row_profile(half, operator, transverse_window)
    value, shell = _edge_rows(profile, depth, edge)
    return EdgeTrace(value, shell, depth)


def row_profile(half: HalfSpaceOp, operator: np.ndarray, transverse_window: tuple[int, int] | None = None) -> np.ndarray:
    """Per-row diagonal sums of ``operator`` per unit transverse length."""
    if half.is_bloch:
        diag = np.einsum("kii->i", operator) / operator.shape[0]
        return _row_diagonal(half, diag, None)
    lat = half.lattice
    x = lat.row_coords[:, half.transverse]
    lo, hi = transverse_window or (0, lat.extents[half.transverse])
    window = (x >= lo) & (x < hi)
    return _row_diagonal(half, np.diag(operator), window) / (hi - lo)


@dataclass(frozen=True)
class EdgeCurrent:
    """Edge current (normalized to compare with the bulk Chern number) with diagnostics."""

    value: float
    opposite: float
    shell: float
    imag: float
    bump: Bump

    @property
    def cancellation(self) -> float:
        return abs(self.value + self.opposite)


def _current_operator(half: HalfSpaceOp, f: Callable) -> np.ndarray:
    if half.is_bloch:
        E, V = np.linalg.eigh(half.blocks)
        FH = np.einsum("kia,ka,kja->kij", V, f(E), V.conj())
        return FH @ half.block_derivs
    E, V = np.linalg.eigh(half.matrix)
    FH = (V * f(E)) @ V.conj().T
    wrapped = half.lattice.periodic[half.transverse]
    gradH = 1j * displacement(half.lattice, half.transverse, wrapped) * half.matrix
    return FH @ gradH


def edge_current(half: HalfSpaceOp, bump: Bump | None = None, gap: tuple[float, float] | None = None,
                 depth: int | None = None, edge: str = "lower",
                 transverse_window: tuple[int, int] | None = None) -> EdgeCurrent:
    """``2 pi`` times the edge trace of ``F(H) grad_t H`` for a unit-integral bump ``F`` in the gap.

    The orientation is fixed so that the lower edge (``n_axis >= 0``, current along the
    transverse axis) reproduces the bulk Chern number of the (transverse, axis) pair; the
    opposite edge is reported with the same orientation.  ``gap`` defaults to the clean bulk
    gap around zero energy when a kernel is attached.
    """
    if gap is None:
        if half.kernel is None:
            raise ValueError("gap must be given for a real-space restriction")
        gap = bulk_gap(half.kernel, 0.0)
    bump = bump or Bump.in_gap(gap)
    lo, hi = bump.support
    if lo < gap[0] or hi > gap[1]:
        raise GaplessError(f"bump support {bump.support} leaves the gap {gap}")
    if abs(bump.integral() - 1.0) > 1e-8:
        raise ValueError("bump does not have unit integral")
    A = _current_operator(half, bump)
    profile = row_profile(half, A, transverse_window)
    depth = depth or half.depth
    # the transverse axis precedes the restricted axis in the Chern pair for axis = 1
    sign = -1.0 if half.transverse < half.axis else 1.0
    near, shell = _edge_rows(profile, depth, edge)
    far, _ = _edge_rows(profile, depth, "upper" if edge == "lower" else "lower")
    scale = 2 * np.pi * sign
    return EdgeCurrent(float((scale * near).real), float((scale * far).real), float(abs(scale * shell)),
                       float(abs((scale * near).imag)), bump)
