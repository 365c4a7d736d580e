"""Finite lattices, magnetic phases, covariant hopping data and represented operators.

Sites are indexed in C order over the extents; the matrix row of ``(site, a)`` is
``site * internal_dim + a``.  Coordinates run from 0 to ``extent - 1`` on every axis.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from functools import cached_property
from itertools import product
from typing import Mapping

import numpy as np

OPEN = "open"
PERIODIC = "periodic"


class ConfigurationError(ValueError):
    """Raised when a lattice, field or kernel combination is inconsistent."""


@dataclass(frozen=True)
class LatticeSpec:
    extents: tuple[int, ...]
    boundary: tuple[str, ...] | None = None
    internal_dim: int = 1
    margin: int | None = None

    def __post_init__(self):
        extents = tuple(int(n) for n in self.extents)
        object.__setattr__(self, "extents", extents)
        if not 1 <= len(extents) <= 3:
            raise ConfigurationError(f"dimension must be 1, 2 or 3, got {len(extents)}")
        if any(n < 1 for n in extents):
            raise ConfigurationError(f"extents must be >= 1, got {extents}")
        boundary = self.boundary
        if boundary is None:
            boundary = (OPEN,) * len(extents)
        elif isinstance(boundary, str):
            boundary = (boundary,) * len(extents)
        boundary = tuple(boundary)
        if len(boundary) != len(extents) or any(b not in (OPEN, PERIODIC) for b in boundary):
            raise ConfigurationError(f"boundary must list 'open'/'periodic' per axis, got {boundary}")
        object.__setattr__(self, "boundary", boundary)
        if self.internal_dim < 1:
            raise ConfigurationError("internal_dim must be >= 1")
        if self.margin is not None:
            if self.margin < 0:
                raise ConfigurationError("margin must be >= 0")
            for n, b in zip(extents, boundary):
                if b == OPEN and 2 * self.margin >= n:
                    raise ConfigurationError(f"margin {self.margin} leaves no window on an open axis of extent {n}")

    @property
    def dimension(self) -> int:
        return len(self.extents)

    @property
    def periodic(self) -> tuple[bool, ...]:
        return tuple(b == PERIODIC for b in self.boundary)

    @property
    def n_sites(self) -> int:
        return int(np.prod(self.extents))

    @property
    def dim(self) -> int:
        return self.n_sites * self.internal_dim

    def axis_margin(self, axis: int) -> int:
        """Margin used on ``axis``: zero on periodic axes, ``extent // 4`` when unset."""
        if self.periodic[axis]:
            return 0
        if self.margin is None:
            return self.extents[axis] // 4
        return self.margin

    @cached_property
    def coords(self) -> np.ndarray:
        grids = np.meshgrid(*[np.arange(n) for n in self.extents], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    @cached_property
    def row_coords(self) -> np.ndarray:
        """Coordinates of every matrix row, shape ``(dim, d)``."""
        return np.repeat(self.coords, self.internal_dim, axis=0).astype(float)

    def flat_index(self, coords: np.ndarray) -> np.ndarray:
        return np.ravel_multi_index(tuple(np.asarray(coords).T), self.extents)

    def with_margin(self, margin: int | None) -> "LatticeSpec":
        return LatticeSpec(self.extents, self.boundary, self.internal_dim, margin)


@dataclass(frozen=True)
class MagneticField:
    """Field components ``(B1, B2, B3)`` in radians of flux per unit cell."""

    components: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        comps = tuple(float(b) for b in self.components)
        if len(comps) != 3:
            raise ConfigurationError("MagneticField needs three components")
        object.__setattr__(self, "components", comps)

    @classmethod
    def perpendicular(cls, b3: float) -> "MagneticField":
        return cls((0.0, 0.0, b3))

    def matrix(self, d: int) -> np.ndarray:
        b1, b2, b3 = self.components
        full = np.array([[0.0, b3, -b2], [-b3, 0.0, b1], [b2, -b1, 0.0]])
        if d == 3:
            return full
        if d == 2:
            return full[:2, :2]
        return np.zeros((1, 1))

    def shifted(self, component: int, h: float) -> "MagneticField":
        """Field with component ``component`` (1, 2 or 3) moved by ``h``."""
        comps = list(self.components)
        comps[component - 1] += h
        return MagneticField(tuple(comps))

    def __neg__(self) -> "MagneticField":
        return MagneticField(tuple(-b for b in self.components))


def check_flux(lattice: LatticeSpec, field: MagneticField, atol: float = 1e-9) -> None:
    """Raise if the flux through some periodic plane is not a multiple of 2*pi."""
    B = field.matrix(lattice.dimension)
    per = [k for k, p in enumerate(lattice.periodic) if p]
    for a in per:
        for b in per:
            if a < b:
                flux = B[a, b] * lattice.extents[a] * lattice.extents[b]
                if abs(flux / (2 * np.pi) - round(flux / (2 * np.pi))) > atol:
                    raise ConfigurationError(
                        f"flux {flux:.6g} through periodic plane ({a + 1},{b + 1}) is not in 2*pi*Z"
                    )


def _winding_sign(lattice: LatticeSpec, field: MagneticField, windings: np.ndarray) -> np.ndarray:
    # Projective character c(W) = (-1)^{sum_{a<b} k_ab w_a w_b} that makes the boundary
    # conditions U_W psi = c(W) psi mutually consistent when the plane flux is 2*pi*k_ab.
    B = field.matrix(lattice.dimension)
    sign = np.ones(len(windings))
    per = [k for k, p in enumerate(lattice.periodic) if p]
    for a in per:
        for b in per:
            if a < b:
                k = int(round(B[a, b] * lattice.extents[a] * lattice.extents[b] / (2 * np.pi)))
                if k % 2:
                    sign *= (-1.0) ** (windings[:, a] * windings[:, b])
    return sign


def _shift_pairs(lattice: LatticeSpec, m) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sites ``l`` and targets ``n = l + m`` (wrapped), with lattice offsets ``W = n - m - l``.

    On open axes out-of-range targets are dropped.
    """
    m = np.asarray(m, dtype=int)
    src = lattice.coords
    tgt = src + m
    ext = np.array(lattice.extents)
    keep = np.ones(len(src), dtype=bool)
    for k, per in enumerate(lattice.periodic):
        if per:
            tgt[:, k] = np.mod(tgt[:, k], ext[k])
        else:
            keep &= (tgt[:, k] >= 0) & (tgt[:, k] < ext[k])
    src, tgt = src[keep], tgt[keep]
    offsets = tgt - m - src
    return src, tgt, offsets


def _bilinear(B: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise ``a . B b``."""
    return np.einsum("ki,ij,kj->k", a, B, b)


def _pair_phase(lattice: LatticeSpec, field: MagneticField, n, l0, W) -> np.ndarray:
    """Boundary factor ``c(W) exp(i/2 W.B l0)`` for a source reached through offset ``W``."""
    B = field.matrix(lattice.dimension)
    winding = np.zeros_like(W)
    per = np.array(lattice.periodic)
    winding[:, per] = W[:, per] // np.array(lattice.extents)[per]
    return _winding_sign(lattice, field, winding) * np.exp(0.5j * _bilinear(B, W, l0))


@dataclass(frozen=True)
class HoppingKernel:
    """Finite map ``m -> T_m`` (``L_int x L_int``) with ``T_{-m} = T_m^dagger``."""

    terms: Mapping[tuple[int, ...], np.ndarray]

    def __post_init__(self):
        terms = {tuple(int(x) for x in m): np.atleast_2d(np.asarray(t, dtype=complex)) for m, t in self.terms.items()}
        if not terms:
            raise ConfigurationError("kernel needs at least one term")
        shapes = {t.shape for t in terms.values()}
        dims = {len(m) for m in terms}
        if len(shapes) != 1 or len(dims) != 1:
            raise ConfigurationError("kernel terms must share shape and dimension")
        (shape,) = shapes
        if shape[0] != shape[1]:
            raise ConfigurationError("kernel blocks must be square")
        for m, t in terms.items():
            partner = terms.get(tuple(-x for x in m))
            if partner is None or not np.allclose(partner, t.conj().T, atol=1e-13):
                raise ConfigurationError(f"kernel is not self-adjoint: T_{{-m}} != T_m^dagger at m={m}")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def from_half(cls, half: Mapping[tuple[int, ...], np.ndarray]) -> "HoppingKernel":
        """Complete a kernel from one representative of each ``{m, -m}`` pair.

        The ``m = 0`` block is symmetrized as ``(T + T^dagger) / 2`` only when it is given
        Hermitian; non-Hermitian on-site blocks are rejected.
        """
        terms: dict[tuple[int, ...], np.ndarray] = {}
        for m, t in half.items():
            m = tuple(int(x) for x in m)
            t = np.atleast_2d(np.asarray(t, dtype=complex))
            neg = tuple(-x for x in m)
            if m == neg:
                if not np.allclose(t, t.conj().T, atol=1e-13):
                    raise ConfigurationError("on-site block must be Hermitian")
                terms[m] = terms.get(m, 0) + t
            else:
                terms[m] = terms.get(m, 0) + t
                terms[neg] = terms.get(neg, 0) + t.conj().T
        return cls(terms)

    @property
    def internal_dim(self) -> int:
        return next(iter(self.terms.values())).shape[0]

    @property
    def dimension(self) -> int:
        return len(next(iter(self.terms)))

    def __add__(self, other: "HoppingKernel") -> "HoppingKernel":
        terms = dict(self.terms)
        for m, t in other.terms.items():
            terms[m] = terms.get(m, 0) + t
        return HoppingKernel(terms)

    def scaled(self, c: float) -> "HoppingKernel":
        return HoppingKernel({m: c * t for m, t in self.terms.items()})

    def bloch(self, k: np.ndarray) -> np.ndarray:
        """``H(k) = sum_m T_m exp(-i k.m)`` for an array of momenta ``(..., d)``."""
        k = np.asarray(k, dtype=float)
        out = 0
        for m, t in self.terms.items():
            out = out + np.exp(-1j * (k @ np.array(m, dtype=float)))[..., None, None] * t
        return out

    def bloch_derivative(self, k: np.ndarray, axis: int) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        out = 0
        for m, t in self.terms.items():
            out = out + (-1j * m[axis] * np.exp(-1j * (k @ np.array(m, dtype=float))))[..., None, None] * t
        return out


@dataclass(frozen=True)
class DisorderConfig:
    """On-site disorder ``V_{omega,n}`` as a pure function of (kind, strength, seed, site).

    ``kind`` is ``"none"``, ``"uniform"`` (scalar in ``[-W/2, W/2]`` times the identity) or
    ``"hermitian"`` (site-diagonal Hermitian block with entries of scale ``W``).
    ``offset`` realizes the shift action: the potential at site ``n`` is the unshifted one
    at ``n - offset``.
    """

    kind: str = "none"
    strength: float = 0.0
    seed: int = 0
    offset: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("none", "uniform", "hermitian"):
            raise ConfigurationError(f"unknown disorder kind {self.kind!r}")
        if self.strength < 0:
            raise ConfigurationError("disorder strength must be >= 0")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")

    def with_seed(self, seed: int) -> "DisorderConfig":
        return DisorderConfig(self.kind, self.strength, seed, self.offset)

    def shifted(self, a) -> "DisorderConfig":
        base = np.zeros(len(a), dtype=int) if self.offset is None else np.array(self.offset)
        return DisorderConfig(self.kind, self.strength, self.seed, tuple(int(x) for x in base + np.asarray(a)))

    def site_potential(self, lattice: LatticeSpec) -> np.ndarray:
        """Array of shape ``(n_sites, L, L)`` with the realized blocks."""
        L = lattice.internal_dim
        out = np.zeros((lattice.n_sites, L, L), dtype=complex)
        if self.kind == "none" or self.strength == 0:
            return out
        coords = lattice.coords.copy()
        if self.offset is not None:
            coords = coords - np.array(self.offset)
        for k, per in enumerate(lattice.periodic):
            if per:
                coords[:, k] = np.mod(coords[:, k], lattice.extents[k])
        for s, c in enumerate(coords):
            key = tuple(int(x) + 2**31 for x in c)
            rng = np.random.default_rng(np.random.SeedSequence(int(self.seed), spawn_key=key))
            if self.kind == "uniform":
                out[s] = self.strength * (rng.random() - 0.5) * np.eye(L)
            else:
                a = rng.normal(size=(L, L)) + 1j * rng.normal(size=(L, L))
                out[s] = self.strength * (a + a.conj().T) / (2 * np.sqrt(2 * L))
        return out


@dataclass(frozen=True, eq=False)
class OperatorRep:
    """Dense matrix of a represented operator together with its lattice and field."""

    matrix: np.ndarray
    lattice: LatticeSpec
    field: MagneticField = dc_field(default_factory=MagneticField)
    hermitian: bool = False

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", mat)
        if mat.shape != (self.lattice.dim, self.lattice.dim):
            raise ConfigurationError(f"matrix shape {mat.shape} does not match lattice dimension {self.lattice.dim}")
        if self.hermitian:
            if np.abs(mat - mat.conj().T).max() > 1e-12 * max(_norm_bound(mat), 1.0):
                raise ConfigurationError("operator flagged Hermitian is not")

    def like(self, matrix: np.ndarray, hermitian: bool = False) -> "OperatorRep":
        return OperatorRep(matrix, self.lattice, self.field, hermitian)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dag(self) -> "OperatorRep":
        return self.like(self.matrix.conj().T, self.hermitian)

    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    def __matmul__(self, other: "OperatorRep") -> "OperatorRep":
        return self.like(self.matrix @ other.matrix)

    def __add__(self, other: "OperatorRep") -> "OperatorRep":
        return self.like(self.matrix + other.matrix)

    def __sub__(self, other: "OperatorRep") -> "OperatorRep":
        return self.like(self.matrix - other.matrix)

    def __neg__(self) -> "OperatorRep":
        return self.like(-self.matrix, self.hermitian)

    def __mul__(self, c: complex) -> "OperatorRep":
        return self.like(c * self.matrix)

    __rmul__ = __mul__

    @classmethod
    def identity(cls, lattice: LatticeSpec, field: MagneticField | None = None) -> "OperatorRep":
        return cls(np.eye(lattice.dim), lattice, field or MagneticField(), True)


def _norm_bound(mat: np.ndarray) -> float:
    # max column sum: an upper bound on the spectral norm that avoids an SVD
    return float(np.abs(mat).sum(axis=0).max()) if mat.size else 0.0


def _expand_phase(site_phase: np.ndarray, L: int) -> np.ndarray:
    return np.kron(site_phase, np.ones((L, L))) if L > 1 else site_phase


def representation_phase(lattice: LatticeSpec, field: MagneticField) -> np.ndarray:
    """Matrix of ``exp(i/2 l.B n)`` indexed by (row n, column l) over all rows."""
    B = field.matrix(lattice.dimension)
    x = lattice.coords.astype(float)
    site = np.exp(0.5j * (x @ B.T @ x.T))
    return _expand_phase(site, lattice.internal_dim)


def strip_phase(A: OperatorRep) -> np.ndarray:
    """Entry ``(n, l)`` of the result is ``exp(-i/2 l.B n) A_{nl}``."""
    return A.matrix * representation_phase(A.lattice, A.field).conj()


def dress_phase(S: np.ndarray, lattice: LatticeSpec, field: MagneticField, hermitian: bool = False) -> OperatorRep:
    """Inverse of :func:`strip_phase`."""
    return OperatorRep(S * representation_phase(lattice, field), lattice, field, hermitian)


def build_magnetic_translation(lattice: LatticeSpec, field: MagneticField, a) -> OperatorRep:
    """``(U_a psi)_n = exp(i/2 a.Bn) psi_{n-a}``; a partial isometry on open axes."""
    a = np.asarray(a, dtype=int)
    if a.shape != (lattice.dimension,):
        raise ConfigurationError("shift vector has wrong dimension")
    for k, per in enumerate(lattice.periodic):
        if not per and abs(a[k]) >= lattice.extents[k]:
            raise ConfigurationError(f"shift {a[k]} on open axis {k} empties the operator")
    check_flux(lattice, field)
    B = field.matrix(lattice.dimension)
    per = np.array(lattice.periodic)
    ext = np.array(lattice.extents)
    # U_a maps the quasi-periodic sector to itself only if a.B W is a multiple of 2*pi
    for k in np.flatnonzero(per):
        w = np.zeros(lattice.dimension)
        w[k] = ext[k]
        if abs(np.exp(1j * a @ B @ w) - 1) > 1e-9:
            raise ConfigurationError(f"shift {tuple(a)} does not commute with the period along axis {k}")
    src, tgt, offsets = _shift_pairs(lattice, a)
    phase = np.exp(0.5j * _bilinear(B, np.broadcast_to(a, tgt.shape), tgt))
    phase = phase * _pair_phase(lattice, field, tgt, src, offsets)
    L = lattice.internal_dim
    U = np.zeros((lattice.n_sites, L, lattice.n_sites, L), dtype=complex)
    eye = np.eye(L)
    U[lattice.flat_index(tgt), :, lattice.flat_index(src), :] = phase[:, None, None] * eye
    return OperatorRep(U.reshape(lattice.dim, lattice.dim), lattice, field)


def build_hamiltonian(
    lattice: LatticeSpec,
    field: MagneticField,
    kernel: HoppingKernel,
    disorder: DisorderConfig | None = None,
) -> OperatorRep:
    """Represented covariant Hamiltonian ``<n|H|l> = T_{n-l} exp(i/2 l.Bn) + delta_{nl} V_n``.

    On periodic axes the lattice is the quotient of the infinite lattice by the magnetic
    translations along the periods, so the flux through every periodic plane must be a
    multiple of 2*pi.
    """
    if kernel.dimension != lattice.dimension:
        raise ConfigurationError("kernel and lattice dimensions differ")
    if kernel.internal_dim != lattice.internal_dim:
        raise ConfigurationError("kernel and lattice internal dimensions differ")
    for m in kernel.terms:
        for k, per in enumerate(lattice.periodic):
            if not per and abs(m[k]) >= lattice.extents[k] and np.any(kernel.terms[m]):
                raise ConfigurationError(f"kernel range {m} exceeds open extent along axis {k}")
    check_flux(lattice, field)
    B = field.matrix(lattice.dimension)
    L = lattice.internal_dim
    H = np.zeros((lattice.n_sites, L, lattice.n_sites, L), dtype=complex)
    for m, t in kernel.terms.items():
        if not np.any(t):
            continue
        src, tgt, offsets = _shift_pairs(lattice, m)
        unwrapped = src + offsets
        phase = np.exp(0.5j * _bilinear(B, unwrapped, tgt)) * _pair_phase(lattice, field, tgt, src, offsets)
        rows, cols = lattice.flat_index(tgt), lattice.flat_index(src)
        H[rows, :, cols, :] += phase[:, None, None] * t
    if disorder is not None:
        V = disorder.site_potential(lattice)
        idx = np.arange(lattice.n_sites)
        H[idx, :, idx, :] += V
    H = H.reshape(lattice.dim, lattice.dim)
    if np.abs(H - H.conj().T).max() > 1e-12 * max(1.0, _norm_bound(H)):
        raise ConfigurationError("assembled Hamiltonian is not Hermitian")
    return OperatorRep(0.5 * (H + H.conj().T), lattice, field, hermitian=True)


def all_shifts(d: int, radius: int):
    """Integer vectors with every component in ``[-radius, radius]``."""
    return [np.array(v) for v in product(range(-radius, radius + 1), repeat=d)]
