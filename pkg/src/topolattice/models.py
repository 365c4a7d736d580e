"""Catalog of tight-binding models.

Each builder returns data only (a kernel, a disorder description, a field); all magnetic
dependence enters through the representation phases of :func:`build_hamiltonian`.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np
import sympy as sp

from .lattice import (
    ConfigurationError,
    DisorderConfig,
    HoppingKernel,
    LatticeSpec,
    MagneticField,
    OperatorRep,
    build_hamiltonian,
)

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class TightBindingModel:
    name: str
    kernel: HoppingKernel
    disorder: DisorderConfig = dc_field(default_factory=DisorderConfig)
    field: MagneticField = dc_field(default_factory=MagneticField)
    spin: float = 0.0
    params: dict = dc_field(default_factory=dict)

    @property
    def internal_dim(self) -> int:
        return self.kernel.internal_dim

    def lattice(self, extents, boundary=None, margin=None) -> LatticeSpec:
        return LatticeSpec(tuple(extents), boundary, self.internal_dim, margin)

    def hamiltonian(self, lattice: LatticeSpec, field: MagneticField | None = None, seed: int | None = None) -> OperatorRep:
        disorder = self.disorder if seed is None else self.disorder.with_seed(seed)
        return build_hamiltonian(lattice, self.field if field is None else field, self.kernel, disorder)

    def family(self, lattice: LatticeSpec, seed: int | None = None) -> Callable[[MagneticField], OperatorRep]:
        """``B -> H(B)`` at fixed disorder, as used by field derivatives."""
        return lambda B: self.hamiltonian(lattice, B, seed)

    @property
    def is_clean(self) -> bool:
        return self.disorder.kind == "none" or self.disorder.strength == 0


def _real(*values) -> None:
    for v in values:
        if not np.isreal(v) or not np.isfinite(v):
            raise ConfigurationError(f"model parameters must be finite reals, got {v!r}")


def haldane(t1: float = 1.0, t2: float = 0.3, phi: float = np.pi / 2, m_stag: float = 0.2,
            disorder: float = 0.0, seed: int = 0) -> TightBindingModel:
    """Honeycomb lattice on the square index lattice with sublattices ``(A, B)``.

    Cell ``n`` holds A at ``n1 a1 + n2 a2`` and B at that point plus ``(a1 + a2)/3``.
    A couples to B in cells ``n``, ``n - e1`` and ``n - e2``.  Second neighbours along
    ``a1``, ``a2 - a1``, ``-a2`` (a counterclockwise triple) carry ``t2 exp(+i phi)`` on A
    and ``t2 exp(-i phi)`` on B.
    """
    _real(t1, t2, phi, m_stag, disorder)
    nn = np.array([[0, t1], [0, 0]], dtype=complex)
    half = {
        (0, 0): np.diag([m_stag, -m_stag]).astype(complex) + nn + nn.conj().T,
        (1, 0): nn,
        (0, 1): nn,
    }
    nnn = np.diag([t2 * np.exp(1j * phi), t2 * np.exp(-1j * phi)])
    for m in [(1, 0), (-1, 1), (0, -1)]:
        half[m] = half.get(m, 0) + nnn
    kind = "uniform" if disorder > 0 else "none"
    return TightBindingModel(
        "haldane",
        HoppingKernel.from_half(half),
        DisorderConfig(kind, disorder, seed),
        params=dict(t1=t1, t2=t2, phi=phi, m_stag=m_stag, disorder=disorder, seed=seed),
    )


def hofstadter(b3: float = 2 * np.pi / 3, t: float = 1.0, disorder: float = 0.0, seed: int = 0) -> TightBindingModel:
    """Square lattice with nearest-neighbour hopping ``-t`` at perpendicular flux ``b3``."""
    _real(b3, t, disorder)
    half = {(1, 0): [[-t]], (0, 1): [[-t]]}
    kind = "uniform" if disorder > 0 else "none"
    return TightBindingModel(
        "hofstadter",
        HoppingKernel.from_half(half),
        DisorderConfig(kind, disorder, seed),
        MagneticField.perpendicular(b3),
        params=dict(b3=b3, t=t, disorder=disorder, seed=seed),
    )


def anderson(W: float = 1.0, t: float = 1.0, d: int = 2, seed: int = 0, b3: float = 0.0) -> TightBindingModel:
    """Hypercubic nearest-neighbour hopping ``-t`` with uniform on-site disorder in ``[-W/2, W/2]``."""
    _real(W, t, b3)
    half = {}
    for k in range(d):
        m = [0] * d
        m[k] = 1
        half[tuple(m)] = [[-t]]
    return TightBindingModel(
        "anderson",
        HoppingKernel.from_half(half),
        DisorderConfig("uniform", W, seed),
        MagneticField.perpendicular(b3),
        params=dict(W=W, t=t, d=d, seed=seed, b3=b3),
    )


def atomic_insulator(gap: float = 2.0, d: int = 2) -> TightBindingModel:
    """Two decoupled orbitals per cell at energies ``+-gap/2``; no hopping at all."""
    half = {tuple([0] * d): np.diag([-gap / 2, gap / 2]).astype(complex)}
    return TightBindingModel("atomic", HoppingKernel.from_half(half), params=dict(gap=gap, d=d))


@dataclass(frozen=True)
class KernelFamily:
    """``K(theta) = base + sum_k c_k(theta) components[k]`` with symbolic coefficients.

    ``theta`` runs over ``[theta_start, theta_end]``; closed loops have ``loop=True`` and
    coefficients that agree at both ends.
    """

    name: str
    base: HoppingKernel
    components: tuple[HoppingKernel, ...]
    coefficients: tuple[sp.Expr, ...]
    theta: sp.Symbol
    theta_range: tuple[float, float]
    loop: bool = False
    params: dict = dc_field(default_factory=dict)

    @property
    def internal_dim(self) -> int:
        return self.base.internal_dim

    def coefficient_values(self, theta: float) -> np.ndarray:
        return np.array([float(c.subs(self.theta, theta)) for c in self.coefficients])

    def kernel(self, theta: float) -> HoppingKernel:
        out = self.base
        for c, comp in zip(self.coefficient_values(theta), self.components):
            out = out + comp.scaled(c)
        return out


def _kernel_on(d: int, terms: dict) -> HoppingKernel:
    # always include the on-site key so additions of families share their supports
    terms = dict(terms)
    terms.setdefault(tuple([0] * d), np.zeros_like(np.asarray(next(iter(terms.values())), dtype=complex)))
    return HoppingKernel.from_half(terms)


def rice_mele(t0: float = 1.0, delta0: float = 0.8, Delta0: float = 1.2) -> KernelFamily:
    """Rice-Mele chain on the loop ``(delta, Delta) = (delta0 cos theta, Delta0 sin theta)``.

    Intra-cell hopping ``t0 + delta``, inter-cell hopping ``t0 - delta`` and staggered
    potential ``+-Delta`` on the two sublattices.
    """
    _real(t0, delta0, Delta0)
    if delta0 == 0 or Delta0 == 0:
        raise ConfigurationError("the Rice-Mele loop must encircle the gap-closing point")
    theta = sp.Symbol("theta", real=True)
    inter = np.array([[0, 1], [0, 0]], dtype=complex)
    base = _kernel_on(1, {(0,): t0 * SIGMA_X, (1,): t0 * inter})
    hop = _kernel_on(1, {(0,): SIGMA_X, (1,): -inter})
    stag = _kernel_on(1, {(0,): SIGMA_Z})
    return KernelFamily(
        "rice_mele",
        base,
        (hop, stag),
        (delta0 * sp.cos(theta), Delta0 * sp.sin(theta)),
        theta,
        (0.0, 2 * np.pi),
        loop=True,
        params=dict(t0=t0, delta0=delta0, Delta0=Delta0),
    )


def avoided_crossing(velocity: float = 2.0, coupling: float = 0.5) -> KernelFamily:
    """Two-level family ``velocity (theta - 1/2) sigma_z + coupling sigma_x`` on one site."""
    _real(velocity, coupling)
    if coupling == 0:
        raise ConfigurationError("zero coupling closes the gap")
    theta = sp.Symbol("theta", real=True)
    return KernelFamily(
        "avoided_crossing",
        _kernel_on(1, {(0,): coupling * SIGMA_X}),
        (_kernel_on(1, {(0,): SIGMA_Z}),),
        (velocity * (theta - sp.Rational(1, 2)),),
        theta,
        (0.0, 1.0),
        params=dict(velocity=velocity, coupling=coupling),
    )


CATALOG = {
    "haldane": haldane,
    "hofstadter": hofstadter,
    "anderson": anderson,
    "atomic": atomic_insulator,
    "rice_mele": rice_mele,
    "avoided_crossing": avoided_crossing,
}
