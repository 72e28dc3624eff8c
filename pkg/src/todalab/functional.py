"""The coupled mean-field energy on the torus, in both parametrizations.

The energy of a tuple v of potentials with coupling vector m is

    E(v) = 1/2 sum_ij a_ij <grad v_i, grad v_j>
         + sum_ij a_ij m_i int(v_j)
         - sum_i m_i log int(exp(u_i)),        u = A v,

where A is the coupling matrix.  Substituting u = A v gives the
equivalent u-form whose quadratic part uses the inverse matrix.  Both
forms are invariant under adding a constant to any component, and the
L2 gradient of E in v has components

    g_k = sum_j a_kj ( -lap v_j + m_j (1 - rho_j) ),

with rho_j the normalized density exp(u_j) / int(exp(u_j)).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cartan import CartanMatrix, cartan_su, _check_couplings
from .grid import (
    GridSpec,
    ScalarField,
    dirichlet_pairing,
    integral,
    inverse_laplacian,
    laplacian,
    log_integral_exp,
)

__all__ = [
    "MultiField",
    "EnergyBreakdown",
    "u_from_v",
    "v_from_u",
    "energy",
    "energy_u",
    "energy_gradient",
    "precondition_gradient",
    "normalize_components",
    "euler_lagrange_residuals",
]


@dataclass(frozen=True)
class MultiField:
    """Tuple of scalar fields on one shared grid, one per component."""

    components: tuple[ScalarField, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("at least one component required")
        spec = comps[0].spec
        for c in comps[1:]:
            if c.spec != spec:
                raise ValueError("grid mismatch")
        object.__setattr__(self, "components", comps)

    @property
    def spec(self) -> GridSpec:
        return self.components[0].spec

    @property
    def n_components(self) -> int:
        return len(self.components)

    def stack(self) -> np.ndarray:
        """Component values as one (N, n, n) array (a copy)."""
        return np.stack([c.values for c in self.components])

    @classmethod
    def from_array(cls, spec: GridSpec, values: np.ndarray) -> "MultiField":
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 3 or values.shape[1:] != spec.shape:
            raise ValueError("expected an (N, n, n) array matching the grid")
        return cls(tuple(ScalarField(spec, values[i]) for i in range(values.shape[0])))

    @classmethod
    def zeros(cls, spec: GridSpec, n_components: int) -> "MultiField":
        z = np.zeros(spec.shape)
        return cls(tuple(ScalarField(spec, z) for _ in range(n_components)))


def _matching_cartan(f: MultiField, cartan: CartanMatrix | None) -> CartanMatrix:
    if cartan is None:
        return cartan_su(f.n_components)
    if cartan.rank != f.n_components:
        raise ValueError("coupling matrix rank does not match component count")
    return cartan


def _linear_combination(f: MultiField, matrix: np.ndarray) -> MultiField:
    vals = np.tensordot(matrix, f.stack(), axes=(1, 0))
    return MultiField.from_array(f.spec, vals)


def u_from_v(v: MultiField, cartan: CartanMatrix | None = None) -> MultiField:
    """Apply the coupling matrix componentwise: u_i = sum_j a_ij v_j."""
    cartan = _matching_cartan(v, cartan)
    return _linear_combination(v, cartan.entries)


def v_from_u(u: MultiField, cartan: CartanMatrix | None = None) -> MultiField:
    """Invert u_from_v using the exact closed-form inverse."""
    cartan = _matching_cartan(u, cartan)
    return _linear_combination(u, cartan.inverse_entries)


@dataclass(frozen=True)
class EnergyBreakdown:
    """Energy split into its quadratic, linear and entropy parts."""

    quadratic: float
    linear: float
    entropy: float

    @property
    def total(self) -> float:
        return self.quadratic + self.linear + self.entropy

    def to_dict(self) -> dict:
        return {
            "quadratic": self.quadratic,
            "linear": self.linear,
            "entropy": self.entropy,
            "total": self.total,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def energy(
    v: MultiField, m: Sequence[float], cartan: CartanMatrix | None = None
) -> EnergyBreakdown:
    """Energy in the v-parametrization."""
    cartan = _matching_cartan(v, cartan)
    mv = _check_couplings(m, cartan.rank)
    a = cartan.entries
    n = cartan.rank
    pair = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            pair[i, j] = pair[j, i] = dirichlet_pairing(v.components[i], v.components[j])
    quadratic = 0.5 * float(np.sum(a * pair))
    ints = np.array([integral(c) for c in v.components])
    linear = float(mv @ a @ ints)
    u = u_from_v(v, cartan)
    entropy = -float(sum(mv[i] * log_integral_exp(u.components[i]) for i in range(n)))
    return EnergyBreakdown(quadratic, linear, entropy)


def energy_u(
    u: MultiField, m: Sequence[float], cartan: CartanMatrix | None = None
) -> EnergyBreakdown:
    """Energy in the u-parametrization (quadratic part via the inverse matrix)."""
    cartan = _matching_cartan(u, cartan)
    mv = _check_couplings(m, cartan.rank)
    inv = cartan.inverse_entries
    n = cartan.rank
    pair = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            pair[i, j] = pair[j, i] = dirichlet_pairing(u.components[i], u.components[j])
    quadratic = 0.5 * float(np.sum(inv * pair))
    linear = float(sum(mv[i] * integral(u.components[i]) for i in range(n)))
    entropy = -float(sum(mv[i] * log_integral_exp(u.components[i]) for i in range(n)))
    return EnergyBreakdown(quadratic, linear, entropy)


def _densities(u: MultiField) -> np.ndarray:
    """Normalized densities exp(u_i - log int exp(u_i)) as an (N, n, n) array."""
    out = np.empty((u.n_components, *u.spec.shape))
    for i, c in enumerate(u.components):
        out[i] = np.exp(c.values - log_integral_exp(c))
    return out


def energy_gradient(
    v: MultiField, m: Sequence[float], cartan: CartanMatrix | None = None
) -> MultiField:
    """L2 gradient of the energy in v; each component has zero mean."""
    cartan = _matching_cartan(v, cartan)
    mv = _check_couplings(m, cartan.rank)
    u = u_from_v(v, cartan)
    rho = _densities(u)
    terms = np.empty_like(rho)
    for j, c in enumerate(v.components):
        terms[j] = -laplacian(c).values + mv[j] * (1.0 - rho[j])
    grads = np.tensordot(cartan.entries, terms, axes=(1, 0))
    return MultiField.from_array(v.spec, grads)


def precondition_gradient(
    g: MultiField, cartan: CartanMatrix | None = None
) -> MultiField:
    """Smoothing preconditioner: inverse matrix, then inverse Laplacian.

    The zero-mean part of each component passes through the inverse
    Laplacian; the mean passes through unchanged so the operator stays
    invertible on constants.
    """
    cartan = _matching_cartan(g, cartan)
    mixed = _linear_combination(g, cartan.inverse_entries)
    out = []
    for c in mixed.components:
        mu = float(np.mean(c.values))
        fluct = ScalarField(c.spec, c.values - mu)
        smoothed = inverse_laplacian(fluct)
        out.append(ScalarField(c.spec, smoothed.values + mu))
    return MultiField(tuple(out))


def normalize_components(u: MultiField) -> MultiField:
    """Shift each component so int(exp(u_i)) = 1."""
    shifted = [
        ScalarField(c.spec, c.values - log_integral_exp(c)) for c in u.components
    ]
    return MultiField(tuple(shifted))


def euler_lagrange_residuals(
    u: MultiField, m: Sequence[float], cartan: CartanMatrix | None = None
) -> np.ndarray:
    """L2 norms of -lap u_i - sum_j a_ij m_j (exp(u_j) - 1), one per component.

    Requires a normalized input (every int(exp(u_j)) equal to 1); a
    vanishing residual vector characterizes critical points of the energy.
    """
    cartan = _matching_cartan(u, cartan)
    mv = _check_couplings(m, cartan.rank)
    for c in u.components:
        if abs(log_integral_exp(c)) >= 1e-8:
            raise ValueError("normalize first")
    sources = np.empty((u.n_components, *u.spec.shape))
    for j, c in enumerate(u.components):
        sources[j] = mv[j] * (np.exp(c.values) - 1.0)
    coupled = np.tensordot(cartan.entries, sources, axes=(1, 0))
    h2 = u.spec.h**2
    out = np.empty(u.n_components)
    for i, c in enumerate(u.components):
        res = -laplacian(c).values - coupled[i]
        out[i] = np.sqrt(np.sum(res**2) * h2)
    return out
