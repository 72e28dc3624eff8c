"""Radially symmetric entire solutions of the coupled exponential system.

The planar system u_j'' + u_j'/r = -sum_k a_jk e^{u_k} is integrated in
t = log r, where it reads d2u_j/dt2 = -sum_k a_jk e^{u_k + 2t} and the
1/r stiffness disappears; a quadratic series in r covers the origin up
to SERIES_RADIUS.  Running masses ride along as companion unknowns, so
the divergence-theorem flux identity -2 pi r u_i'(r) = sum_j a_ij
alpha_j(r) is available at every node as an integrator self-test.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .cartan import CartanMatrix, cartan_su

__all__ = [
    "RadialSolution",
    "MassReport",
    "SlopeCheck",
    "PohozaevBalance",
    "MassRelation",
    "ShootingRow",
    "BlowUpError",
    "integrate_radial",
    "flux_residuals",
    "masses_and_exponents",
    "asymptotic_slopes",
    "ball_pohozaev",
    "check_mass_relation",
    "sweep_shooting",
    "write_solution_csv",
]

SERIES_RADIUS = 1e-4
FLUX_ABORT = 1e-5
TAIL_FRACTION = 1e-4
FOUR_PI = 4.0 * np.pi


class BlowUpError(RuntimeError):
    """The profile left the integrable regime at a finite radius."""

    def __init__(self, message: str, radius: float):
        super().__init__(message)
        self.radius = float(radius)


@dataclass(frozen=True, eq=False)
class RadialSolution:
    """Profiles, derivatives, and running masses on increasing radii.

    r_nodes starts at 0 (series values) and ends at r_max; u, du, and
    alpha hold one row per component.
    """

    r_nodes: np.ndarray
    u: np.ndarray
    du: np.ndarray
    alpha: np.ndarray
    a0: tuple[float, ...]
    cartan: CartanMatrix
    r_max: float
    _dense: object = field(repr=False)

    @property
    def n_components(self) -> int:
        return len(self.a0)


@dataclass(frozen=True)
class MassReport:
    alpha: tuple[float, ...]
    beta: tuple[float, ...]
    alpha_above_4pi: tuple[bool, ...]
    beta_above_4pi: tuple[bool, ...]


@dataclass(frozen=True)
class SlopeCheck:
    measured: float
    predicted: float
    rel_dev: float


@dataclass(frozen=True)
class PohozaevBalance:
    r: float
    lhs: float
    rhs: float
    residual: float


@dataclass(frozen=True)
class MassRelation:
    residual: float
    relative: float


@dataclass(frozen=True)
class ShootingRow:
    a2: float
    outcome: str
    alpha: tuple[float, ...]
    beta: tuple[float, ...]
    relation_rel: float


def _resolve_cartan(rank: int, cartan: Optional[CartanMatrix]) -> CartanMatrix:
    if cartan is None:
        return cartan_su(rank)
    if cartan.rank != rank:
        raise ValueError("coupling matrix rank does not match component count")
    return cartan


def integrate_radial(
    a0: Sequence[float],
    r_max: float = 1000.0,
    tol: float = 1e-10,
    cartan: Optional[CartanMatrix] = None,
    nodes: int = 600,
) -> RadialSolution:
    """Integrate from the origin out to r_max with running masses.

    a0 holds the central values u_j(0); smoothness forces u_j'(0) = 0,
    and the series u_j ~ a_j - (sum_k a_jk e^{a_k}) r^2 / 4 hands off to
    the log-radius integrator at SERIES_RADIUS.  Raises BlowUpError when
    a profile climbs past the blow-up guard before reaching r_max, and
    aborts if the flux identity degrades beyond FLUX_ABORT.
    """
    start = np.asarray(a0, dtype=float)
    if start.ndim != 1 or start.size == 0 or not np.all(np.isfinite(start)):
        raise ValueError("initial values must be a finite vector")
    if r_max < 10.0:
        raise ValueError("r_max must be at least 10")
    if not 1e-12 <= tol <= 1e-6:
        raise ValueError("tol must lie in [1e-12, 1e-6]")
    if nodes < 16:
        raise ValueError("nodes must be at least 16")
    cartan = _resolve_cartan(start.size, cartan)
    amat = cartan.entries
    rank = cartan.rank

    curvature = amat @ np.exp(start)
    r0 = SERIES_RADIUS
    y0 = np.concatenate(
        [
            start - curvature * r0 * r0 / 4.0,
            -curvature * r0 * r0 / 2.0,
            np.pi * np.exp(start) * r0 * r0,
        ]
    )

    def rhs(t, y):
        weights = np.exp(y[:rank] + 2.0 * t)
        return np.concatenate(
            [y[rank : 2 * rank], -(amat @ weights), 2.0 * np.pi * weights]
        )

    guard = max(50.0, float(start.max()) + 10.0)

    def blow_guard(t, y):
        return guard - y[:rank].max()

    blow_guard.terminal = True
    blow_guard.direction = -1.0

    t_span = (np.log(r0), np.log(r_max))
    t_eval = np.linspace(t_span[0], t_span[1], nodes)
    sol = solve_ivp(
        rhs,
        t_span,
        y0,
        method="DOP853",
        rtol=tol,
        atol=tol,
        t_eval=t_eval,
        dense_output=True,
        events=blow_guard,
    )
    if sol.status == 1:
        radius = float(np.exp(sol.t_events[0][0]))
        raise BlowUpError(
            f"profile blew up near radius {radius:.6g}", radius
        )
    if not sol.success:
        radius = float(np.exp(sol.t[-1])) if sol.t.size else r0
        raise BlowUpError(
            f"integration stalled near radius {radius:.6g}", radius
        )

    radii = np.exp(sol.t)
    u = sol.y[:rank]
    w = sol.y[rank : 2 * rank]
    alpha = sol.y[2 * rank :]
    du = w / radii[None, :]

    r_nodes = np.concatenate([[0.0], radii])
    u_full = np.concatenate([start[:, None], u], axis=1)
    du_full = np.concatenate([np.zeros((rank, 1)), du], axis=1)
    alpha_full = np.concatenate([np.zeros((rank, 1)), alpha], axis=1)

    result = RadialSolution(
        r_nodes=r_nodes,
        u=u_full,
        du=du_full,
        alpha=alpha_full,
        a0=tuple(float(v) for v in start),
        cartan=cartan,
        r_max=float(r_max),
        _dense=sol.sol,
    )
    worst = float(flux_residuals(result).max())
    if worst > FLUX_ABORT:
        raise RuntimeError(
            f"flux identity violated: residual {worst:.3e} exceeds {FLUX_ABORT:g}"
        )
    return result


def flux_residuals(sol: RadialSolution) -> np.ndarray:
    """Normalized flux defect |-2 pi r u' - K alpha| per node past the origin.

    The divergence theorem makes the defect zero for the exact solution;
    the normalization 1 + sum_j alpha_j matches the integrator's mixed
    absolute/relative error control.
    """
    r = sol.r_nodes[1:]
    w = sol.du[:, 1:] * r[None, :]
    kalpha = sol.cartan.entries @ sol.alpha[:, 1:]
    defect = np.abs(-2.0 * np.pi * w - kalpha)
    scale = 1.0 + sol.alpha[:, 1:].sum(axis=0)
    return (defect / scale[None, :]).max(axis=0)


def masses_and_exponents(sol: RadialSolution) -> MassReport:
    """Total masses and decay exponents at r_max, with the 4 pi flags.

    Requires small tails: each component must satisfy
    e^{u_j(r_max)} 2 pi r_max^2 < 1e-4 alpha_j(r_max), otherwise the
    reported mass is not close to its limit.
    """
    alpha = sol.alpha[:, -1]
    tails = np.exp(sol.u[:, -1]) * 2.0 * np.pi * sol.r_max**2
    if np.any(tails >= TAIL_FRACTION * alpha):
        raise ValueError("mass tail too large at r_max; integrate to a larger r_max")
    beta = sol.cartan.entries @ alpha
    return MassReport(
        alpha=tuple(float(a) for a in alpha),
        beta=tuple(float(b) for b in beta),
        alpha_above_4pi=tuple(bool(a > FOUR_PI) for a in alpha),
        beta_above_4pi=tuple(bool(b > FOUR_PI) for b in beta),
    )


def asymptotic_slopes(sol: RadialSolution) -> tuple[SlopeCheck, ...]:
    """Compare r u_j'(r_max) with the flux-predicted limit -beta_j / 2 pi."""
    report = masses_and_exponents(sol)
    checks = []
    for j in range(sol.n_components):
        measured = float(sol.r_nodes[-1] * sol.du[j, -1])
        predicted = -report.beta[j] / (2.0 * np.pi)
        rel = abs(measured - predicted) / abs(predicted)
        checks.append(SlopeCheck(measured, predicted, rel))
    return tuple(checks)


def _state_at(sol: RadialSolution, r: float):
    """(u, r u', alpha) at radius r from the dense solution or the series."""
    rank = sol.n_components
    if r < SERIES_RADIUS:
        start = np.asarray(sol.a0)
        curvature = sol.cartan.entries @ np.exp(start)
        u = start - curvature * r * r / 4.0
        w = -curvature * r * r / 2.0
        alpha = np.pi * np.exp(start) * r * r
        return u, w, alpha
    y = sol._dense(np.log(r))
    return y[:rank], y[rank : 2 * rank], y[2 * rank :]


def ball_pohozaev(sol: RadialSolution, r: float) -> PohozaevBalance:
    """Both sides of the ball identity at radius r.

    lhs = 6 pi r^2 (e^{u1}+e^{u2}) - 6 (alpha1+alpha2) and
    rhs = -2 pi ((r u1')^2 + (r u2')^2 + (r u1')(r u2')); the identity
    follows from the system by parts, so the residual measures pure
    integration error.
    """
    if sol.n_components != 2:
        raise ValueError("ball identity is defined for two components")
    if not 0.0 < r <= sol.r_max:
        raise ValueError("R out of range")
    u, w, alpha = _state_at(sol, r)
    lhs = 6.0 * np.pi * r * r * float(np.exp(u).sum()) - 6.0 * float(alpha.sum())
    rhs = -2.0 * np.pi * float(w[0] ** 2 + w[1] ** 2 + w[0] * w[1])
    return PohozaevBalance(r=float(r), lhs=lhs, rhs=rhs, residual=lhs - rhs)


def check_mass_relation(alpha1: float, alpha2: float) -> MassRelation:
    """Signed and relative defect of a1^2 + a2^2 - a1 a2 = 4 pi (a1 + a2)."""
    if alpha1 <= 0 or alpha2 <= 0:
        raise ValueError("masses must be positive")
    residual = (
        alpha1 * alpha1 + alpha2 * alpha2 - alpha1 * alpha2
        - FOUR_PI * (alpha1 + alpha2)
    )
    return MassRelation(
        residual=float(residual),
        relative=float(residual / (FOUR_PI * (alpha1 + alpha2))),
    )


def sweep_shooting(
    a2_values: Sequence[float],
    r_max: float = 1000.0,
    tol: float = 1e-10,
    cartan: Optional[CartanMatrix] = None,
) -> tuple[ShootingRow, ...]:
    """Integrate the one-parameter family a0 = (0, a2) and summarize.

    The scaling symmetry u(x) -> u(sx) + 2 log s pins a1 = 0 without
    loss.  Rows report masses, exponents, and the mass-relation defect;
    runs whose tails have not settled at r_max come back with outcome
    "tail" and blow-ups with outcome "blow-up" (masses zeroed), neither
    treated as an error.
    """
    rows = []
    for a2 in a2_values:
        try:
            sol = integrate_radial((0.0, float(a2)), r_max=r_max, tol=tol, cartan=cartan)
        except BlowUpError:
            rows.append(
                ShootingRow(float(a2), "blow-up", (0.0, 0.0), (0.0, 0.0), np.nan)
            )
            continue
        try:
            report = masses_and_exponents(sol)
        except ValueError:
            alpha = tuple(float(a) for a in sol.alpha[:, -1])
            beta = tuple(float(b) for b in sol.cartan.entries @ sol.alpha[:, -1])
            rows.append(ShootingRow(float(a2), "tail", alpha, beta, np.nan))
            continue
        relation = check_mass_relation(*report.alpha)
        rows.append(
            ShootingRow(
                float(a2),
                "converged",
                report.alpha,
                report.beta,
                abs(relation.relative),
            )
        )
    return tuple(rows)


def write_solution_csv(sol: RadialSolution, destination) -> None:
    """Write (r, u_j, du_j, alpha_j) rows to a path or text file object."""
    rank = sol.n_components
    header = (
        "r,"
        + ",".join(f"u{j + 1}" for j in range(rank))
        + ","
        + ",".join(f"du{j + 1}" for j in range(rank))
        + ","
        + ",".join(f"alpha{j + 1}" for j in range(rank))
    )
    own = isinstance(destination, (str, bytes)) or hasattr(destination, "__fspath__")
    handle = open(destination, "w", encoding="utf-8") if own else destination
    try:
        handle.write(header + "\n")
        for k in range(sol.r_nodes.size):
            cells = [f"{sol.r_nodes[k]:.12g}"]
            cells += [f"{sol.u[j, k]:.12g}" for j in range(rank)]
            cells += [f"{sol.du[j, k]:.12g}" for j in range(rank)]
            cells += [f"{sol.alpha[j, k]:.12g}" for j in range(rank)]
            handle.write(",".join(cells) + "\n")
    finally:
        if own:
            handle.close()
