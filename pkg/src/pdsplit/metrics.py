"""Convergence diagnostics: the dual metric, residuals, gaps, rate certificates.

The dual block is measured in the metric M = (gamma/delta) * (I - gamma*delta*A A^T),
which is positive semidefinite exactly when gamma*delta*||A A^T|| <= 1.  The
combined norm ||(z, s)|| = sqrt(||z||^2 + ||s||_M^2) is the geometry in which
the splitting iteration is an averaged operator, so every certificate here is
stated in it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import IO, Iterable

import numpy as np

from .core import INF, ProblemSpec, as_vector
from .exceptions import (
    GeometryViolationError,
    HypothesisViolationError,
    UnsupportedMetricError,
)
from .linops import LinearMap

# Relative band below zero inside which m_norm_sq is treated as roundoff.
_PSD_BAND = 1e-10


@dataclass(frozen=True)
class MNormContext:
    """Step sizes and operator fixing the dual metric.

    ``semidefinite`` is set when gamma*delta*||A A^T|| == 1 within tolerance
    (requires ``norm_AAt``); the metric is then only a seminorm on the dual.
    """

    gamma: float
    delta: float
    A: LinearMap
    norm_AAt: float | None = None
    semidefinite: bool = field(init=False, default=False)

    def __post_init__(self):
        if not (self.gamma > 0 and self.delta > 0):
            raise ValueError("step sizes must be positive")
        if self.norm_AAt is not None:
            prod = self.gamma * self.delta * self.norm_AAt
            object.__setattr__(self, "semidefinite", abs(prod - 1.0) <= 1e-9)


def m_norm_sq(ctx: MNormContext, s) -> float:
    """<s, M s> computed matrix-free as (gamma/delta)(||s||^2 - gamma*delta*||A^T s||^2).

    Values inside [-1e-10 * ||s||^2, 0] are clamped to 0 (roundoff at the
    semidefinite boundary); anything below that band means M is not PSD and
    raises ``GeometryViolationError``.
    """
    s = np.asarray(s, dtype=float)
    ss = float(s @ s)
    ats = ctx.A.adjoint_apply(s)
    val = (ctx.gamma / ctx.delta) * (ss - ctx.gamma * ctx.delta * float(ats @ ats))
    if val < 0.0:
        if val < -_PSD_BAND * ss:
            raise GeometryViolationError(
                f"<s, M s> = {val} < 0: M is not positive semidefinite; "
                "the step sizes violate gamma*delta*||A A^T|| <= 1"
            )
        return 0.0
    return val


def combined_norm_sq(ctx: MNormContext, z, s) -> float:
    """||z||^2 + ||s||_M^2."""
    z = np.asarray(z, dtype=float)
    return float(z @ z) + m_norm_sq(ctx, s)


def combined_norm(ctx: MNormContext, z, s) -> float:
    return math.sqrt(combined_norm_sq(ctx, z, s))


def fixed_point_residual(ctx: MNormContext, state, nxt) -> float:
    """||T(z, s) - (z, s)|| in the combined norm, given one unrelaxed step."""
    return combined_norm(ctx, nxt.z - state.z, nxt.s - state.s)


def lagrangian(spec: ProblemSpec, x, s) -> float:
    """L(x, s) = f(x) + g(x) + <A x, s> - h*(s) - l*(s); may be +-inf."""
    if spec.h.conjugate_value is None:
        raise UnsupportedMetricError("h has no conjugate value oracle")
    if spec.lstar.value is None and not spec.lstar.is_zero:
        raise UnsupportedMetricError("l* has no value oracle")
    x = as_vector(x, spec.x_dim)
    s = as_vector(s, spec.s_dim, name="s")
    hstar = spec.h.conjugate_value(s)
    lstar = 0.0 if spec.lstar.is_zero else spec.lstar.value(s)
    if hstar == INF or lstar == INF:
        return -INF
    primal = spec.f.value(x) + spec.g.value(x)
    if primal == INF:
        return INF
    return primal + float(spec.A.apply(x) @ s) - hstar - lstar


@dataclass(frozen=True)
class GapCheck:
    lhs: float
    rhs: float
    holds: bool


def ergodic_gap_bound_check(
    spec: ProblemSpec,
    ctx: MNormContext,
    x_avg,
    s_avg,
    probe_x,
    probe_s,
    z0,
    s0,
    k: int,
    beta: float,
    tol: float = 1e-9,
) -> GapCheck:
    """Check L(x_avg, probe_s) - L(probe_x, s_avg) against its O(1/k) bound.

    The averages must be x_avg = mean(x^0..x^k) and s_avg = mean(s^1..s^{k+1});
    the bound is ||(z, s) - (z^0, s^0)||^2 / (2 (k+1) gamma) with
    z = probe_x - gamma*grad f(probe_x) - gamma*A^T probe_s.  Requires the run
    step gamma <= beta, else ``HypothesisViolationError``.
    """
    if ctx.gamma > beta * (1.0 + 1e-12):
        raise HypothesisViolationError(
            f"ergodic gap bound needs gamma <= beta (gamma={ctx.gamma}, beta={beta})"
        )
    probe_x = as_vector(probe_x, spec.x_dim, name="probe_x")
    probe_s = as_vector(probe_s, spec.s_dim, name="probe_s")
    z_probe = (
        probe_x
        - ctx.gamma * spec.f.gradient(probe_x)
        - ctx.gamma * spec.A.adjoint_apply(probe_s)
    )
    lhs = lagrangian(spec, x_avg, probe_s) - lagrangian(spec, probe_x, s_avg)
    rhs = combined_norm_sq(ctx, z_probe - z0, probe_s - s0) / (2.0 * (k + 1) * ctx.gamma)
    return GapCheck(lhs=lhs, rhs=rhs, holds=lhs <= rhs + tol)


def averagedness_alpha(gamma: float, beta: float) -> float:
    """Averagedness constant 2*beta / (4*beta - gamma), valid for 0 < gamma < 2*beta."""
    if not 0 < gamma < 2.0 * beta:
        raise ValueError(f"need 0 < gamma < 2*beta, got gamma={gamma}, beta={beta}")
    return 2.0 * beta / (4.0 * beta - gamma)


def averagedness_inequality_check(spec: ProblemSpec, steps, pairs: Iterable) -> float:
    """Numerically certify the one-step averagedness inequality.

    For each pair ((z1, s1), (z2, s2)) applies one splitting step to both and
    evaluates

        ||out-diff||^2 - ||in-diff||^2 + c * ||displacement-diff||^2,

    all in the combined norm, with c = (2*beta - gamma) / (2*beta).  Returns
    the maximum over pairs; a nonpositive value (up to roundoff) certifies the
    contraction.  When f = 0 (beta = inf) the coefficient becomes 1 and the
    same expression is the firm-nonexpansiveness inequality.
    """
    from .algorithms import SolverState, pd3o_step  # local import: avoids cycle

    beta = spec.beta
    gamma = steps.gamma
    coeff = 1.0 if beta == INF else (2.0 * beta - gamma) / (2.0 * beta)
    ctx = MNormContext(steps.gamma, steps.delta, spec.A)
    worst = -INF
    for (z1, s1), (z2, s2) in pairs:
        st1 = SolverState.fresh(spec, steps, as_vector(z1, spec.x_dim), as_vector(s1, spec.s_dim, "s"))
        st2 = SolverState.fresh(spec, steps, as_vector(z2, spec.x_dim), as_vector(s2, spec.s_dim, "s"))
        out1 = pd3o_step(st1, spec, steps)
        out2 = pd3o_step(st2, spec, steps)
        out_diff = combined_norm_sq(ctx, out1.z - out2.z, out1.s - out2.s)
        in_diff = combined_norm_sq(ctx, st1.z - st2.z, st1.s - st2.s)
        disp = combined_norm_sq(
            ctx,
            (out1.z - st1.z) - (out2.z - st2.z),
            (out1.s - st1.s) - (out2.s - st2.s),
        )
        worst = max(worst, out_diff - in_diff + coeff * disp)
    return worst


def sublinear_rate_bound(k: int, init_dist_sq: float, beta: float, gamma: float) -> float:
    """Right-hand side (2*beta / (2*beta - gamma)) * init_dist_sq / (k + 1)."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    if init_dist_sq < 0:
        raise ValueError("init_dist_sq must be nonnegative")
    if beta == INF:
        factor = 1.0
    else:
        if not gamma < 2.0 * beta:
            raise ValueError(f"need gamma < 2*beta, got gamma={gamma}, beta={beta}")
        factor = 2.0 * beta / (2.0 * beta - gamma)
    return factor * init_dist_sq / (k + 1)


def linear_rate_rho(
    gamma: float,
    beta: float,
    tau_f: float,
    tau_g: float,
    tau_hstar: float,
    tau_lstar: float,
    Lg: float,
) -> float:
    """Linear contraction factor for the strongly convex regime.

    rho = max( (1 - (2*gamma - gamma^2/beta) * tau_lstar) / (1 + 2*gamma*tau_hstar),
               1 - ((2*gamma - gamma^2/beta) * tau_f + 2*gamma*tau_g) / (1 + gamma*Lg) ).

    rho < 1 exactly when tau_hstar + tau_lstar > 0 and tau_f + tau_g > 0 (with
    finite Lg).  The moduli are declared by the caller per instance.
    """
    if not gamma < 2.0 * beta:
        raise ValueError(f"need gamma < 2*beta, got gamma={gamma}, beta={beta}")
    for name, v in (("tau_f", tau_f), ("tau_g", tau_g), ("tau_hstar", tau_hstar),
                    ("tau_lstar", tau_lstar), ("Lg", Lg)):
        if v < 0:
            raise ValueError(f"{name} must be nonnegative")
    slope = 2.0 * gamma - gamma * gamma / beta
    branch_dual = (1.0 - slope * tau_lstar) / (1.0 + 2.0 * gamma * tau_hstar)
    denom = 1.0 + gamma * Lg
    branch_primal = 1.0 if denom == INF else 1.0 - (slope * tau_f + 2.0 * gamma * tau_g) / denom
    return max(branch_dual, branch_primal)


# --- convergence history ------------------------------------------------------

CSV_HEADER = ("iter", "objective", "residual_im", "dist_to_ref", "gap", "wall_time_s")


def _fmt(value: float | None) -> str:
    return "" if value is None else format(value, ".17g")


@dataclass
class IterationRow:
    iter: int
    objective: float
    residual_im: float
    dist_to_ref: float | None = None
    gap: float | None = None
    wall_time_s: float = 0.0


@dataclass
class ConvergenceRecord:
    """Per-iteration diagnostics plus run metadata.

    ``rows`` is thinned by the solver's log-every policy; ``metadata`` carries
    the algorithm, step sizes, problem descriptor, oracle-call counters and
    final-state summaries.  ``final_state`` is the in-memory last iterate and
    is not serialized.
    """

    rows: list[IterationRow] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    final_state: object | None = None

    def iters(self) -> np.ndarray:
        return np.array([r.iter for r in self.rows], dtype=int)

    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.rows])

    def residuals(self) -> np.ndarray:
        return np.array([r.residual_im for r in self.rows])

    def write_csv(self, fh: IO[str], series_id: str | None = None) -> None:
        """Write rows in the stable CSV schema (17 significant digits)."""
        writer = csv.writer(fh, lineterminator="\n")
        header = CSV_HEADER if series_id is None else ("series_id",) + CSV_HEADER
        writer.writerow(header)
        for r in self.rows:
            cells = [
                str(r.iter),
                _fmt(r.objective),
                _fmt(r.residual_im),
                _fmt(r.dist_to_ref),
                _fmt(r.gap),
                _fmt(r.wall_time_s),
            ]
            if series_id is not None:
                cells.insert(0, series_id)
            writer.writerow(cells)
