"""Oracle contracts and the problem bundle consumed by every solver and metric.

A problem instance is ``minimize f(x) + g(x) + (h [] l)(A x)`` with f smooth
(beta-cocoercive gradient), g and h prox-capable, l entering only through the
gradient of its conjugate, and A a linear operator.  All oracles are
deterministic pure functions, so trajectories are bitwise reproducible; every
term is immutable after construction and safe to share between solver runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exceptions import DimensionMismatchError, UnsupportedObjectiveError
from .linops import LinearMap

INF = math.inf


def as_vector(x, dim: int | None = None, name: str = "x") -> np.ndarray:
    """Coerce to a finite 1-D float vector, checking the dimension if given."""
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.ndim != 1:
        raise DimensionMismatchError(f"{name} must be a 1-D vector, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise DimensionMismatchError(f"{name} must have length {dim}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


@dataclass(frozen=True)
class SmoothTerm:
    """Differentiable convex term: value and gradient oracles plus its beta.

    ``beta`` is the cocoercivity constant of the gradient,
    <x1-x2, grad(x1)-grad(x2)> >= beta * ||grad(x1)-grad(x2)||^2,
    equivalently 1/beta is a Lipschitz constant of the gradient.  It is
    declared by the caller, not estimated.
    """

    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    beta: float
    is_zero: bool = False

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")


@dataclass(frozen=True)
class ProxTerm:
    """Prox-capable convex term.

    ``prox(v, t)`` must return the minimizer of t*g(x) + ||x - v||^2 / 2.
    ``value`` may return +inf (indicators return exactly 0 or +inf).
    ``conjugate_value``, when present, is the Fenchel conjugate g*.
    """

    value: Callable[[np.ndarray], float]
    prox: Callable[[np.ndarray, float], np.ndarray]
    conjugate_value: Callable[[np.ndarray], float] | None = None
    is_zero: bool = False


@dataclass(frozen=True)
class ConjugateSmoothTerm:
    """The third term's smoothing component l, seen through grad(l*).

    With ``is_zero`` set, l is the indicator of the origin, l* == 0, and the
    gradient oracle is identically zero; this is the common case and the only
    one for which objective values are computed.  ``beta_l`` is the declared
    cocoercivity constant of grad(l*) in the inverse dual metric.
    """

    gradient: Callable[[np.ndarray], np.ndarray]
    beta_l: float = INF
    is_zero: bool = True
    value: Callable[[np.ndarray], float] | None = None


def zero_smooth() -> SmoothTerm:
    """The zero smooth term (f = 0); cocoercive with any beta, so beta = inf."""
    return SmoothTerm(
        value=lambda x: 0.0,
        gradient=np.zeros_like,
        beta=INF,
        is_zero=True,
    )


def zero_conjugate_smooth() -> ConjugateSmoothTerm:
    """l = indicator of the origin, so l* = 0 and grad(l*) = 0."""
    return ConjugateSmoothTerm(
        gradient=np.zeros_like,
        beta_l=INF,
        is_zero=True,
        value=lambda s: 0.0,
    )


@dataclass(frozen=True)
class ProblemSpec:
    """Bundle of oracles defining one composite minimization instance.

    ``A`` maps primal vectors (length ``x_dim``) to dual vectors (length
    ``s_dim``); all oracle dimensions must be consistent with it.
    """

    f: SmoothTerm
    g: ProxTerm
    h: ProxTerm
    lstar: ConjugateSmoothTerm
    A: LinearMap

    @property
    def x_dim(self) -> int:
        return self.A.in_dim

    @property
    def s_dim(self) -> int:
        return self.A.out_dim

    @property
    def beta(self) -> float:
        return self.f.beta


def evaluate_objective(spec: ProblemSpec, x) -> float:
    """Objective f(x) + g(x) + h(A x); may be +inf if an indicator is violated.

    Only defined when l is the indicator of the origin (the infimal
    convolution then collapses to h); anything else raises
    ``UnsupportedObjectiveError``.
    """
    if not spec.lstar.is_zero:
        raise UnsupportedObjectiveError(
            "objective values are only computed when l is the indicator of 0"
        )
    x = as_vector(x, spec.x_dim)
    total = spec.f.value(x) + spec.g.value(x)
    if total == INF:
        return INF
    return total + spec.h.value(spec.A.apply(x))


@dataclass(frozen=True)
class CocoercivityReport:
    ok: bool
    worst_ratio: float


def check_cocoercivity(
    term: SmoothTerm,
    samples: int,
    dim: int,
    rng_seed: int = 0,
    scale: float = 1.0,
    slack: float = 1e-12,
) -> CocoercivityReport:
    """Sample random pairs and test <dx, dgrad> >= beta * ||dgrad||^2.

    Returns whether the inequality held for every pair (with ``slack``
    absolute tolerance) and the worst observed ratio <dx,dgrad>/||dgrad||^2.
    A sampling check, not a certificate: it can expose a wrong beta but
    cannot prove a correct one.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(rng_seed)
    ok = True
    worst = INF
    for _ in range(samples):
        x1 = scale * rng.standard_normal(dim)
        x2 = scale * rng.standard_normal(dim)
        dgrad = term.gradient(x1) - term.gradient(x2)
        denom = float(dgrad @ dgrad)
        if denom == 0.0:
            continue
        inner = float((x1 - x2) @ dgrad)
        ratio = inner / denom
        worst = min(worst, ratio)
        if inner < term.beta * denom - slack:
            ok = False
    return CocoercivityReport(ok=ok, worst_ratio=worst)
