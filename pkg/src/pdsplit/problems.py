"""Reproducible benchmark instances and tiny analytic problems for oracle tests.

Instance generation is pure given (sizes, seed): sampling uses numpy's PCG64
generator with a fixed stream order (design matrix row-major, then the ground
truth, then the noise), so regenerating with the same seed is bit-identical
across runs and machines.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .algorithms import AlgorithmId, StepSizes, solve
from .core import INF, ProblemSpec, SmoothTerm, zero_conjugate_smooth
from .linops import (
    DenseMatrixOp,
    DifferenceOp,
    IdentityOp,
    ScaledIdentityOp,
    estimate_norm_AAt,
)
from .prox import l1, squared_l2, zero_prox

CACHE_ENV_VAR = "PDSPLIT_CACHE_DIR"


def quadratic_distance_term(c) -> SmoothTerm:
    """f(x) = ||x - c||^2 / 2; the gradient is x - c, cocoercive with beta = 1."""
    c = np.asarray(c, dtype=float)
    return SmoothTerm(
        value=lambda x: 0.5 * float((x - c) @ (x - c)),
        gradient=lambda x: x - c,
        beta=1.0,
    )


def least_squares_term(A, b, ridge: float = 0.0, beta: float | None = None) -> SmoothTerm:
    """f(x) = ||A x - b||^2 / 2 + ridge * ||x||^2, with a declared beta.

    When ``beta`` is omitted it is computed as 1 / (||A^T A|| + 2*ridge) from
    a safety-inflated power-iteration estimate, which keeps the declared
    cocoercivity valid.
    """
    A = np.ascontiguousarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if beta is None:
        lip = estimate_norm_AAt(DenseMatrixOp(A), tol=1e-9) + 2.0 * ridge
        beta = 1.0 / lip

    def value(x):
        r = A @ x - b
        out = 0.5 * float(r @ r)
        if ridge:
            out += ridge * float(x @ x)
        return out

    def gradient(x):
        g = A.T @ (A @ x - b)
        if ridge:
            g = g + 2.0 * ridge * x
        return g

    return SmoothTerm(value=value, gradient=gradient, beta=beta)


def _instance_key(descriptor: dict) -> str:
    payload = json.dumps(descriptor, sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()[:16]


@dataclass(frozen=True)
class ProblemInstance:
    """A generated benchmark problem plus the constants solvers need."""

    spec: ProblemSpec
    beta: float
    norm_AAt: float  # of the operator coupled to h
    descriptor: dict
    instance_key: str


@dataclass(frozen=True)
class FusedLassoInstance(ProblemInstance):
    A: np.ndarray = None
    b: np.ndarray = None
    x_true: np.ndarray = None
    mu1: float = 0.0
    mu2: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class ElasticNetInstance(ProblemInstance):
    A: np.ndarray = None
    b: np.ndarray = None
    mu1: float = 0.0
    mu2: float = 0.0
    a_scale: float = 1.0
    seed: int = 0
    tau_f: float = 0.0
    tau_g: float = 0.0
    tau_lstar: float = 0.0
    L_g: float = 0.0

    def tau_hstar(self, gamma: float, delta: float) -> float:
        """Strong-monotonicity modulus of h* measured in the dual metric.

        h* = ||.||^2 / 2 is 1-strongly monotone in the Euclidean norm; the
        metric rescales that to delta / (gamma * (1 - gamma*delta*a_scale^2)),
        which requires the metric to be positive definite.
        """
        margin = 1.0 - gamma * delta * self.a_scale**2
        if margin <= 0:
            raise ValueError("dual metric is singular: gamma*delta*||AA^T|| >= 1")
        return delta / (gamma * margin)

    def analytic_solution(self) -> tuple[np.ndarray, np.ndarray]:
        """Exact primal/dual optimum; only available for the smooth case mu1 = 0.

        Solves (A^T A + (2*mu2 + a_scale^2) I) x = A^T b directly, with the
        dual s = a_scale * x.
        """
        if self.mu1 != 0.0:
            raise ValueError("closed form requires mu1 = 0")
        gram = self.A.T @ self.A + (2.0 * self.mu2 + self.a_scale**2) * np.eye(
            self.A.shape[1]
        )
        x = np.linalg.solve(gram, self.A.T @ self.b)
        return x, self.a_scale * x


@dataclass(frozen=True)
class ToyQuadraticInstance(ProblemInstance):
    c: np.ndarray = None
    seed: int = 0


def gen_fused_lasso(
    n: int = 500,
    p: int = 10000,
    seed: int = 0,
    noise_var: float = 0.01,
    mu1: float = 20.0,
    mu2: float = 200.0,
    norm_tol: float = 1e-7,
) -> FusedLassoInstance:
    """Least squares + l1 on coefficients + l1 on consecutive differences.

    The design matrix is iid standard Gaussian.  The ground truth is piecewise
    constant over 20 equal blocks with values drawn from {-1, 0, 1} (zero with
    probability 1/2, each sign 1/4), and b = A x_true + Gaussian noise of the
    given variance.  The declared beta is the reciprocal of a safety-inflated
    power-iteration estimate of ||A^T A||.
    """
    if n < 2 or p < 2:
        raise ValueError("need n, p >= 2")
    if noise_var <= 0 or mu1 <= 0 or mu2 <= 0:
        raise ValueError("noise_var, mu1, mu2 must be positive")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, p))
    n_blocks = min(20, p)
    values = rng.choice(np.array([-1.0, 0.0, 1.0]), size=n_blocks, p=(0.25, 0.5, 0.25))
    base, rem = divmod(p, n_blocks)
    lengths = [base + 1] * rem + [base] * (n_blocks - rem)
    x_true = np.repeat(values, lengths)
    b = A @ x_true + rng.normal(0.0, np.sqrt(noise_var), size=n)

    f = least_squares_term(A, b)
    D = DifferenceOp(p)
    norm_D = estimate_norm_AAt(D, tol=norm_tol, max_iters=400_000)
    descriptor = {
        "kind": "fused-lasso", "n": n, "p": p, "seed": seed,
        "noise_var": noise_var, "mu1": mu1, "mu2": mu2,
    }
    spec = ProblemSpec(f=f, g=l1(mu1), h=l1(mu2), lstar=zero_conjugate_smooth(), A=D)
    return FusedLassoInstance(
        spec=spec, beta=f.beta, norm_AAt=norm_D, descriptor=descriptor,
        instance_key=_instance_key(descriptor), A=A, b=b, x_true=x_true,
        mu1=mu1, mu2=mu2, seed=seed,
    )


def gen_elastic_net_strongly_convex(
    n: int = 50,
    p: int = 50,
    seed: int = 0,
    mu1: float = 0.0,
    mu2: float = 1.0,
    a_scale: float = 1.0,
) -> ElasticNetInstance:
    """Ridge-regularized least squares with an l1 term and a quadratic dual term.

    f = ||A x - b||^2 / 2 + mu2 * ||x||^2 is strongly convex with
    tau_f = lambda_min(A^T A) + 2*mu2 (dense eigensolve; this generator is for
    desk scale), g = mu1 * ||.||_1, and h = ||.||^2 / 2 composed with a_scale * I
    so the dual block contracts too.  The moduli needed by the linear-rate
    factor are attached.  g has a Lipschitz gradient only when mu1 = 0; for
    mu1 > 0 the declared L_g is infinite and no linear-rate certificate is
    claimed.
    """
    if n < 2 or p < 2:
        raise ValueError("need n, p >= 2")
    if mu1 < 0 or mu2 < 0 or a_scale <= 0:
        raise ValueError("a_scale must be positive, mu1 and mu2 nonnegative")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, p))
    x_true = rng.standard_normal(p)
    b = A @ x_true + 0.1 * rng.standard_normal(n)

    eigs = np.linalg.eigvalsh(A.T @ A)
    lam_min = max(float(eigs[0]), 0.0)
    lam_max = float(eigs[-1])
    beta = 1.0 / (lam_max * (1.0 + 1e-12) + 2.0 * mu2)
    f = least_squares_term(A, b, ridge=mu2, beta=beta)
    g = l1(mu1) if mu1 > 0 else zero_prox()
    descriptor = {
        "kind": "elastic-net", "n": n, "p": p, "seed": seed,
        "mu1": mu1, "mu2": mu2, "a_scale": a_scale,
    }
    spec = ProblemSpec(
        f=f, g=g, h=squared_l2(0.5), lstar=zero_conjugate_smooth(),
        A=ScaledIdentityOp(p, a_scale),
    )
    return ElasticNetInstance(
        spec=spec, beta=beta, norm_AAt=a_scale**2, descriptor=descriptor,
        instance_key=_instance_key(descriptor), A=A, b=b, mu1=mu1, mu2=mu2,
        a_scale=a_scale, seed=seed,
        tau_f=lam_min + 2.0 * mu2, tau_g=0.0, tau_lstar=0.0,
        L_g=0.0 if mu1 == 0 else INF,
    )


def gen_toy_quadratic(dim: int = 10, seed: int = 0) -> ToyQuadraticInstance:
    """Unconstrained quadratic ||x - c||^2 / 2 with g = h = 0 and A = I."""
    if dim < 1:
        raise ValueError("dim must be positive")
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(dim)
    descriptor = {"kind": "toy-quadratic", "n": dim, "seed": seed}
    spec = ProblemSpec(
        f=quadratic_distance_term(c), g=zero_prox(), h=zero_prox(),
        lstar=zero_conjugate_smooth(), A=IdentityOp(dim),
    )
    return ToyQuadraticInstance(
        spec=spec, beta=1.0, norm_AAt=1.0, descriptor=descriptor,
        instance_key=_instance_key(descriptor), c=c, seed=seed,
    )


# --- long-run reference solutions with a disk cache ----------------------------


@dataclass(frozen=True)
class ReferenceSolution:
    x: np.ndarray
    s: np.ndarray
    objective: float
    iters: int
    gamma: float
    delta: float
    instance_key: str


def cache_directory(cache_dir=None) -> Path:
    if cache_dir is not None:
        return Path(cache_dir)
    env = os.environ.get(CACHE_ENV_VAR)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "pdsplit"


def reference_solution(
    instance: ProblemInstance, iters: int = 20000, cache_dir=None
) -> ReferenceSolution:
    """Near-optimal primal-dual pair from a long run, cached to disk.

    Uses gamma = 1.5*beta and gamma*delta*||A A^T|| = 0.5 internally, runs the
    plain iteration for ``iters`` iterations, and stores (x, s, objective) in
    an .npz keyed by the instance hash and iteration count.  The cache write
    is atomic (write to a temp file, then rename), so concurrent generation
    of the same reference is safe.
    """
    if iters < 1:
        raise ValueError("iters must be positive")
    directory = cache_directory(cache_dir)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"ref-{instance.instance_key}-{iters}.npz"

    gamma = 1.5 * instance.beta
    norm = instance.norm_AAt
    delta = 0.5 / (gamma * norm) if norm > 0 else 1.0 / gamma

    if path.exists():
        with np.load(path) as data:
            if str(data["instance_key"]) == instance.instance_key:
                return ReferenceSolution(
                    x=data["x"], s=data["s"], objective=float(data["objective"]),
                    iters=int(data["iters"]), gamma=float(data["gamma"]),
                    delta=float(data["delta"]), instance_key=instance.instance_key,
                )

    record = solve(
        instance.spec, AlgorithmId.PD3O, StepSizes(gamma, delta),
        max_iters=iters, residual_tol=0.0, norm_AAt=norm, log_every=0,
        descriptor=instance.descriptor,
    )
    state = record.final_state
    ref = ReferenceSolution(
        x=state.x, s=state.s, objective=record.metadata["final_objective"],
        iters=iters, gamma=gamma, delta=delta, instance_key=instance.instance_key,
    )
    fd, tmp_name = tempfile.mkstemp(dir=directory, suffix=".npz.tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            np.savez(
                fh, x=ref.x, s=ref.s, objective=ref.objective, iters=iters,
                gamma=gamma, delta=delta, instance_key=instance.instance_key,
            )
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return ref
