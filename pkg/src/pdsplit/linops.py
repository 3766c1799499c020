"""Linear operators with adjoints, plus spectral-norm estimation.

Every operator knows its input/output dimensions and exposes ``apply`` and
``adjoint_apply``.  ``estimate_norm_AAt`` runs power iteration on s -> A(A^T s)
to produce the operator-norm bound that the step-size conditions consume.
"""

from __future__ import annotations

import numpy as np

from .exceptions import DimensionMismatchError, NormEstimateError


class LinearMap:
    """Base class: a bounded linear operator between coordinate spaces."""

    def __init__(self, in_dim: int, out_dim: int):
        if in_dim < 1 or out_dim < 1:
            raise ValueError("operator dimensions must be positive")
        self.in_dim = int(in_dim)
        self.out_dim = int(out_dim)

    @property
    def is_identity(self) -> bool:
        return False

    def apply(self, x: np.ndarray) -> np.ndarray:
        self._check(x, self.in_dim, "apply")
        return self._apply(np.asarray(x, dtype=float))

    def adjoint_apply(self, s: np.ndarray) -> np.ndarray:
        self._check(s, self.out_dim, "adjoint_apply")
        return self._adjoint(np.asarray(s, dtype=float))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.apply(x)

    def _apply(self, x):
        raise NotImplementedError

    def _adjoint(self, s):
        raise NotImplementedError

    def _check(self, v, dim, what):
        v = np.asarray(v)
        if v.ndim != 1 or v.shape[0] != dim:
            raise DimensionMismatchError(
                f"{type(self).__name__}.{what}: expected a vector of length {dim}, "
                f"got shape {v.shape}"
            )


class DenseMatrixOp(LinearMap):
    """Operator backed by an explicit (row-major) dense matrix."""

    def __init__(self, matrix: np.ndarray):
        m = np.ascontiguousarray(matrix, dtype=float)
        if m.ndim != 2:
            raise ValueError("matrix must be 2-D")
        super().__init__(m.shape[1], m.shape[0])
        self.matrix = m

    def _apply(self, x):
        return self.matrix @ x

    def _adjoint(self, s):
        return self.matrix.T @ s


class IdentityOp(LinearMap):
    """The identity on a space of the given dimension."""

    def __init__(self, dim: int):
        super().__init__(dim, dim)

    @property
    def is_identity(self) -> bool:
        return True

    def _apply(self, x):
        return x.copy()

    def _adjoint(self, s):
        return s.copy()


class ScaledIdentityOp(LinearMap):
    """c * I; useful as a coupling operator with a tunable norm."""

    def __init__(self, dim: int, scale: float):
        super().__init__(dim, dim)
        self.scale = float(scale)

    def _apply(self, x):
        return self.scale * x

    def _adjoint(self, s):
        return self.scale * s


class ZeroOp(LinearMap):
    """The zero map (decouples the dual block entirely)."""

    def __init__(self, in_dim: int, out_dim: int):
        super().__init__(in_dim, out_dim)

    def _apply(self, x):
        return np.zeros(self.out_dim)

    def _adjoint(self, s):
        return np.zeros(self.in_dim)


class DifferenceOp(LinearMap):
    """First-order difference operator, (Dx)_i = x_{i+1} - x_i.

    Matrix-free: the bidiagonal matrix is never stored, so the input
    dimension p can be large.  Output dimension is p - 1.
    """

    def __init__(self, p: int):
        if p < 2:
            raise ValueError("DifferenceOp needs p >= 2")
        super().__init__(p, p - 1)

    def _apply(self, x):
        return np.diff(x)

    def _adjoint(self, s):
        out = np.empty(self.in_dim)
        out[0] = -s[0]
        out[-1] = s[-1]
        out[1:-1] = s[:-1] - s[1:]
        return out


def apply(op: LinearMap, x: np.ndarray) -> np.ndarray:
    """Functional form of ``op.apply``."""
    return op.apply(x)


def adjoint_apply(op: LinearMap, s: np.ndarray) -> np.ndarray:
    """Functional form of ``op.adjoint_apply``."""
    return op.adjoint_apply(s)


def estimate_norm_AAt(
    op: LinearMap,
    tol: float = 1e-9,
    max_iters: int = 200_000,
    rng_seed: int = 0,
) -> float:
    """Estimate ||A A^T|| = max_{||s||=1} ||A A^T s|| by power iteration.

    Iterates s -> A(A^T s) from a seeded random unit vector and stops once two
    successive Rayleigh quotients differ by less than ``tol`` times the current
    one.  The returned value is inflated by a factor (1 + 10 * tol): step-size
    conditions need an upper bound, and a slight overestimate preserves the
    convergence guarantees where a slight underestimate would void them.

    Deterministic for a fixed ``rng_seed``.  Raises ``NormEstimateError``
    (carrying the last estimate) when the tolerance is not met in
    ``max_iters`` iterations.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iters < 1:
        raise ValueError("max_iters must be positive")
    rng = np.random.default_rng(rng_seed)
    s = rng.standard_normal(op.out_dim)
    norm_s = np.linalg.norm(s)
    if norm_s == 0.0:  # out_dim >= 1 makes this unreachable in practice
        s = np.ones(op.out_dim)
        norm_s = np.linalg.norm(s)
    s /= norm_s

    rq_prev = None
    rq = 0.0
    for _ in range(max_iters):
        w = op.apply(op.adjoint_apply(s))
        rq = float(s @ w)  # Rayleigh quotient of AA^T at the unit vector s
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0
        s = w / norm_w
        if rq_prev is not None and abs(rq - rq_prev) <= tol * max(abs(rq), 1e-300):
            return rq * (1.0 + 10.0 * tol)
        rq_prev = rq
    raise NormEstimateError(
        f"power iteration did not converge to tol={tol} in {max_iters} iterations",
        last_estimate=rq,
    )
