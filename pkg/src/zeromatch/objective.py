"""Matching objective, its regularized variant, gradients and the exact
line search used by the Frank-Wolfe solvers.

The pairwise potential measures weighted squared residuals between each
graph's edge attributes and the attributes transported from the other graph
through the correspondence. Nothing here ever materializes an mn x mn
affinity structure; all evaluations are O(m^2 n + m n^2) matrix products.
"""

from dataclasses import dataclass

import numpy as np

_ALPHA_NODES = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
_VANDERMONDE = np.vander(_ALPHA_NODES, 5, increasing=True)


@dataclass(frozen=True)
class ObjectiveValue:
    total: float
    unary: float
    pairwise: float
    regularizer: float = 0.0


def _as_matrix(P):
    mat = P.mat if hasattr(P, "mat") else np.asarray(P, dtype=float)
    return np.asarray(mat, dtype=float)


def _check_shape(prob, P):
    if P.shape != (prob.m, prob.n):
        raise ValueError(f"correspondence shape {P.shape} does not match "
                         f"problem {prob.m}x{prob.n}")


def objective(prob, P):
    """Unary plus pairwise potential at correspondence P."""
    P = _as_matrix(P)
    _check_shape(prob, P)
    unary = float(np.sum(prob.D * P))
    resA = prob.attrA - P @ prob.attrB @ P.T
    resB = prob.attrB - P.T @ prob.attrA @ P
    pairwise = float(np.sum(prob.adjA * resA * resA)
                     + np.sum(prob.adjB * resB * resB))
    total = prob.lambda1 * unary + prob.lambda2 * pairwise
    return ObjectiveValue(total=total, unary=unary, pairwise=pairwise)


def objective_reg(prob, P, k):
    """Objective plus the soft cardinality penalty lambda0*(mass - k)^2."""
    P = _as_matrix(P)
    base = objective(prob, P)
    reg = float((P.sum() - k) ** 2)
    return ObjectiveValue(total=base.total + prob.lambda0 * reg,
                          unary=base.unary, pairwise=base.pairwise,
                          regularizer=reg)


def gradient(prob, P):
    """Gradient of the objective; valid for symmetric adjacency/attributes."""
    P = _as_matrix(P)
    _check_shape(prob, P)
    W1 = 4.0 * (P @ prob.attrB @ P.T - prob.attrA) * prob.adjA
    W2 = 4.0 * (P.T @ prob.attrA @ P - prob.attrB) * prob.adjB
    return prob.lambda1 * prob.D \
        + prob.lambda2 * (W1 @ P @ prob.attrB.T + prob.attrA @ P @ W2.T)


def gradient_reg(prob, P, k):
    """Gradient of the regularized objective."""
    P = _as_matrix(P)
    g = gradient(prob, P)
    return g + 2.0 * prob.lambda0 * (P.sum() - k)


def line_search(prob, P, P_next, reg_k=None):
    """Exact minimizer of phi(alpha) = F(P + alpha (P_next - P)) on [0, 1].

    phi is a quartic for scalar edge attributes; its five coefficients are
    recovered from samples at alpha in {0, 1/4, 1/2, 3/4, 1} and the minimum
    is taken over the endpoints and the real roots of the cubic derivative.
    Never returns a step with phi(alpha) above phi(0) or phi(1); a constant
    phi (e.g. P_next == P) yields 0 by convention.
    """
    P = _as_matrix(P)
    P_next = _as_matrix(P_next)
    if P.shape != P_next.shape:
        raise ValueError("P and P_next must have the same shape")
    delta = P_next - P

    if reg_k is None:
        phi = lambda a: objective(prob, P + a * delta).total
    else:
        phi = lambda a: objective_reg(prob, P + a * delta, reg_k).total

    if not np.any(delta):
        return 0.0

    samples = np.array([phi(a) for a in _ALPHA_NODES])
    if not np.all(np.isfinite(samples)):
        raise ValueError("objective is non-finite along the search direction")
    coeffs = np.linalg.solve(_VANDERMONDE, samples)

    deriv = np.array([coeffs[1], 2 * coeffs[2], 3 * coeffs[3], 4 * coeffs[4]])
    candidates = [1.0]
    if np.any(deriv != 0.0):
        roots = np.roots(deriv[::-1])
        for r in roots:
            if abs(r.imag) < 1e-9 and 0.0 < r.real < 1.0:
                candidates.append(float(r.real))

    best_alpha, best_val = 0.0, samples[0]
    for a in candidates:
        val = samples[4] if a == 1.0 else phi(a)
        if val < best_val:
            best_alpha, best_val = a, val
    return best_alpha
