"""Frank-Wolfe solvers over the relaxed partial-permutation polytopes.

``frank_wolfe_zac`` keeps the total assignment mass pinned to k by solving a
k-cardinality LAP at every iteration. ``frank_wolfe_zacr`` replaces the hard
cardinality constraint with the soft penalty lambda0*(mass - k)^2 and
alternates Frank-Wolfe minimization with the re-estimate k <- mass(P); its
subproblems are solved exactly over the doubly-substochastic polytope by a
combinatorial LAP padding rather than a generic LP method, which is both
exact (the polytope is integral) and faster.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .core import Correspondence
from .lap import solve_klap, solve_substochastic
from .objective import gradient, gradient_reg, line_search, objective, objective_reg


class MatchCollapsedError(ValueError):
    """The regularized alternation drove the assignment mass to zero."""


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = 300
    tol_rel: float = 1e-8
    tol_gap: float = 1e-8
    init: np.ndarray = None      # uniform start when None
    max_outer: int = 10          # ZACR alternation rounds
    tol_k: float = 0.5           # ZACR: stop when k moves less than this
    keep_iterates: bool = False

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.tol_rel <= 0 or self.tol_gap <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class SolveReport:
    final_continuous: Correspondence
    final_binary: Correspondence
    objective_trace: list
    iterations: int
    k_final: int
    elapsed: float
    iter_times: list = field(default_factory=list)
    iterates: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def to_json_obj(self, include_timing=True):
        obj = {
            "k": self.k_final,
            "iterations": self.iterations,
            "objectiveTrace": self.objective_trace,
            "pairs": [list(p) for p in self.final_binary.pairs()],
            "warnings": list(self.warnings),
        }
        if include_timing:
            obj["elapsedSeconds"] = self.elapsed
        return obj


def _uniform_start(m, n, mass):
    return np.full((m, n), mass / (m * n))


def _fw_loop(prob, P, cfg, value_fn, grad_fn, subproblem_fn, reg_k, trace,
             iter_times, iterates):
    """Shared Frank-Wolfe descent; mutates trace/iter_times/iterates."""
    m, n = P.shape
    f_prev = trace[-1]
    iters = 0
    for _ in range(cfg.max_iter):
        t0 = time.perf_counter()
        G = grad_fn(P)
        tilde = subproblem_fn(G).to_matrix(m, n)
        gap = float(np.sum(G * (P - tilde)))
        if gap < cfg.tol_gap:
            iter_times.append(time.perf_counter() - t0)
            break
        alpha = line_search(prob, P, tilde, reg_k=reg_k)
        P = P + alpha * (tilde - P)
        f = value_fn(P)
        trace.append(f)
        iter_times.append(time.perf_counter() - t0)
        iters += 1
        if iterates is not None:
            iterates.append(P.copy())
        if f_prev - f < cfg.tol_rel * max(1.0, abs(f_prev)):
            break
        f_prev = f
    return P, iters


def frank_wolfe_zac(prob, k, cfg=None):
    """Minimize the matching objective at exactly k assignments."""
    cfg = cfg or SolverConfig()
    if not 1 <= k <= prob.m:
        raise ValueError(f"cardinality k={k} out of range [1, {prob.m}]")
    t_start = time.perf_counter()
    m, n = prob.m, prob.n
    P = np.array(cfg.init, dtype=float) if cfg.init is not None \
        else _uniform_start(m, n, k)

    trace = [objective(prob, P).total]
    iter_times, iterates = [], ([P.copy()] if cfg.keep_iterates else None)
    P, iters = _fw_loop(
        prob, P, cfg,
        value_fn=lambda Q: objective(prob, Q).total,
        grad_fn=lambda Q: gradient(prob, Q),
        subproblem_fn=lambda G: solve_klap(G, k),
        reg_k=None, trace=trace, iter_times=iter_times, iterates=iterates)

    binary = discretize(P, k)
    return SolveReport(
        final_continuous=Correspondence(mat=np.clip(P, 0.0, 1.0), kind="continuous"),
        final_binary=binary,
        objective_trace=trace, iterations=iters, k_final=k,
        elapsed=time.perf_counter() - t_start,
        iter_times=iter_times, iterates=iterates or [])


def frank_wolfe_zacr(prob, k0, cfg=None):
    """Minimize the soft-cardinality objective, alternating with k updates.

    k stays real-valued between rounds (the mass of a continuous iterate is
    fractional) and is rounded only for the final discretization.
    """
    cfg = cfg or SolverConfig()
    if k0 < 1:
        raise ValueError(f"initial cardinality k0={k0} must be >= 1")
    t_start = time.perf_counter()
    m, n = prob.m, prob.n
    k = float(k0)
    P = np.array(cfg.init, dtype=float) if cfg.init is not None \
        else _uniform_start(m, n, min(float(k0), float(m)))

    trace = [objective_reg(prob, P, k).total]
    iter_times, iterates = [], ([P.copy()] if cfg.keep_iterates else None)
    total_iters = 0
    for _ in range(cfg.max_outer):
        P, iters = _fw_loop(
            prob, P, cfg,
            value_fn=lambda Q, kk=k: objective_reg(prob, Q, kk).total,
            grad_fn=lambda Q, kk=k: gradient_reg(prob, Q, kk),
            subproblem_fn=solve_substochastic,
            reg_k=k, trace=trace, iter_times=iter_times, iterates=iterates)
        total_iters += iters
        k_new = float(P.sum())
        # re-centering the penalty at the current mass never increases it
        trace.append(objective_reg(prob, P, k_new).total)
        moved = abs(k_new - k)
        k = k_new
        if moved < cfg.tol_k:
            break

    k_final = int(np.floor(k + 0.5))
    if k_final == 0:
        raise MatchCollapsedError("assignment mass collapsed to zero during "
                                  "the cardinality alternation")
    binary = discretize(P, k_final)
    return SolveReport(
        final_continuous=Correspondence(mat=np.clip(P, 0.0, 1.0), kind="continuous"),
        final_binary=binary,
        objective_trace=trace, iterations=total_iters, k_final=k_final,
        elapsed=time.perf_counter() - t_start,
        iter_times=iter_times, iterates=iterates or [])


def discretize(P_cont, k):
    """Binary partial permutation of cardinality k with maximal mass on P."""
    mat = P_cont.mat if hasattr(P_cont, "mat") else np.asarray(P_cont, dtype=float)
    m, n = mat.shape
    if k > min(m, n):
        raise ValueError(f"cardinality k={k} exceeds matrix size {m}x{n}")
    assignment = solve_klap(-mat, k) if m <= n else solve_klap(-mat.T, k)
    P = np.zeros((m, n))
    for i, j in assignment.pairs:
        if m <= n:
            P[i, j] = 1.0
        else:
            P[j, i] = 1.0
    return Correspondence(mat=P, kind="binary")
