"""Damped iteratively reweighted l1/l2 fixed-point solvers.

Both algorithms repeat, from x0 and a positive relaxation vector eps0:

    weights   DIRL1:  w_i = r'(|x_i| + eps_i)
              DIRL2:  u_i = r'(z_i) / (2 z_i),  z_i = sqrt(x_i^2 + eps_i^2)
    solve     DIRL1:  y = softthresh(x - grad/beta, lam*w/beta)
              DIRL2:  y_i = (x_i - grad_i/beta) / (1 + (2 lam/beta) u_i)
    damp      x <- (1-alpha) x + alpha y
    relax     eps <- factor * eps

The damping factor alpha in (0,1) keeps the iteration map invertible, which
is what makes strict saddle points repel almost every trajectory. The
relaxation shrinks by (1 - alpha(1-mu)) per step in the default "damped"
mode, or by mu in "geometric" mode.

The perturbed objective F(x, eps) decreases monotonically along the
iteration whenever beta > alpha * L / 2 (L the gradient Lipschitz constant
of the smooth term); this is asserted at every step.
"""

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import analysis
from .errors import ConfigValidationError, NumericalFailure
from .regularizers import check_assumption4, derivative_inverse

ALGORITHMS = ("DIRL1", "DIRL2")
EPS_DECAY_MODES = ("damped", "geometric")

#: Number of trailing iterates retained for limit extrapolation.
TAIL_WINDOW = 64

#: Relative slack allowed on the per-step descent assertion.
DESCENT_SLACK = 1e-10


def soft_threshold(z, w):
    """Componentwise sign(z_i) * max(|z_i| - w_i, 0); w_i = inf maps to 0.

    Exact ties |z_i| = w_i land on the zero branch.
    """
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    if np.any(w < 0.0) or np.any(np.isnan(w)):
        raise ValueError("thresholds must be nonnegative")
    return np.sign(z) * np.maximum(np.abs(z) - w, 0.0)


def dirl1_weights(x, eps, reg):
    """w_i = r'(|x_i| + eps_i), with the t -> 0+ limit at |x_i| + eps_i = 0.

    The limit is inf for non-Lipschitz regularizers; that only occurs on
    the eps = 0 analysis path since the solver keeps eps > 0.
    """
    t = np.abs(np.asarray(x, dtype=float)) + np.asarray(eps, dtype=float)
    if np.any(t < 0.0):
        raise ValueError("|x_i| + eps_i must be nonnegative")
    w = np.full(t.shape, reg.derivative_at_zero_plus())
    pos = t > 0.0
    if np.any(pos):
        w[pos] = np.atleast_1d(reg.derivative(t[pos]))
    return w

def dirl1_subproblem(x, grad, w, beta, lam):
    """Minimizer of the weighted-l1 model around x: softthresh of the gradient step."""
    x = np.asarray(x, dtype=float)
    return soft_threshold(x - grad / beta, lam * np.asarray(w, dtype=float) / beta)


def dirl2_weights(x, eps, reg):
    """u_i = r'(z_i) / (2 z_i) with z_i = sqrt(x_i^2 + eps_i^2); inf at z_i = 0."""
    z = np.hypot(np.asarray(x, dtype=float), np.asarray(eps, dtype=float))
    u = np.full(z.shape, math.inf)
    pos = z > 0.0
    if np.any(pos):
        u[pos] = np.atleast_1d(reg.derivative(z[pos])) / (2.0 * z[pos])
    return u


def dirl2_subproblem(x, grad, u, beta, lam):
    """Minimizer of the weighted-l2 model; u_i = inf pins coordinate i to 0."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any(u < 0.0) or np.any(np.isnan(u)):
        raise ValueError("weights must be nonnegative")
    return np.where(np.isinf(u), 0.0, (x - grad / beta) / (1.0 + (2.0 * lam / beta) * u))


@dataclass
class SolverConfig:
    """Algorithm choice and iteration parameters.

    ``beta > alpha * L / 2`` is additionally required at solve start, where
    L is the gradient Lipschitz constant of the problem's smooth term.
    """

    algorithm: str
    alpha: float = 0.2
    beta: float = 4.0
    mu: float = 0.3
    eps0: object = 1.0
    eps_decay: str = "damped"
    max_iter: int = 100_000
    tol_step: float = 1e-10
    tol_eps: float = 1e-10

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if not 0.0 < self.mu < 1.0:
            raise ValueError("mu must lie in (0, 1)")
        if not self.beta > 0.0:
            raise ValueError("beta must be positive")
        if self.eps_decay not in EPS_DECAY_MODES:
            raise ValueError(f"eps_decay must be one of {EPS_DECAY_MODES}")
        eps0 = np.asarray(self.eps0, dtype=float)
        if np.any(eps0 <= 0.0) or not np.all(np.isfinite(eps0)):
            raise ValueError("eps0 must be positive elementwise")
        if self.max_iter < 0:
            raise ValueError("max_iter must be >= 0")
        if not (self.tol_step > 0.0 and self.tol_eps > 0.0):
            raise ValueError("tolerances must be positive")

    @property
    def eps_factor(self):
        if self.eps_decay == "damped":
            return 1.0 - self.alpha * (1.0 - self.mu)
        return self.mu

    def initial_eps(self, n):
        eps = np.asarray(self.eps0, dtype=float)
        if eps.ndim == 0:
            return np.full(n, float(eps))
        if eps.shape != (n,):
            raise ValueError("eps0 length must match the problem dimension")
        return eps.copy()

    def to_dict(self):
        eps0 = np.asarray(self.eps0, dtype=float)
        return {
            "algorithm": self.algorithm,
            "alpha": self.alpha,
            "beta": self.beta,
            "mu": self.mu,
            "eps0": float(eps0) if eps0.ndim == 0 else eps0.tolist(),
            "eps_decay": self.eps_decay,
            "max_iter": self.max_iter,
            "tol_step": self.tol_step,
            "tol_eps": self.tol_eps,
        }

    @staticmethod
    def from_dict(d):
        known = {
            "algorithm", "alpha", "beta", "mu", "eps0", "eps_decay",
            "max_iter", "tol_step", "tol_eps",
        }
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown solver config fields: {sorted(unknown)}")
        return SolverConfig(**d)


@dataclass
class IterateState:
    k: int
    x: np.ndarray
    eps: np.ndarray
    y: np.ndarray
    F_perturbed: float
    step_norm: float
    prox_center_inf: float = math.nan


@dataclass(frozen=True)
class TraceRecord:
    k: int
    F_perturbed: float
    step_norm: float
    eps_inf: float
    support_bits: str


@dataclass
class SolveTrace:
    algorithm: str
    records: list
    converged: bool
    iterations: int
    final_x: np.ndarray
    final_eps: np.ndarray
    limit_x: np.ndarray
    final_residual: float
    diagnostics: dict
    tail: list
    xs: list = None
    eps_history: list = None
    config: SolverConfig = None


def _perturbed_value(config, problem, x, eps):
    if config.algorithm == "DIRL1":
        return problem.perturbed_value_l1(x, eps)
    return problem.perturbed_value_l2(x, eps)


def _descent_check(F_old, F_new, k):
    if F_new > F_old + DESCENT_SLACK * max(1.0, abs(F_old)):
        raise NumericalFailure(
            f"perturbed objective increased at iteration {k}: "
            f"{F_old!r} -> {F_new!r}",
            iteration=k,
        )


def dirl1_step(state, config, problem):
    """One damped weighted-l1 step; asserts descent of F(x, eps)."""
    grad = problem.gradient_smooth(state.x)
    w = dirl1_weights(state.x, state.eps, problem.reg)
    y = dirl1_subproblem(state.x, grad, w, config.beta, problem.lam)
    x_new = (1.0 - config.alpha) * state.x + config.alpha * y
    eps_new = config.eps_factor * state.eps
    F_new = problem.perturbed_value_l1(x_new, eps_new)
    _descent_check(state.F_perturbed, F_new, state.k + 1)
    return IterateState(
        k=state.k + 1,
        x=x_new,
        eps=eps_new,
        y=y,
        F_perturbed=F_new,
        step_norm=float(np.max(np.abs(x_new - state.x))),
        prox_center_inf=float(np.max(np.abs(state.x - grad / config.beta))),
    )


def dirl2_step(state, config, problem):
    """One damped weighted-l2 step; asserts descent of F(x, eps)."""
    grad = problem.gradient_smooth(state.x)
    u = dirl2_weights(state.x, state.eps, problem.reg)
    y = dirl2_subproblem(state.x, grad, u, config.beta, problem.lam)
    x_new = (1.0 - config.alpha) * state.x + config.alpha * y
    eps_new = config.eps_factor * state.eps
    F_new = problem.perturbed_value_l2(x_new, eps_new)
    _descent_check(state.F_perturbed, F_new, state.k + 1)
    return IterateState(
        k=state.k + 1,
        x=x_new,
        eps=eps_new,
        y=y,
        F_perturbed=F_new,
        step_norm=float(np.max(np.abs(x_new - state.x))),
        prox_center_inf=float(np.max(np.abs(state.x - grad / config.beta))),
    )


@dataclass
class ValidationReport:
    lipschitz_gradient: float
    hard_errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    lipeomorphism_lhs: float = None

    @property
    def ok(self):
        return not self.hard_errors


def validate_config(config, problem):
    """Check the hard parameter bounds and collect non-blocking warnings.

    Hard errors: alpha or mu outside (0, 1), or beta <= alpha * L / 2.
    Warnings cover the invertibility-related inequalities that are either
    violated or cannot be evaluated before solving.
    """
    L = problem.estimate_lipschitz_gradient()
    report = ValidationReport(lipschitz_gradient=L)
    if not 0.0 < config.alpha < 1.0:
        report.hard_errors.append(f"alpha={config.alpha} outside (0, 1)")
    if not 0.0 < config.mu < 1.0:
        report.hard_errors.append(f"mu={config.mu} outside (0, 1)")
    if config.beta <= config.alpha * L / 2.0:
        report.hard_errors.append(
            f"beta={config.beta} must exceed alpha*L/2={config.alpha * L / 2.0}"
        )
    if report.hard_errors:
        return report

    reg = problem.reg
    if reg.lipschitz_at_zero:
        L_r = abs(reg.second_derivative_at_zero_plus())
        lhs = config.alpha * (
            2.0 + L / config.beta + problem.lam / config.beta * L_r + config.mu
        )
        report.lipeomorphism_lhs = lhs
        if lhs >= 1.0:
            report.warnings.append(
                f"invertibility inequality alpha*(2 + L/beta + lam*L_r/beta + mu) = "
                f"{lhs:.4g} >= 1; the iteration map may fail to be bi-Lipschitz"
            )
    else:
        report.warnings.append(
            "invertibility inequality not checkable before solving "
            "(weight curvature bound depends on the level set); reported post-run"
        )
    report.warnings.append(
        "spectral step bound alpha < beta/rho not checkable before solving "
        "(rho is estimated from classified stationary points)"
    )
    if config.algorithm == "DIRL2" and reg.lipschitz_at_zero:
        a4 = check_assumption4(reg, np.logspace(-1, -8, 8))
        if not a4.holds:
            report.warnings.append(
                "weighted-l2 smoothness condition fails: r'(0+) is finite, so the "
                "subproblem map need not be differentiable at zero coordinates"
            )
    return report


def make_initial_state(config, problem, x0):
    x0 = np.array(x0, dtype=float)
    eps = config.initial_eps(problem.dimension)
    F0 = _perturbed_value(config, problem, x0, eps)
    return IterateState(
        k=0, x=x0, eps=eps, y=x0.copy(), F_perturbed=F0, step_norm=math.inf
    )


def _record(state):
    return TraceRecord(
        k=state.k,
        F_perturbed=state.F_perturbed,
        step_norm=state.step_norm,
        eps_inf=float(np.max(state.eps)),
        support_bits=analysis.support(state.y).bits,
    )


def _post_run_diagnostics(config, problem, L, C):
    diag = {"lipschitz_gradient": L, "prox_center_bound": C}
    reg = problem.reg
    try:
        if reg.lipschitz_at_zero:
            L_r = abs(reg.second_derivative_at_zero_plus())
        elif math.isfinite(C) and C > 0.0:
            x_low = derivative_inverse(reg, C / problem.lam)
            diag["support_lower_bound"] = x_low
            L_r = abs(reg.second_derivative(x_low))
        else:
            return diag
    except ValueError:
        return diag
    lhs = config.alpha * (
        2.0 + L / config.beta + problem.lam / config.beta * L_r + config.mu
    )
    diag["weight_curvature_bound"] = L_r
    diag["lipeomorphism_lhs"] = lhs
    diag["lipeomorphism_ok"] = lhs < 1.0
    return diag


def run(config, problem, x0, trace_full=False, record_every=1):
    """Iterate until the step and relaxation norms fall below tolerance.

    Convergence requires ||x_next - x||_inf <= tol_step on ten consecutive
    iterations (so a single incidentally tiny step cannot stop the run)
    together with ||eps||_inf <= tol_eps. Returns a SolveTrace whose
    per-iteration records hold scalars only; pass ``trace_full=True`` to
    also keep every iterate. ``record_every`` thins the records (the first
    and last iterations are always kept).

    Raises ConfigValidationError on hard parameter errors and
    NumericalFailure if monotonic descent or its telescoped lower bound
    fails.
    """
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    report = validate_config(config, problem)
    if report.hard_errors:
        raise ConfigValidationError("; ".join(report.hard_errors), report)
    L = report.lipschitz_gradient
    x0 = problem.check_vector(np.asarray(x0, dtype=float))
    step_fn = dirl1_step if config.algorithm == "DIRL1" else dirl2_step

    state = make_initial_state(config, problem, x0)
    records = [_record(state)]
    xs = [state.x.copy()] if trace_full else None
    eps_history = [state.eps.copy()] if trace_full else None
    tail = [state.x.copy()]
    sum_sq_steps = 0.0
    C = -math.inf
    converged = False
    small_steps = 0

    while state.k < config.max_iter:
        prev = state
        state = step_fn(prev, config, problem)
        sum_sq_steps += float(np.sum((state.x - prev.x) ** 2))
        C = max(C, state.prox_center_inf)
        tail.append(state.x.copy())
        if len(tail) > TAIL_WINDOW:
            del tail[0]
        if trace_full:
            xs.append(state.x.copy())
            eps_history.append(state.eps.copy())
        small_steps = small_steps + 1 if state.step_norm <= config.tol_step else 0
        done = small_steps >= 10 and float(np.max(state.eps)) <= config.tol_eps
        if state.k % record_every == 0 or done or state.k == config.max_iter:
            records.append(_record(state))
        if done:
            converged = True
            break

    if state.k > 0:
        lower = (config.beta / config.alpha - L / 2.0) * sum_sq_steps
        drop = records[0].F_perturbed - state.F_perturbed
        if drop < lower - 1e-8 * state.k:
            raise NumericalFailure(
                f"telescoped descent bound violated: drop={drop!r} < {lower!r}",
                iteration=state.k,
            )

    limit_x = analysis.extrapolate_limit(tail)
    residual = analysis.stationarity_residual(problem, limit_x).residual_active
    return SolveTrace(
        algorithm=config.algorithm,
        records=records,
        converged=converged,
        iterations=state.k,
        final_x=state.x,
        final_eps=state.eps,
        limit_x=limit_x,
        final_residual=residual,
        diagnostics=_post_run_diagnostics(config, problem, L, C),
        tail=tail,
        xs=xs,
        eps_history=eps_history,
        config=config,
    )


def fixed_point_map(config, problem):
    """The one-step map T on R^(2n) acting on stacked (x, eps) vectors.

    Used for finite-difference Jacobian checks; performs no descent
    bookkeeping. The DIRL2 map accepts negative eps entries (it depends on
    eps only through eps^2); the DIRL1 map requires |x_i| + eps_i >= 0.
    """
    n = problem.dimension
    alpha, beta, lam = config.alpha, config.beta, problem.lam
    factor = config.eps_factor

    def apply(v):
        v = np.asarray(v, dtype=float)
        x, eps = v[:n], v[n:]
        grad = problem.gradient_smooth(x)
        if config.algorithm == "DIRL1":
            y = dirl1_subproblem(
                x, grad, dirl1_weights(x, eps, problem.reg), beta, lam
            )
        else:
            y = dirl2_subproblem(
                x, grad, dirl2_weights(x, eps, problem.reg), beta, lam
            )
        return np.concatenate([(1.0 - alpha) * x + alpha * y, factor * eps])

    return apply


def solution_map(config, problem):
    """The undamped subproblem map S on R^(2n): (x, eps) -> (y, mu*eps).

    T = (1-alpha) I + alpha S in damped mode; the map is exposed separately
    so its smoothness and Lipschitz behaviour can be probed directly.
    """
    n = problem.dimension
    beta, lam, mu = config.beta, problem.lam, config.mu

    def apply(v):
        v = np.asarray(v, dtype=float)
        x, eps = v[:n], v[n:]
        grad = problem.gradient_smooth(x)
        if config.algorithm == "DIRL1":
            y = dirl1_subproblem(
                x, grad, dirl1_weights(x, eps, problem.reg), beta, lam
            )
        else:
            y = dirl2_subproblem(
                x, grad, dirl2_weights(x, eps, problem.reg), beta, lam
            )
        return np.concatenate([y, mu * eps])

    return apply


def trace_to_csv(trace, path):
    """Write the per-iteration scalar records as CSV."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "F_perturbed", "step_norm", "eps_inf", "support_bits"])
        for rec in trace.records:
            writer.writerow(
                [rec.k, repr(rec.F_perturbed), repr(rec.step_norm),
                 repr(rec.eps_inf), rec.support_bits]
            )


def trace_states_to_jsonl(trace, path):
    """Write full iterate states as JSON lines; requires a trace_full run."""
    if trace.xs is None:
        raise ValueError("trace does not hold full states; rerun with trace_full=True")
    with open(path, "w", encoding="utf-8") as fh:
        for k, (x, eps) in enumerate(zip(trace.xs, trace.eps_history)):
            fh.write(json.dumps({"k": k, "x": x.tolist(), "eps": eps.tolist()}) + "\n")
