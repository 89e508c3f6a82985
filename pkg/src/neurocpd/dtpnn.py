"""Discrete-time projection neural network solvers for nonnegative CPD.

Three steppers over the same projection direction ``[Z - G]_+ - Z``:

* :func:`step_explicit`: all factors advanced from one snapshot with fixed
  per-factor step sizes; identical to one Euler step of the continuous flow.
* :func:`step_gauss_seidel_armijo`: factors updated in sequence, each block
  backtracking its step size until the sufficient-decrease inequality
  ``f(x+) - f(x) < alpha * lam * <grad, x+ - x>`` holds for that block.
* :func:`step_semi_implicit`: the added-implicitness update; the default
  form is ``(Z + lam*[Z - G]_+) / (1 + lam)``, with the alternative
  ``(Z + [Z - G]_+) / (1 + lam)`` available behind a switch.

:func:`effective_step_map` rewrites a projected step as a plain per-entry
gradient step, and :func:`step_size_bound` evaluates the Lyapunov-stability
step-size interval ``[max(0, 1-sqrt(c)), 1+sqrt(c)]`` built from it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ArmijoStallError, DivergenceError, StepMapInconsistencyError
from .model import (
    Preconditioner,
    objective,
    objective_from_parts,
    precondition,
    projected_direction,
    projection_bundle,
)
from .tensor_ops import KruskalModel, hadamard_gram, mttkrp

Array = np.ndarray

MAX_SHRINKAGES = 60


@dataclass(frozen=True)
class ArmijoParams:
    """Sufficient-decrease constant and step-shrink factor, both in (0, 1)."""

    alpha: float = 1e-4
    beta: float = 0.5

    def __post_init__(self):
        if not 0 < self.alpha < 1 or not 0 < self.beta < 1:
            raise ValueError("Armijo parameters must lie in (0, 1)")


@dataclass
class DtpnnState:
    """State of one discrete-time solver trajectory.

    ``lambdas`` holds the working per-factor step sizes; the Armijo stepper
    resets them to ``initial_lambdas`` at the start of every outer iteration.
    ``kkt_residual`` is the max-norm of the unpreconditioned projected
    gradient measured at the snapshot each stepper advanced from.
    """

    model: KruskalModel
    lambdas: Array = None
    armijo: ArmijoParams = field(default_factory=ArmijoParams)
    iteration: int = 0
    objective_history: list[float] = field(default_factory=list)
    precondition: bool = True
    ridge: float | None = None
    semi_implicit_form: str = "corrected"  # or "paper"
    kkt_residual: float = np.inf
    initial_lambdas: Array = None

    def __post_init__(self):
        if self.lambdas is None:
            self.lambdas = np.ones(self.model.order)
        self.lambdas = np.asarray(self.lambdas, dtype=np.float64)
        if self.lambdas.shape != (self.model.order,):
            raise ValueError("need one step size per factor")
        if not (self.lambdas > 0).all():
            raise ValueError("step sizes must be positive")
        if self.initial_lambdas is None:
            self.initial_lambdas = self.lambdas.copy()
        if self.semi_implicit_form not in ("corrected", "paper"):
            raise ValueError(f"unknown semi-implicit form {self.semi_implicit_form!r}")


def _check_finite(factors, iteration):
    for f in factors:
        if not np.isfinite(f).all():
            raise DivergenceError("solver produced non-finite factors", iteration)


def _true_kkt(model: KruskalModel, grads) -> float:
    return max(
        float(np.abs(projected_direction(f, g)).max())
        for f, g in zip(model.factors, grads)
    )


def _advance_explicit(s: DtpnnState, directions, kkt: float) -> DtpnnState:
    new_factors = [
        f + lam * d for f, lam, d in zip(s.model.factors, s.lambdas, directions)
    ]
    _check_finite(new_factors, s.iteration + 1)
    return replace(
        s, model=KruskalModel(new_factors), iteration=s.iteration + 1, kkt_residual=kkt
    )


def _advance_semi_implicit(s: DtpnnState, directions, kkt: float) -> DtpnnState:
    new_factors = []
    for f, lam, d in zip(s.model.factors, s.lambdas, directions):
        projected = f + d  # [Z - G]_+
        if s.semi_implicit_form == "corrected":
            new_factors.append((f + lam * projected) / (1.0 + lam))
        else:
            new_factors.append((f + projected) / (1.0 + lam))
    _check_finite(new_factors, s.iteration + 1)
    return replace(
        s, model=KruskalModel(new_factors), iteration=s.iteration + 1, kkt_residual=kkt
    )


def step_explicit(t: Array, s: DtpnnState) -> DtpnnState:
    """Fully explicit step: every factor moves from the same snapshot.

    With ``0 < lambda <= 1`` each update is a convex combination of the
    current (nonnegative) factor and a projected point, so nonnegativity is
    preserved.
    """
    directions, grads = projection_bundle(t, s.model, s.precondition, s.ridge)
    return _advance_explicit(s, directions, _true_kkt(s.model, grads))


def step_semi_implicit(t: Array, s: DtpnnState) -> DtpnnState:
    """Semi-implicit step ``(Z + lam*[Z - G]_+)/(1 + lam)`` (corrected form).

    ``semi_implicit_form="paper"`` selects ``(Z + [Z - G]_+)/(1 + lam)``
    instead. Both keep the factors entrywise nonnegative for any lam > 0.
    """
    directions, grads = projection_bundle(t, s.model, s.precondition, s.ridge)
    return _advance_semi_implicit(s, directions, _true_kkt(s.model, grads))


def step_gauss_seidel_armijo(t: Array, s: DtpnnState, tol: float = 1e-10) -> DtpnnState:
    """One Gauss-Seidel sweep with per-block Armijo backtracking.

    Blocks are updated in factor order; each block's step size starts from
    its initial value and is multiplied by beta until the sufficient-decrease
    inequality holds for that block, so the objective never increases. A
    block whose projected-gradient residual is already below ``tol`` (or
    below the float-precision floor once backtracking can make no further
    progress) is left in place; a genuinely stuck block raises
    :class:`ArmijoStallError`.
    """
    t = np.asarray(t)
    alpha, beta = s.armijo.alpha, s.armijo.beta
    model = s.model.copy()
    norm_x_sq = float(np.dot(t.ravel(), t.ravel()))
    lambdas = s.initial_lambdas.copy()
    kkt_parts = []
    f_current = None
    eps_mach = float(np.finfo(float).eps)
    for mode in range(model.order):
        factor = model.factors[mode]
        gram_skip = hadamard_gram(model, mode)
        mtt = mttkrp(t, model, mode)
        grad = factor @ gram_skip - mtt
        d_plain = projected_direction(factor, grad)
        residual = float(np.abs(d_plain).max())
        kkt_parts.append(residual)
        if residual < tol:
            continue  # block already at its KKT point
        # The block objective is quadratic along any direction, so the best
        # decrease the plain direction can offer is (g.d)^2 / (2 d'Hd). Once
        # that is at the cancellation noise of the expanded objective, the
        # block is converged to float precision, not stalled.
        gd_plain = float(np.sum(grad * d_plain))
        curvature = float(np.sum(d_plain * (d_plain @ gram_skip)))
        fit = factor.T @ factor
        parts_scale = (
            0.5 * norm_x_sq
            + 0.5 * abs(float(np.sum(fit * gram_skip)))
            + abs(float(np.sum(factor * mtt)))
        )
        best_decrease = (
            np.inf if curvature <= 0.0 else gd_plain * gd_plain / (2.0 * curvature)
        )
        if best_decrease <= 64.0 * eps_mach * parts_scale:
            continue
        if f_current is None:
            f_current = objective_from_parts(norm_x_sq, factor, gram_skip, mtt)

        def backtrack(direction, lam):
            for _ in range(MAX_SHRINKAGES):
                trial = factor + lam * direction
                displacement = trial - factor
                f_trial = objective_from_parts(norm_x_sq, trial, gram_skip, mtt)
                decrease_bound = alpha * lam * float(np.sum(grad * displacement))
                if f_trial - f_current < decrease_bound and f_trial <= f_current:
                    return trial, lam, f_trial
                lam *= beta
            return None

        hit = None
        if s.precondition:
            step_grad = precondition(grad, Preconditioner(mode, gram_skip, s.ridge))
            hit = backtrack(projected_direction(factor, step_grad), lambdas[mode])
        if hit is None:
            # Plain projected gradient is always a descent direction; the
            # preconditioned one can fail on mixed active sets.
            hit = backtrack(d_plain, lambdas[mode])
        if hit is None:
            if best_decrease <= 1e6 * eps_mach * parts_scale:
                continue  # gray zone: decrease too close to noise to verify
            raise ArmijoStallError(mode, MAX_SHRINKAGES, residual)
        model.factors[mode], lambdas[mode], f_current = hit
    if f_current is None:
        f_current = (
            s.objective_history[-1] if s.objective_history else objective(t, model)
        )
    _check_finite(model.factors, s.iteration + 1)
    new = replace(
        s,
        model=model,
        lambdas=lambdas,
        iteration=s.iteration + 1,
        kkt_residual=max(kkt_parts),
    )
    new.objective_history = s.objective_history + [f_current]
    return new


def solve(
    t: Array,
    s: DtpnnState,
    variant: str = "armijo",
    tol: float = 1e-6,
    max_steps: int = 10000,
    callback=None,
) -> tuple[DtpnnState, str]:
    """Iterate the chosen stepper until the KKT residual drops below ``tol``.

    The residual is evaluated from the true (unpreconditioned) gradients at
    the current point before each step, so a converged return is exactly the
    point at which the residual was measured. Returns the final state and
    ``"converged"`` or ``"max_steps"``.
    """
    if variant == "armijo":
        for _ in range(max_steps):
            s = step_gauss_seidel_armijo(t, s, tol=tol)
            if callback is not None:
                callback(s)
            if s.kkt_residual < tol:
                return s, "converged"  # sweep skipped every block: state unmoved
        return s, "max_steps"
    if variant not in ("explicit", "semi_implicit"):
        raise ValueError(f"unknown DTPNN variant {variant!r}")
    advance = _advance_explicit if variant == "explicit" else _advance_semi_implicit
    for _ in range(max_steps):
        directions, grads = projection_bundle(t, s.model, s.precondition, s.ridge)
        kkt = _true_kkt(s.model, grads)
        if kkt < tol:
            return replace(s, kkt_residual=kkt), "converged"
        s = advance(s, directions, kkt)
        if callback is not None:
            callback(s)
    return s, "max_steps"


@dataclass(frozen=True)
class StepBound:
    """Lyapunov step-size interval; ``lower``/``upper`` are NaN when the
    bound does not apply (``c < 0``) or the point is already an equilibrium.
    """

    c: float
    lower: float
    upper: float
    at_equilibrium: bool = False

    def contains(self, lam: float) -> bool:
        return (
            not self.at_equilibrium
            and math.isfinite(self.lower)
            and self.lower <= lam <= self.upper
        )


def effective_step_map(
    before: KruskalModel,
    after: KruskalModel,
    grads: list[Array],
    lambdas,
    lower: float = 0.0,
    upper: float = np.inf,
) -> list[Array]:
    """Per-entry step sizes ``gamma`` with ``after = before - gamma * grad``.

    Interior coordinates (``lower <= Z - G <= upper``) keep ``gamma = lam``;
    clamped coordinates get the constructive value ``lam*(z - bound)/g``,
    whose sign analysis guarantees ``g != 0`` there. Raises
    :class:`StepMapInconsistencyError` if a clamped coordinate has zero
    gradient or the reconstruction fails.
    """
    lambdas = np.asarray(lambdas, dtype=np.float64)
    out = []
    for mode, (z, z_new, g) in enumerate(zip(before.factors, after.factors, grads)):
        lam = lambdas[mode]
        q = z - g
        gamma = np.full_like(z, lam)
        clamp_hi = q > upper
        clamp_lo = q < lower
        if (g[clamp_hi | clamp_lo] == 0.0).any():
            raise StepMapInconsistencyError(
                f"factor {mode}: clamped coordinate with zero gradient"
            )
        if clamp_hi.any():
            gamma[clamp_hi] = lam * (z[clamp_hi] - upper) / g[clamp_hi]
        if clamp_lo.any():
            gamma[clamp_lo] = lam * (z[clamp_lo] - lower) / g[clamp_lo]
        recon = z - gamma * g
        err = np.abs(recon - z_new)
        if (err > 1e-12 * np.maximum(1.0, np.abs(z))).any():
            raise StepMapInconsistencyError(
                f"factor {mode}: gamma reconstruction off by {err.max():.3e}"
            )
        out.append(gamma)
    return out


def interval_from_c(c: float) -> tuple[float, float]:
    """Stability interval ``[max(0, 1-sqrt(c)), 1+sqrt(c)]``; NaNs if c < 0."""
    if c < 0.0:
        return (np.nan, np.nan)
    return (max(0.0, 1.0 - math.sqrt(c)), 1.0 + math.sqrt(c))


def step_size_bound(t: Array, s: DtpnnState) -> StepBound:
    """Evaluate the stability interval for an explicit step at the state.

    Uses the unpreconditioned projection map, matching the analysis it comes
    from: ``c = (1 - 2*||[gamma.grad per factor]||^2) / ||stacked residual||^2``
    with ``gamma`` from :func:`effective_step_map`. At an equilibrium there
    is no bound to report and ``at_equilibrium`` is set instead.
    """
    _, grads = projection_bundle(t, s.model, False, s.ridge)
    residuals = [
        -projected_direction(f, g) for f, g in zip(s.model.factors, grads)
    ]  # Z - [Z - G]_+
    denom = sum(float(np.sum(r * r)) for r in residuals)
    if denom == 0.0:
        return StepBound(np.nan, np.nan, np.nan, at_equilibrium=True)
    after = KruskalModel(
        [
            f + lam * projected_direction(f, g)
            for f, lam, g in zip(s.model.factors, s.lambdas, grads)
        ]
    )
    gammas = effective_step_map(s.model, after, grads, s.lambdas)
    dots = [float(np.sum(gm * g)) for gm, g in zip(gammas, grads)]
    c = (1.0 - 2.0 * sum(d * d for d in dots)) / denom
    lower, upper = interval_from_c(c)
    return StepBound(c, lower, upper)


def lyapunov_trace(trajectory, reference: KruskalModel) -> np.ndarray:
    """Squared distances ``||model_k - reference||^2`` along a trajectory."""
    ref = reference.flatten()
    return np.array([float(np.sum((m.flatten() - ref) ** 2)) for m in trajectory])
