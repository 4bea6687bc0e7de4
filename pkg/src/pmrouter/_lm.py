"""Levenberg-Marquardt for small dense least-squares problems.

Used by the sinusoid fit and both maximum-likelihood estimators. Only
steps that lower the cost are accepted, so the cost sequence over accepted
steps is non-increasing.
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class LMResult:
    x: np.ndarray
    cost: float
    grad_norm: float
    iterations: int
    converged: bool
    reason: str


def _stalled(x, cost, gnorm, it, hess, grad):
    decrement = 0.5 * float(grad @ np.linalg.pinv(hess, rcond=1e-14, hermitian=True) @ grad)
    if abs(decrement) <= 1e-13 * cost + 1e-300:
        return LMResult(x, cost, gnorm, it, True, "precision")
    return LMResult(x, cost, gnorm, it, False, "stalled")


def levenberg_marquardt(
    fun,
    x0,
    max_iter=200,
    gtol=1e-9,
    xtol=None,
    lam0=1e-3,
    check_monotone=False,
    second_order=None,
):
    """Minimize 0.5 * ||r(x)||^2 where ``fun(x)`` returns ``(r, J)``.

    Stops with ``converged=True`` when the gradient norm drops below ``gtol``,
    or (if ``xtol`` is given) when an accepted step changes ``x`` by less than
    ``xtol`` relative to its norm. ``reason`` is ``"max_iter"`` or ``"stalled"``
    otherwise; a stall means no damping level could reduce the cost further.
    A stall whose undamped Newton decrement is below the round-off of the
    cost counts as converged (``reason="precision"``).

    ``second_order(x, r)``, if given, returns sum_k r_k * Hess(r_k); adding it
    turns the Gauss-Newton model into a damped full Newton model, which keeps
    curvature at optima where the Jacobian loses rank.
    """
    x = np.array(x0, dtype=float)
    r, jac = fun(x)
    cost = 0.5 * float(r @ r)
    lam = lam0
    history = [cost]
    grad = jac.T @ r
    for it in range(1, max_iter + 1):
        gnorm = float(np.linalg.norm(grad))
        if gnorm < gtol:
            return LMResult(x, cost, gnorm, it - 1, True, "gtol")
        jtj = jac.T @ jac
        diag = np.diag(jtj).copy()
        floor = 1e-12 * max(float(diag.max()), 1e-300)
        diag = np.maximum(diag, floor)
        hess = jtj if second_order is None else jtj + second_order(x, r)
        while True:
            a = hess + lam * np.diag(diag)
            try:
                chol = np.linalg.cholesky(a)
            except np.linalg.LinAlgError:
                # indefinite model: damp harder
                lam = max(lam * 4.0, 1e-8)
                if lam > 1e20:
                    return _stalled(x, cost, gnorm, it, hess, grad)
                continue
            step = -np.linalg.solve(chol.T, np.linalg.solve(chol, grad))
            x_new = x + step
            r_new, jac_new = fun(x_new)
            cost_new = 0.5 * float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new < cost:
                break
            lam *= 4.0
            if lam > 1e20:
                return _stalled(x, cost, gnorm, it, hess, grad)
        if check_monotone:
            assert cost_new <= history[-1], "cost increased on an accepted step"
        history.append(cost_new)
        small_step = xtol is not None and np.linalg.norm(step) <= xtol * (np.linalg.norm(x) + xtol)
        x, r, jac, cost = x_new, r_new, jac_new, cost_new
        grad = jac.T @ r
        lam = max(lam / 3.0, 1e-12)
        if small_step:
            return LMResult(x, cost, float(np.linalg.norm(grad)), it, True, "xtol")
    gnorm = float(np.linalg.norm(grad))
    return LMResult(x, cost, gnorm, max_iter, gnorm < gtol, "gtol" if gnorm < gtol else "max_iter")
