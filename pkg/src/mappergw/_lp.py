"""Exact discrete optimal transport (network simplex) and a log-domain Sinkhorn fallback."""

from __future__ import annotations

import os
import warnings

import numpy as np

# POT probes every installed array backend at import time; only numpy is needed.
for _key in (
    "POT_BACKEND_DISABLE_PYTORCH",
    "POT_BACKEND_DISABLE_JAX",
    "POT_BACKEND_DISABLE_TENSORFLOW",
    "POT_BACKEND_DISABLE_CUPY",
):
    os.environ.setdefault(_key, "1")

import ot  # noqa: E402


def exact_plan(mu: np.ndarray, nu: np.ndarray, cost: np.ndarray) -> np.ndarray:
    """Optimal coupling of the linear transport problem min <cost, pi>."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", UserWarning)
        plan, log = ot.emd(mu, nu, cost, numItermax=10_000_000, log=True, check_marginals=False)
    if log["warning"] is not None:
        raise RuntimeError(f"network simplex failed: {log['warning']}")
    return np.asarray(plan, dtype=np.float64)


def round_to_marginals(plan: np.ndarray, mu: np.ndarray, nu: np.ndarray) -> np.ndarray:
    """Project a near-feasible nonnegative plan onto the transportation polytope."""
    rows = plan.sum(axis=1)
    plan = plan * np.minimum(1.0, np.divide(mu, rows, out=np.ones_like(mu), where=rows > 0))[:, None]
    cols = plan.sum(axis=0)
    plan = plan * np.minimum(1.0, np.divide(nu, cols, out=np.ones_like(nu), where=cols > 0))[None, :]
    err_r = mu - plan.sum(axis=1)
    err_c = nu - plan.sum(axis=0)
    total = err_r.sum()
    if total > 0:
        plan = plan + np.outer(err_r, err_c) / total
    return plan


def _logsumexp(A: np.ndarray, axis: int) -> np.ndarray:
    # scipy's logsumexp validates and handles complex input; this loop needs neither
    m = A.max(axis=axis, keepdims=True)
    return (m + np.log(np.exp(A - m).sum(axis=axis, keepdims=True))).squeeze(axis)


def entropic_plan(
    mu: np.ndarray, nu: np.ndarray, cost: np.ndarray, eps_reg: float,
    max_iter: int = 5000, tol: float = 1e-10, check_every: int = 10,
    init: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[np.ndarray, tuple[np.ndarray, np.ndarray]]:
    """Sinkhorn plan for regularization ``eps_reg`` times the cost range, rounded to feasibility.

    Iterates until the row marginals (the columns are exact after each sweep)
    are within ``tol``; the final rounding restores exact feasibility. Returns
    the plan and the dual potentials in cost units, which can seed ``init``
    for a nearby cost.
    """
    spread = float(cost.max() - cost.min())
    reg = eps_reg * (spread if spread > 0 else 1.0)
    log_mu, log_nu = np.log(mu), np.log(nu)
    C = (cost - cost.min()) / reg
    if init is None:
        g = np.zeros(len(nu))
    else:
        g = (init[1] - init[1].max()) / reg
    f = np.zeros(len(mu))
    for it in range(1, max_iter + 1):
        f = log_mu - _logsumexp(g[None, :] - C, axis=1)
        g = log_nu - _logsumexp(f[:, None] - C, axis=0)
        if it % check_every == 0:
            rows = np.exp(f + _logsumexp(g[None, :] - C, axis=1))
            if np.max(np.abs(rows - mu)) < tol:
                break
    plan = np.exp(f[:, None] + g[None, :] - C)
    return round_to_marginals(plan, mu, nu), (f * reg, g * reg)
