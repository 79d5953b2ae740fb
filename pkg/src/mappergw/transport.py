"""p-Wasserstein and Gromov-Wasserstein (quadratic relaxation) between finite spaces.

The Gromov-Wasserstein estimator minimizes

    L(pi) = sum_{i,i',j,j'} |D1[i,i'] - D2[j,j']|^p pi[i,j] pi[i',j']

over couplings pi of the two weight vectors and reports ``0.5 * L**(1/p)``.
The objective is a nonconvex quadratic, so the conditional-gradient solver
returns a local minimum; reported values are upper bounds on the infimum.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from mappergw import _lp
from mappergw.metric_measure import MetricMeasureSpace

MARGINAL_ATOL = 1e-9


def _check_weights(w, name: str) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    if w.size == 0 or np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError(f"{name} must be a nonempty nonnegative vector")
    if abs(w.sum() - 1.0) > MARGINAL_ATOL:
        raise ValueError(f"{name} must sum to 1 within {MARGINAL_ATOL} (sum = {w.sum()!r})")
    return w


def check_coupling(pi: np.ndarray, mu, nu, atol: float = MARGINAL_ATOL) -> None:
    """Raise ValueError unless ``pi`` is a nonnegative coupling of ``mu`` and ``nu``."""
    pi = np.asarray(pi)
    if pi.shape != (len(mu), len(nu)):
        raise ValueError(f"coupling shape {pi.shape} does not match marginals")
    if np.any(pi < 0):
        raise ValueError("coupling has negative entries")
    if np.max(np.abs(pi.sum(axis=1) - mu)) > atol or np.max(np.abs(pi.sum(axis=0) - nu)) > atol:
        raise ValueError("coupling marginals violate the constraints")


def wasserstein_p(mu, nu, D, p: float = 1.0) -> tuple[float, np.ndarray]:
    """Exact p-Wasserstein distance between two weight vectors under cost matrix ``D``.

    Returns ``(value, coupling)`` where ``value = (sum D**p * coupling)**(1/p)``.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    mu = _check_weights(mu, "mu")
    nu = _check_weights(nu, "nu")
    D = np.asarray(D, dtype=np.float64)
    if D.shape != (mu.size, nu.size):
        raise ValueError(f"cost matrix shape {D.shape} does not match ({mu.size}, {nu.size})")
    if np.any(D < 0) or not np.all(np.isfinite(D)):
        raise ValueError("costs must be finite and nonnegative")
    cost = D**p
    plan = _lp.exact_plan(mu, nu, cost)
    total = max(float(np.sum(cost * plan)), 0.0)
    return total ** (1.0 / p), plan


# --- Gromov-Wasserstein objective ------------------------------------------


def _naive_objective(pi, D1, D2, p) -> float:
    m1 = D1.shape[0]
    if m1 * D1.shape[0] * D2.shape[0] ** 2 <= 4_000_000:
        T = np.abs(D1[:, :, None, None] - D2[None, None, :, :]) ** p
        return float(np.einsum("abcd,ac,bd->", T, pi, pi))
    total = 0.0
    for i in range(m1):
        T = np.abs(D1[i][:, None, None] - D2[None, :, :]) ** p
        total += float(pi[i] @ np.einsum("ajb,ab->j", T, pi))
    return total


def _apply_kernel(pi, D1, D2, p, D1p=None, D2p=None) -> np.ndarray:
    """(K pi)[i, j] = sum_{i', j'} |D1[i,i'] - D2[j,j']|^p pi[i', j'] for any matrix pi."""
    if p == 2:
        D1p = D1 * D1 if D1p is None else D1p
        D2p = D2 * D2 if D2p is None else D2p
        rows, cols = pi.sum(axis=1), pi.sum(axis=0)
        return (D1p @ rows)[:, None] + (D2p @ cols)[None, :] - 2.0 * (D1 @ pi @ D2.T)
    out = np.empty_like(pi)
    for i in range(D1.shape[0]):
        T = np.abs(D1[i][:, None, None] - D2[None, :, :]) ** p
        out[i] = np.einsum("ajb,ab->j", T, pi)
    return out


def _support_objective(pi, D1, D2, p) -> float:
    """Exact L(pi) summed over the nonzero entries of pi only (always >= 0)."""
    ii, jj = np.nonzero(pi > 0)
    if ii.size > 4000:
        return max(float(np.vdot(_apply_kernel(pi, D1, D2, p), pi)), 0.0)
    vals = pi[ii, jj]
    diff = np.abs(D1[np.ix_(ii, ii)] - D2[np.ix_(jj, jj)]) ** p
    return float(vals @ diff @ vals)


def gw_objective(pi, D1, D2, p: float = 2, method: str = "auto") -> float:
    """Evaluate L(pi).

    ``method="naive"`` sums the quadruple loop directly; ``"factored"`` (p=2
    only) expands |a-b|^2 = a^2 + b^2 - 2ab into matrix products.
    """
    pi = np.asarray(pi, dtype=np.float64)
    D1 = np.asarray(D1, dtype=np.float64)
    D2 = np.asarray(D2, dtype=np.float64)
    if pi.shape != (D1.shape[0], D2.shape[0]) or D1.shape[0] != D1.shape[1] or D2.shape[0] != D2.shape[1]:
        raise ValueError("shape mismatch between coupling and distance matrices")
    if method == "auto":
        method = "factored" if p == 2 else "naive"
    if method == "naive":
        return _naive_objective(pi, D1, D2, p)
    if method == "factored":
        if p != 2:
            raise ValueError("the factored objective is only available for p = 2")
        return float(np.vdot(_apply_kernel(pi, D1, D2, 2), pi))
    raise ValueError(f"unknown method {method!r}")


# --- solver ----------------------------------------------------------------


@dataclass(frozen=True)
class GWOptions:
    p: int = 2
    restarts: int = 3
    max_iter: int = 1000
    tol: float = 1e-9
    inner: str = "exact"
    eps_reg: float = 1e-2
    seed: int = 42
    init: tuple[str, ...] | None = None
    symmetrize: bool = True

    def __post_init__(self):
        if self.p not in (1, 2):
            raise ValueError("p must be 1 or 2")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.inner not in ("exact", "entropic"):
            raise ValueError("inner must be 'exact' or 'entropic'")
        if not self.eps_reg > 0:
            raise ValueError("eps_reg must be positive")
        if self.init is not None:
            bad = set(self.init) - {"product", "identity", "random"}
            if bad:
                raise ValueError(f"unknown initializations {sorted(bad)}")
            object.__setattr__(self, "init", tuple(self.init))

    @classmethod
    def from_dict(cls, data: dict | None) -> "GWOptions":
        data = dict(data or {})
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown solver option(s): {', '.join(sorted(unknown))}")
        return cls(**data)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if d["init"] is not None:
            d["init"] = list(d["init"])
        return d


@dataclass(frozen=True)
class GWResult:
    value: float
    coupling: np.ndarray = field(repr=False)
    objective: float
    iterations: int
    converged: bool
    restarts_used: int
    history: tuple[float, ...] = field(default=(), repr=False)


def northwest_corner(mu: np.ndarray, nu: np.ndarray) -> np.ndarray:
    """Monotone coupling in index order; the diagonal coupling when mu == nu."""
    plan = np.zeros((mu.size, nu.size))
    a, b = mu.copy(), nu.copy()
    i = j = 0
    while i < mu.size and j < nu.size:
        t = min(a[i], b[j])
        plan[i, j] = t
        a[i] -= t
        b[j] -= t
        if a[i] <= 0 and i < mu.size - 1:
            i += 1
        elif b[j] <= 0:
            j += 1
        else:
            i += 1
    return plan


def _random_cost(m1: int, m2: int, rng: np.random.Generator) -> np.ndarray:
    # Generated in a canonical orientation so that swapping the spaces mirrors it.
    if m1 == m2:
        R = rng.random((m1, m1))
        return R + R.T
    if m1 < m2:
        return rng.random((m1, m2))
    return rng.random((m2, m1)).T


def initial_couplings(mu, nu, opts: GWOptions) -> list[tuple[str, np.ndarray]]:
    square = mu.size == nu.size
    if opts.init is not None:
        names = list(opts.init)
        if "identity" in names and not square:
            raise ValueError("identity initialization needs spaces of equal size")
    else:
        names = ["product"] + (["identity"] if square else [])
        names = names[: opts.restarts]
        names += ["random"] * (opts.restarts - len(names))
    out = []
    n_random = 0
    for name in names:
        if name == "product":
            plan = np.outer(mu, nu)
        elif name == "identity":
            plan = northwest_corner(mu, nu)
        else:
            rng = np.random.default_rng(np.random.SeedSequence([int(opts.seed), n_random]))
            n_random += 1
            plan = _lp.exact_plan(mu, nu, _random_cost(mu.size, nu.size, rng))
        out.append((name, plan))
    return out


def _conditional_gradient(D1, D2, mu, nu, pi0, opts: GWOptions):
    p = opts.p
    D1p, D2p = (D1 * D1, D2 * D2) if p == 2 else (None, None)

    def kernel(x):
        return _apply_kernel(x, D1, D2, p, D1p, D2p)

    potentials = None  # Sinkhorn warm start carried across steps

    def direction(grad):
        nonlocal potentials
        if opts.inner == "exact":
            return _lp.exact_plan(mu, nu, grad)
        plan, potentials = _lp.entropic_plan(mu, nu, grad, opts.eps_reg, init=potentials)
        return plan

    pi = pi0.copy()
    K_pi = kernel(pi)
    L = float(np.vdot(K_pi, pi))
    history = [L]
    scale = max(abs(L), float(np.abs(D1).max() ** p + np.abs(D2).max() ** p), 1e-300)
    converged = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        grad = 2.0 * K_pi
        delta = direction(grad) - pi
        slope = float(np.vdot(grad, delta))
        if slope >= -1e-15 * scale:
            converged = True
            break
        curv = float(np.vdot(kernel(delta), delta))
        tau = 1.0 if curv <= 0 else min(1.0, -slope / (2.0 * curv))
        candidate = pi + tau * delta
        K_cand = kernel(candidate)
        L_new = float(np.vdot(K_cand, candidate))
        if L_new > L:
            # rounding noise at a stationary point
            converged = True
            break
        decrease = L - L_new
        pi, K_pi, L = candidate, K_cand, L_new
        history.append(L)
        if decrease <= opts.tol * max(abs(history[-2]), 1e-300) or L <= 1e-300:
            converged = True
            break
    np.maximum(pi, 0.0, out=pi)
    return pi, it, converged, history


def _as_space(X) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(X, MetricMeasureSpace):
        return X.D, X.w
    D, w = X
    return np.asarray(D, dtype=np.float64), _check_weights(w, "weights")


def gw_hat_p(X, Y, p: int | None = None, opts: GWOptions | None = None) -> GWResult:
    """Gromov-Wasserstein estimate between two finite metric measure spaces.

    ``X`` and ``Y`` are :class:`MetricMeasureSpace` objects or ``(D, w)``
    pairs. Every initialization in the restart set is run in both argument
    orders and the smallest objective wins.
    """
    opts = opts or GWOptions()
    if p is not None and p != opts.p:
        opts = dataclasses.replace(opts, p=p)
    D1, mu = _as_space(X)
    D2, nu = _as_space(Y)
    starts = initial_couplings(mu, nu, opts)

    runs = []
    for _, pi0 in starts:
        pi, iters, ok, hist = _conditional_gradient(D1, D2, mu, nu, pi0, opts)
        runs.append((_support_objective(pi, D1, D2, opts.p), pi, iters, ok, hist))
        if opts.symmetrize:
            piT, iters, ok, hist = _conditional_gradient(D2, D1, nu, mu, pi0.T.copy(), opts)
            runs.append((_support_objective(piT.T, D1, D2, opts.p), piT.T.copy(), iters, ok, hist))
    best = min(range(len(runs)), key=lambda k: runs[k][0])
    L, pi, iters, ok, hist = runs[best]
    return GWResult(
        value=0.5 * L ** (1.0 / opts.p),
        coupling=pi,
        objective=L,
        iterations=iters,
        converged=ok,
        restarts_used=len(starts),
        history=tuple(hist),
    )
