"""Logistic regression fitted by Fisher scoring."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import RankDeficiencyError, ShapeError

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 50
SEPARATION_BOUND = 30.0
PROB_FLOOR = 1e-12


def logistic(eta):
    eta = np.asarray(eta, dtype=float)
    # split by sign so exp never overflows
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _unpack(X, y=None):
    if hasattr(X, "X") and hasattr(X, "y"):
        return np.asarray(X.X, dtype=float), np.asarray(X.y if y is None else y, dtype=float), list(X.columns)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if y is None:
        raise ShapeError("labels are required when X is a plain array")
    return X, np.asarray(y, dtype=float), [f"x{j}" for j in range(X.shape[1])]


def loglik(beta, X, y=None) -> float:
    """Bernoulli log-likelihood of the logit model, evaluated without forming log(0)."""
    A, U, _ = _unpack(X, y)
    beta = np.asarray(beta, dtype=float)
    if beta.ndim != 1 or A.shape[1] != beta.shape[0] or A.shape[0] != U.shape[0]:
        raise ShapeError(f"design {A.shape}, labels {U.shape}, coefficients {beta.shape} do not agree")
    eta = A @ beta
    # U log p + (1-U) log(1-p) == U*eta - log(1 + e^eta)
    return float(np.sum(U * eta - np.logaddexp(0.0, eta)))


def score(beta, X, y=None) -> np.ndarray:
    """Gradient of the log-likelihood."""
    A, U, _ = _unpack(X, y)
    return A.T @ (U - logistic(A @ np.asarray(beta, dtype=float)))


def fisher_information(beta, X) -> np.ndarray:
    A = np.atleast_2d(np.asarray(getattr(X, "X", X), dtype=float))
    p = logistic(A @ np.asarray(beta, dtype=float))
    w = p * (1.0 - p)
    return A.T @ (w[:, None] * A)


def _dependent_columns(A: np.ndarray, names: list[str]) -> list[str]:
    bad, kept = [], []
    for j in range(A.shape[1]):
        trial = A[:, kept + [j]]
        if np.linalg.matrix_rank(trial) < len(kept) + 1:
            bad.append(names[j])
        else:
            kept.append(j)
    return bad


@dataclass
class FitResult:
    coefficients: np.ndarray
    converged: bool
    iterations: int
    final_loglik: float
    fitted_probs: np.ndarray
    columns: list[str] = field(default_factory=list)
    separation: bool = False
    warnings: list[str] = field(default_factory=list)

    def named(self) -> dict[str, float]:
        return dict(zip(self.columns, map(float, self.coefficients)))

    def to_json(self) -> str:
        return json.dumps({
            "coefficients": self.named(),
            "converged": self.converged,
            "iterations": self.iterations,
            "final_loglik": self.final_loglik,
            "separation": self.separation,
            "warnings": self.warnings,
        }, indent=2)


def fit(X, y=None, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> FitResult:
    """Maximize the log-likelihood by Fisher scoring from beta = 0, halving steps that lower it."""
    A, U, names = _unpack(X, y)
    n, k = A.shape
    if U.shape != (n,):
        raise ShapeError(f"{n} design rows but {U.shape[0]} labels")
    if n < k:
        raise ShapeError(f"{n} rows cannot identify {k} coefficients")
    bad = _dependent_columns(A, names)
    if bad:
        raise RankDeficiencyError(bad)

    beta = np.zeros(k)
    ll = loglik(beta, A, U)
    converged = separation = False
    notes: list[str] = []
    it = 0
    for it in range(1, max_iter + 1):
        p = logistic(A @ beta)
        w = p * (1.0 - p)
        info = A.T @ (w[:, None] * A)
        try:
            step = np.linalg.solve(info, A.T @ (U - p))
        except np.linalg.LinAlgError:
            raise RankDeficiencyError(_dependent_columns(np.sqrt(w)[:, None] * A, names) or names) from None
        new = beta + step
        new_ll = loglik(new, A, U)
        halvings = 0
        # near the optimum ll is flat to rounding; only a real decrease triggers halving
        slack = 1e-12 * (1.0 + abs(ll))
        while new_ll < ll - slack and halvings < 30:
            step /= 2.0
            new = beta + step
            new_ll = loglik(new, A, U)
            halvings += 1
        if np.any(np.abs(new) > SEPARATION_BOUND):
            separation = True
            notes.append(f"coefficients exceeded {SEPARATION_BOUND:g} at iteration {it}; "
                         "data look (quasi-)separated, keeping the last stable iterate")
            break
        change = np.max(np.abs(new - beta))
        if new_ll >= ll - slack:
            beta, ll = new, new_ll
        if change < tol:
            converged = True
            break
    probs = np.clip(logistic(A @ beta), PROB_FLOOR, 1.0 - PROB_FLOOR)
    return FitResult(beta, converged, it, ll, probs, names, separation, notes)


def predict_proba(result: FitResult, X_new) -> np.ndarray:
    if hasattr(X_new, "columns"):
        if list(X_new.columns) != list(result.columns):
            raise ShapeError(f"column layout {X_new.columns} differs from training layout {result.columns}")
        A = np.asarray(X_new.X, dtype=float)
    else:
        A = np.atleast_2d(np.asarray(X_new, dtype=float))
    if A.shape[1] != result.coefficients.shape[0]:
        raise ShapeError(f"{A.shape[1]} columns, model has {result.coefficients.shape[0]} coefficients")
    return logistic(A @ result.coefficients)


def predict(result: FitResult, X_new) -> np.ndarray:
    """Class 1 iff the fitted probability is strictly above one half."""
    return (predict_proba(result, X_new) > 0.5).astype(int)
