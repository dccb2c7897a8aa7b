"""Batched multi-start gradient descent for small template objectives.

The objective is evaluated on whole batches of parameter vectors at once, so
all restarts advance together: one iteration evaluates every restart's
central-difference probes and line-search candidates in a single call. The
search stops as soon as any restart reaches tol (callers only need the best).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

_LADDER = 0.5 ** np.arange(8)  # line-search fractions of the current step
_ARMIJO = 1e-4
_MIN_STEP = 1e-13
_STALL_LIMIT = 25
_STALL_EPS = 1e-15
_STALL_REL = 1e-4  # progress below this fraction of f counts as stalled


@dataclass(frozen=True)
class MinimizeResult:
    params: np.ndarray
    value: float
    iterations: int
    converged: bool  # reached tol


def central_diff_gradient(f_batch: Callable[[np.ndarray], np.ndarray],
                          x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a batch objective at a single point."""
    p = x.shape[0]
    eye = np.eye(p)
    probes = np.concatenate([x[None, :] + h * eye, x[None, :] - h * eye], axis=0)
    v = f_batch(probes)
    return (v[:p] - v[p:]) / (2.0 * h)


def minimize_multistart(f_batch: Callable[[np.ndarray], np.ndarray],
                        num_params: int,
                        restarts: int = 8,
                        max_iters: int = 500,
                        tol: float = 1e-7,
                        seed: int = 0,
                        h: float = 1e-6,
                        init_span: float = 2.0 * math.pi,
                        init: np.ndarray | None = None) -> MinimizeResult:
    """Minimize f over R^num_params from one pinned start plus seeded random
    starts. The pinned start is the origin, or init when given (warm restart)."""
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    if max_iters < 0 or tol < 0 or num_params < 0:
        raise ValueError("max_iters, tol and num_params must be >= 0")
    if init is not None and np.asarray(init, dtype=float).shape != (num_params,):
        raise ValueError(f"init must have shape ({num_params},)")
    rng = np.random.default_rng(seed)
    p = num_params
    x = rng.uniform(0.0, init_span, size=(restarts, p))
    x[0, :] = 0.0 if init is None else np.asarray(init, dtype=float)
    if p == 0:
        v = float(f_batch(np.zeros((1, 0)))[0])
        return MinimizeResult(np.zeros(0), v, 0, v <= tol)
    f = f_batch(x)
    step = np.full(restarts, 0.5)
    active = np.ones(restarts, dtype=bool)
    stall = np.zeros(restarts, dtype=int)
    eye = np.eye(p)
    iters = 0

    best_i = int(np.argmin(f))
    if f[best_i] <= tol:
        return MinimizeResult(x[best_i].copy(), float(f[best_i]), 0, True)

    for iters in range(1, max_iters + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        xa, fa = x[idx], f[idx]
        a = idx.size
        probes = np.concatenate(
            [xa[:, None, :] + h * eye[None, :, :], xa[:, None, :] - h * eye[None, :, :]],
            axis=1,
        ).reshape(a * 2 * p, p)
        pv = f_batch(probes).reshape(a, 2 * p)
        grad = (pv[:, :p] - pv[:, p:]) / (2.0 * h)
        gn2 = np.einsum("ij,ij->i", grad, grad)

        dead = gn2 < 1e-24
        trial = step[idx, None] * _LADDER[None, :]
        cand = xa[:, None, :] - trial[:, :, None] * grad[:, None, :]
        cv = f_batch(cand.reshape(a * _LADDER.size, p)).reshape(a, _LADDER.size)
        ok = cv <= fa[:, None] - _ARMIJO * trial * gn2[:, None]
        has_ok = ok.any(axis=1) & ~dead
        first = np.argmax(ok, axis=1)

        for row in range(a):
            g = idx[row]
            if dead[row]:
                active[g] = False
                continue
            if has_ok[row]:
                j = first[row]
                improved = f[g] - cv[row, j]
                x[g] = cand[row, j]
                f[g] = cv[row, j]
                step[g] = min(trial[row, j] * 2.0, 1e3)
                # rows stuck on a non-zero floor keep making micro-improvements,
                # so the stall test is relative to the current value
                floor = max(_STALL_EPS, _STALL_REL * f[g])
                stall[g] = stall[g] + 1 if improved < floor else 0
            else:
                step[g] *= _LADDER[-1] * 0.5
                stall[g] += 1
            if f[g] <= tol or step[g] < _MIN_STEP or stall[g] > _STALL_LIMIT:
                active[g] = False
        if np.min(f) <= tol:
            break

    best_i = int(np.argmin(f))
    return MinimizeResult(x[best_i].copy(), float(f[best_i]), iters, bool(f[best_i] <= tol))
