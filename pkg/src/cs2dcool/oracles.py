"""Independent checks of the frequency-domain occupancies.

The steady-state covariance of a stable linear model solves
A V + V A^T + D = 0; a stochastic ensemble integrated with Euler-Maruyama
estimates the same covariance in the time domain.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from .linear_model import LinearModel


def steady_covariance(model: LinearModel) -> np.ndarray:
    """Symmetrized steady-state covariance <{X_i, X_j}>/2."""
    model.check_stable()
    return solve_continuous_lyapunov(model.drift, -model.diffusion)


def lyapunov_occupancy(model: LinearModel) -> dict:
    """Occupancy of every mechanical mode from the steady covariance."""
    V = steady_covariance(model)
    out = {}
    for q in model.frequencies:
        i, j = model.index(q), model.index("p_" + q)
        out["n_" + q] = 0.25 * (V[i, i] + V[j, j]) - 0.5
        out["n_" + q + "_position"] = 0.5 * V[i, i] - 0.5
    return out


def euler_maruyama(model: LinearModel, dt: float, n_steps: int, n_traj: int,
                   seed: int = 0, burn_in: int = 0, stride: int = 1,
                   x0: np.ndarray | None = None) -> np.ndarray:
    """Ensemble covariance of the state, time- and ensemble-averaged after ``burn_in``.

    Trajectories share the step loop (vectorized) but each draws from its own
    stream spawned from ``seed``, so results do not depend on batching.
    The model should be in units where drift entries times ``dt`` are small;
    the physical parameters are far too stiff (gamma/omega ~ 1e-8) for this.
    """
    model.check_stable()
    A = model.drift
    B = model.noise_gain * np.sqrt(model.noise_psd)[None, :]
    n = model.dim
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_traj)]
    X = np.zeros((n_traj, n)) if x0 is None else np.tile(x0, (n_traj, 1)).astype(float)
    step_T = (np.eye(n) + A * dt).T
    gain_T = np.sqrt(dt) * B.T
    acc = np.zeros((n, n))
    count = 0
    chunk = 2048
    for start in range(0, n_steps, chunk):
        m = min(chunk, n_steps - start)
        noise = np.stack([r.standard_normal((m, n)) for r in streams], axis=1) @ gain_T
        for k in range(m):
            X = X @ step_T + noise[k]
            kk = start + k
            if kk >= burn_in and (kk - burn_in) % stride == 0:
                acc += X.T @ X
                count += n_traj
    if count == 0:
        raise ValueError("no samples collected: burn_in >= n_steps")
    return acc / count


def em_occupancy(model: LinearModel, **kwargs) -> dict:
    V = euler_maruyama(model, **kwargs)
    out = {}
    for q in model.frequencies:
        i, j = model.index(q), model.index("p_" + q)
        out["n_" + q] = 0.25 * (V[i, i] + V[j, j]) - 0.5
        out["n_" + q + "_position"] = 0.5 * V[i, i] - 0.5
    return out
