"""Seeded Monte Carlo simulation of CBI paths and their scaling limits.

Paths are generated by Euler-Maruyama with full truncation: drift and
diffusion coefficients are evaluated at the positive part of the state,
and the state is truncated at 0 after every update, so every emitted
state is componentwise non-negative. Per step from state x:

    diffusion   sqrt(2 c_i max(x_i, 0)) dW_i   per coordinate,
    drift       ( beta + B x - diag(int (1 ^ z_i) mu_i(dz)) x ) dt
                  (the drift compensates the mu_i jump terms),
    immigration compound Poisson with rate nu(U_d), atoms weight-proportional,
    branching   per type i, Poisson with frozen rate x_i mu_i(U_d) within
                  the step, atoms weight-proportional.

Reproducibility: each path owns a counter-based Philox substream keyed by
(seed, path index), so results are bit-identical across runs and
independent of path batching; randomness is consumed in fixed windows of
1024 steps. Jump counts use exact inverse-CDF Poisson sampling from
per-(path, step, source) uniforms.

Also provided: the step-scaled chain t -> X_{floor(nt)} / n and, for
critical irreducible models, the limiting scalar squared-Bessel-type
diffusion dY = <u_left, beta_tilde> dt + sqrt(<cbar u_left, u_left> Y^+) dW
embedded on the ray spanned by u_right.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from . import moments
from .errors import ClassificationError
from .model import CbiParams, validate

#: Steps per randomness window (fixed so stream layout never depends on batching).
WINDOW = 1024
#: Upper bound on simultaneously held random draws (per path block).
DRAW_BUDGET = 12_000_000


@dataclass(frozen=True, eq=False)
class PathConfig:
    """Simulation request: start, horizon, step, seed, path count."""

    x0: np.ndarray
    horizon: float
    dt: float
    seed: int
    n_paths: int

    def __post_init__(self):
        object.__setattr__(self, "x0", np.atleast_1d(np.asarray(self.x0, dtype=float)))
        if self.horizon <= 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.dt <= 0 or self.dt >= self.horizon:
            raise ValueError(f"dt must satisfy 0 < dt < horizon, got dt={self.dt}")
        if self.n_paths < 1:
            raise ValueError(f"n_paths must be >= 1, got {self.n_paths}")


@dataclass(frozen=True, eq=False)
class SamplePath:
    """One simulated path on a fixed grid; states are componentwise >= 0.

    jump_log records (time, source, jump vector) with source "immigration"
    or "branching-i" (1-based type); jumps are stamped with the right
    endpoint of the step they occurred in. For the limiting diffusion,
    `scalar` carries the 1-d path whose ray embedding is in `states`.
    """

    times: np.ndarray
    states: np.ndarray
    jump_log: tuple = field(default=())
    scalar: np.ndarray | None = None


def _path_rng(seed: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


def poisson_from_uniform(u: np.ndarray, mean) -> np.ndarray:
    """Exact inverse-CDF Poisson sampling driven by uniforms in [0, 1).

    Vectorized over elements; `mean` broadcasts against `u`. Means above
    100 are rejected: a first-order jump scheme needs rate*dt << 1 and a
    violation that large indicates a far-too-coarse step.
    """
    u = np.asarray(u, dtype=float)
    mean_arr = np.broadcast_to(np.asarray(mean, dtype=float), u.shape).copy()
    if np.any(mean_arr < 0):
        raise ValueError("Poisson mean must be >= 0")
    if np.any(mean_arr > 100):
        raise ValueError(
            f"per-step jump intensity {mean_arr.max():.3g} too large; decrease dt")
    pmf = np.exp(-mean_arr)
    cdf = pmf.copy()
    counts = np.zeros(u.shape, dtype=np.int64)
    pending = u >= cdf
    k = 0
    k_max = int(10 * max(1.0, float(mean_arr.max())) + 200)
    while pending.any():
        k += 1
        if k > k_max:  # cdf saturated in floating point; tail mass ~ 0
            counts[pending] = k
            break
        pmf = pmf * mean_arr / k
        cdf = cdf + pmf
        counts[pending] = k
        pending = u >= cdf
    return counts


def _measure_tables(params: CbiParams):
    nu = params.nu
    nu_cum = np.cumsum(nu.weights) / nu.total_mass if nu.natoms else None
    mu_data = []
    for i, m in enumerate(params.mu):
        if m.natoms:
            mu_data.append((i, m.total_mass, np.cumsum(m.weights) / m.total_mass, m.points))
    kappa = np.array([
        float(m.weights @ np.minimum(1.0, m.points[:, i])) if m.natoms else 0.0
        for i, m in enumerate(params.mu)])
    return nu_cum, mu_data, kappa


def _pick_atom(rng: np.random.Generator, cum: np.ndarray) -> int:
    a = int(np.searchsorted(cum, rng.random(), side="right"))
    return min(a, len(cum) - 1)


def _simulate_grid(params: CbiParams, x0: np.ndarray, K: int, h: float,
                   seed: int, n_paths: int, record_idx: np.ndarray):
    """Shared full-truncation Euler grid kernel, vectorized over path blocks.

    Returns states recorded at the grid indices `record_idx` (shape
    (n_paths, len(record_idx), d)) and per-path jump logs.
    """
    d = params.d
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (d,):
        raise ValueError(f"x0 must have length d={d}, got shape {x0.shape}")
    c2 = 2.0 * params.c
    B_T = params.B.T.copy()
    beta = params.beta
    nu_cum, mu_data, kappa = _measure_tables(params)
    nu_mass = params.nu.total_mass
    sqrt_h = math.sqrt(h)

    record_idx = np.asarray(record_idx, dtype=int)
    rec_flag = np.zeros(K + 1, dtype=bool)
    rec_flag[record_idx] = True
    rec_slot = np.cumsum(rec_flag) - 1

    states_rec = np.empty((n_paths, int(rec_flag.sum()), d))
    jump_logs: list[list] = [[] for _ in range(n_paths)]

    draws_per_step = d + (1 if nu_mass > 0 else 0) + len(mu_data)
    block = max(1, int(DRAW_BUDGET / (WINDOW * draws_per_step)))

    for p0 in range(0, n_paths, block):
        p1 = min(p0 + block, n_paths)
        P = p1 - p0
        rngs = [_path_rng(seed, p) for p in range(p0, p1)]
        x = np.tile(x0, (P, 1))
        if rec_flag[0]:
            states_rec[p0:p1, 0, :] = x

        for w0 in range(0, K, WINDOW):
            width = min(WINDOW, K - w0)
            normals = np.empty((P, width, d))
            for pj, rng in enumerate(rngs):
                normals[pj] = rng.standard_normal((width, d))
            u_nu = None
            if nu_mass > 0:
                u_nu = np.empty((P, width))
                for pj, rng in enumerate(rngs):
                    u_nu[pj] = rng.random(width)
            u_mu = {}
            for (i, _, _, _) in mu_data:
                arr = np.empty((P, width))
                for pj, rng in enumerate(rngs):
                    arr[pj] = rng.random(width)
                u_mu[i] = arr

            for kw in range(width):
                k = w0 + kw
                t_next = (k + 1) * h
                xp = np.maximum(x, 0.0)
                x_new = (x + h * (beta + xp @ B_T - xp * kappa)
                         + np.sqrt(c2 * xp) * (sqrt_h * normals[:, kw, :]))

                if nu_mass > 0:
                    counts = poisson_from_uniform(u_nu[:, kw], nu_mass * h)
                    for pj in np.nonzero(counts)[0]:
                        for _ in range(int(counts[pj])):
                            z = params.nu.points[_pick_atom(rngs[pj], nu_cum)]
                            x_new[pj] += z
                            jump_logs[p0 + pj].append((t_next, "immigration", z.copy()))
                for (i, mass, cum, points) in mu_data:
                    counts = poisson_from_uniform(u_mu[i][:, kw], mass * h * xp[:, i])
                    for pj in np.nonzero(counts)[0]:
                        for _ in range(int(counts[pj])):
                            z = points[_pick_atom(rngs[pj], cum)]
                            x_new[pj] += z
                            jump_logs[p0 + pj].append((t_next, f"branching-{i + 1}", z.copy()))

                x = np.maximum(x_new, 0.0)
                if not np.all(np.isfinite(x)):
                    raise ValueError(f"non-finite state at step {k + 1}; decrease dt")
                if rec_flag[k + 1]:
                    states_rec[p0:p1, rec_slot[k + 1], :] = x

    return states_rec, jump_logs


def _grid(horizon: float, dt: float) -> tuple[int, float, np.ndarray]:
    """Round dt to divide the horizon evenly; returns (K, step, times)."""
    K = max(1, int(round(horizon / dt)))
    h = horizon / K
    return K, h, np.linspace(0.0, horizon, K + 1)


def _require_admissible(params: CbiParams) -> None:
    report = validate(params)
    if not report.admissible:
        raise ValueError("inadmissible parameters: " + "; ".join(report.violations))


def simulate_cbi(params: CbiParams, cfg: PathConfig) -> list[SamplePath]:
    """Simulate CBI paths on the grid 0, dt, ..., horizon."""
    _require_admissible(params)
    K, h, times = _grid(cfg.horizon, cfg.dt)
    states, logs = _simulate_grid(params, cfg.x0, K, h, cfg.seed, cfg.n_paths,
                                  np.arange(K + 1))
    return [SamplePath(times=times, states=states[p], jump_log=tuple(logs[p]))
            for p in range(cfg.n_paths)]


def simulate_scaled_step(params: CbiParams, n: int, cfg: PathConfig) -> list[SamplePath]:
    """Simulate the step-scaled chain t -> X_{floor(nt)} / n on [0, horizon].

    cfg.x0 is the *scaled* start, so the base chain starts at n * x0 and
    runs to horizon n * T with step cfg.dt; the emitted path is the
    piecewise-constant scaled step function on the output grid. The
    emitted jump_log is empty (the path is a derived step function).
    """
    if n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    _require_admissible(params)
    base_T = n * cfg.horizon
    K_base = max(1, int(round(base_T / cfg.dt)))
    h = base_T / K_base
    M = int(math.floor(n * cfg.horizon + 1e-9))
    int_idx = np.minimum(np.round(np.arange(M + 1) / h).astype(int), K_base)
    record_idx = np.unique(int_idx)
    base_states, _ = _simulate_grid(params, float(n) * cfg.x0, K_base, h,
                                    cfg.seed, cfg.n_paths, record_idx)
    slot_of_m = np.searchsorted(record_idx, int_idx)

    K_out, _, times = _grid(cfg.horizon, cfg.dt)
    m_of_t = np.minimum(np.floor(float(n) * times + 1e-9).astype(int), M)
    take = slot_of_m[m_of_t]
    return [SamplePath(times=times, states=base_states[p][take] / float(n))
            for p in range(cfg.n_paths)]


def simulate_limit_diffusion(params: CbiParams, cfg: PathConfig,
                             crit_tol: float = 1e-9) -> list[SamplePath]:
    """Simulate the limiting ray diffusion of a critical irreducible model.

    The scalar component solves dY = <u_left, beta_tilde> dt
    + sqrt(<cbar u_left, u_left> Y^+) dW from Y_0 = <u_left, x0> (0 for
    the canonical start); states carry the embedding Y_t * u_right and
    `scalar` the 1-d path.
    """
    dq = moments.derive(params, crit_tol=crit_tol)
    if dq.classification != moments.CRITICAL or dq.perron is None:
        raise ClassificationError(
            f"limit diffusion requires a critical irreducible model, got "
            f"'{dq.classification}'")
    if cfg.x0.shape != (params.d,):
        raise ValueError(f"x0 must have length d={params.d}, got shape {cfg.x0.shape}")

    drift = float(dq.perron.u_left @ dq.beta_tilde)
    diff2 = float(dq.perron.u_left @ (dq.cbar @ dq.perron.u_left))
    y0 = float(dq.perron.u_left @ cfg.x0)

    K, h, times = _grid(cfg.horizon, cfg.dt)
    sqrt_h = math.sqrt(h)
    scalars = np.empty((cfg.n_paths, K + 1))

    block = max(1, int(DRAW_BUDGET / WINDOW))
    for p0 in range(0, cfg.n_paths, block):
        p1 = min(p0 + block, cfg.n_paths)
        P = p1 - p0
        rngs = [_path_rng(cfg.seed, p) for p in range(p0, p1)]
        y = np.full(P, y0)
        scalars[p0:p1, 0] = y
        for w0 in range(0, K, WINDOW):
            width = min(WINDOW, K - w0)
            normals = np.empty((P, width))
            for pj, rng in enumerate(rngs):
                normals[pj] = rng.standard_normal(width)
            for kw in range(width):
                yp = np.maximum(y, 0.0)
                y = np.maximum(y + drift * h + np.sqrt(diff2 * yp) * sqrt_h * normals[:, kw], 0.0)
                scalars[p0:p1, w0 + kw + 1] = y

    u_right = dq.perron.u_right
    return [SamplePath(times=times, states=np.outer(scalars[p], u_right),
                       scalar=scalars[p])
            for p in range(cfg.n_paths)]


def paths_to_csv(paths: list[SamplePath], out: TextIO) -> None:
    """Write paths as CSV rows path_id, t, x_1, ..., x_d (stable formatting)."""
    d = paths[0].states.shape[1]
    out.write("path_id,t," + ",".join(f"x_{i + 1}" for i in range(d)) + "\n")
    for pid, path in enumerate(paths):
        for t, row in zip(path.times, path.states):
            cells = ",".join(repr(float(v)) for v in row)
            out.write(f"{pid},{float(t)!r},{cells}\n")
