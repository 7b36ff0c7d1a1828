"""Affine transform machinery for CBI processes.

The transition Laplace transform of a CBI process is exponentially affine
in the initial state:

    E[exp(-<lam, X_t>) | X_0 = x]
        = exp( -<x, v(t, lam)> - int_0^t psi(v(s, lam)) ds ),

where v is the unique locally bounded R_+^d-valued solution of the
generalized Riccati system

    d/dt v_i(t, lam) = -phi_i(v(t, lam)),    v(0, lam) = lam,

with branching mechanism

    phi_i(lam) = c_i lam_i^2 - <B e_i, lam>
                 + int ( exp(-<lam, z>) - 1 + lam_i (1 ^ z_i) ) mu_i(dz)

and immigration mechanism

    psi(lam) = <beta, lam> - int ( exp(-<lam, z>) - 1 ) nu(dz)
             = <beta_tilde, lam>
               - int ( exp(-<lam, z>) - 1 + <lam, z> ) nu(dz).

Both psi forms are implemented (they agree identically on finite atomic
measures). The Riccati system is integrated by an adaptive embedded
Runge-Kutta 4(5) pair with dense output; the psi-integral is evaluated by
Gauss-Legendre quadrature against the dense output so that the ODE state
stays exactly the Riccati system. The small-lam limits of the first two
lam-derivatives of v are available in closed form,

    lim_{lam->0} d v_k / d lam_i (t, lam) = [exp(t btilde)]_{i,k},
    lim_{lam->0} d^2 v_k / d lam_i d lam_j (t, lam)
        = -e_k . exp(t btilde^T) int_0^t exp(-u btilde^T)
              sum_l e_l ( e_i . exp(u btilde) C_l exp(u btilde)^T e_j ) du,

together with finite-difference probes for both (central differences at a
small positive base offset, Richardson-extrapolated in the offset since
the limits sit on the boundary lam = 0).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from . import matops, moments
from .errors import SolverError
from .model import CbiParams, validate

#: Default ODE tolerances; the systems here are smooth and non-stiff.
DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
#: Run fails if the summed negative undershoot of v exceeds this.
CLIP_BUDGET = 1e-8


def _beta_tilde(params: CbiParams) -> np.ndarray:
    return params.beta + params.nu.integrate(lambda z: z)


def _phi_closure(params: CbiParams) -> Callable[[np.ndarray], np.ndarray]:
    """Branching mechanism with per-measure constants hoisted out."""
    c = params.c
    BT = params.B.T.copy()
    atom_terms = []
    for i, m in enumerate(params.mu):
        if m.natoms:
            kappa = float(m.weights @ np.minimum(1.0, m.points[:, i]))
            atom_terms.append((i, m.weights, m.points, kappa))

    def phi_fn(lam: np.ndarray) -> np.ndarray:
        out = c * lam * lam - BT @ lam
        for i, w, z, kappa in atom_terms:
            out[i] += w @ (np.exp(-(z @ lam)) - 1.0) + lam[i] * kappa
        return out

    return phi_fn


def phi(params: CbiParams, lam: np.ndarray) -> np.ndarray:
    """Branching mechanism phi(lam), one component per type."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    return _phi_closure(params)(lam)


def psi(params: CbiParams, lam: np.ndarray) -> float:
    """Immigration mechanism psi(lam) = <beta, lam> - int (e^{-<lam,z>} - 1) nu(dz)."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    val = float(params.beta @ lam)
    if params.nu.natoms:
        val -= float(params.nu.weights @ (np.exp(-(params.nu.points @ lam)) - 1.0))
    return val


def psi_compensated(params: CbiParams, lam: np.ndarray) -> float:
    """The equivalent compensated form of psi, written against beta_tilde."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    val = float(_beta_tilde(params) @ lam)
    if params.nu.natoms:
        inner = params.nu.points @ lam
        val -= float(params.nu.weights @ (np.exp(-inner) - 1.0 + inner))
    return val


def psi_grad(params: CbiParams, lam: np.ndarray) -> np.ndarray:
    """Analytic gradient of psi on lam > 0; tends to beta_tilde as lam -> 0."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    grad = _beta_tilde(params).astype(float)
    if params.nu.natoms:
        factor = np.exp(-(params.nu.points @ lam)) - 1.0  # (m,)
        grad += (params.nu.weights * factor) @ params.nu.points
    return grad


def _psi_columns(params: CbiParams, V: np.ndarray) -> np.ndarray:
    """psi evaluated at each column of V (shape (d, m)) -> (m,)."""
    vals = params.beta @ V
    if params.nu.natoms:
        vals = vals - params.nu.weights @ (np.exp(-(params.nu.points @ V)) - 1.0)
    return vals


@dataclass(frozen=True, eq=False)
class VSolution:
    """Dense-output Riccati solution on [0, t_max] with its psi-integral.

    dense_values clips tiny negative solver undershoot to 0; the summed
    undershoot over the solver and quadrature nodes is accounted at
    construction and must stay below CLIP_BUDGET.
    """

    lam: np.ndarray
    t_max: float
    psi_integral: float
    solver_stats: dict
    _dense: object

    def dense_values(self, s: float) -> np.ndarray:
        if s < 0 or s > self.t_max * (1 + 1e-12) + 1e-300:
            raise ValueError(f"s={s} outside [0, {self.t_max}]")
        if s == 0 or self._dense is None:
            return self.lam.copy()
        return np.clip(self._dense(min(s, self.t_max)), 0.0, None)

    @property
    def v_final(self) -> np.ndarray:
        return self.dense_values(self.t_max)


def solve_v(params: CbiParams, t: float, lam: np.ndarray, *,
            rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
            quad_order: int = 32, clip_budget: float = CLIP_BUDGET) -> VSolution:
    """Integrate the Riccati system on [0, t] and attach the psi-integral."""
    if t < 0:
        raise ValueError(f"time must be >= 0, got {t}")
    if rtol <= 0 or atol <= 0:
        raise ValueError("tolerances must be positive")
    report = validate(params)
    if not report.admissible:
        raise ValueError("inadmissible parameters: " + "; ".join(report.violations))
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if lam.shape != (params.d,):
        raise ValueError(f"lam must have length d={params.d}, got shape {lam.shape}")
    if np.any(lam < 0) or not np.all(np.isfinite(lam)):
        raise ValueError("lam must be componentwise >= 0 and finite")

    if t == 0:
        stats = {"steps": 0, "nfev": 0, "clip_total": 0.0, "rtol": rtol, "atol": atol}
        return VSolution(lam=lam, t_max=0.0, psi_integral=0.0,
                         solver_stats=stats, _dense=None)

    phi_fn = _phi_closure(params)
    sol = solve_ivp(lambda s, v: -phi_fn(v), (0.0, float(t)), lam,
                    method="RK45", rtol=rtol, atol=atol, dense_output=True)
    if not sol.success:
        raise SolverError(f"Riccati solve failed: {sol.message}")
    if not np.all(np.isfinite(sol.y)):
        raise SolverError("Riccati solve produced non-finite state")

    nodes, weights = matops.gauss_legendre(0.0, float(t), quad_order)
    grid = np.union1d(sol.t, nodes)
    V = sol.sol(grid)
    clip_total = float(np.clip(-V, 0.0, None).sum())
    if clip_total > clip_budget:
        raise SolverError(
            f"negative undershoot {clip_total:.3e} exceeds clip budget {clip_budget:.1e}")

    Vq = np.clip(sol.sol(nodes), 0.0, None)
    psi_int = float(weights @ _psi_columns(params, Vq))
    stats = {"steps": len(sol.t) - 1, "nfev": int(sol.nfev),
             "clip_total": clip_total, "rtol": rtol, "atol": atol}
    return VSolution(lam=lam, t_max=float(t), psi_integral=psi_int,
                     solver_stats=stats, _dense=sol.sol)


def laplace_transform(params: CbiParams, t: float, x: np.ndarray, lam: np.ndarray,
                      **solver_kwargs) -> float:
    """exp(-<x, v(t, lam)> - int_0^t psi(v(s, lam)) ds); always in (0, 1]."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (params.d,):
        raise ValueError(f"x must have length d={params.d}, got shape {x.shape}")
    sol = solve_v(params, t, lam, **solver_kwargs)
    return float(np.exp(-float(x @ sol.v_final) - sol.psi_integral))


def v_jacobian_limit(params: CbiParams, t: float) -> np.ndarray:
    """The lam -> 0 limit of the Jacobian [d v_k / d lam_i]: exp(t btilde),
    indexed [i, k]."""
    dq = moments.derive(params)
    return matops.mat_exp(dq.btilde, t)


def v_jacobian_fd(params: CbiParams, t: float, eps: float = 1e-4, *,
                  richardson: bool = True, rtol: float = 1e-12,
                  atol: float = 1e-14) -> np.ndarray:
    """Finite-difference probe of the Jacobian limit.

    Central differences (step eps/2) around the base point eps*ones; the
    base offset contributes an O(eps) bias, removed by Richardson
    extrapolation of the estimates at eps and eps/2.
    """
    d = params.d

    def jac_at(e: float) -> np.ndarray:
        base = np.full(d, e)
        h = 0.5 * e
        J = np.empty((d, d))
        for i in range(d):
            step = h * np.eye(d)[i]
            vp = solve_v(params, t, base + step, rtol=rtol, atol=atol).v_final
            vm = solve_v(params, t, base - step, rtol=rtol, atol=atol).v_final
            J[i, :] = (vp - vm) / (2.0 * h)
        return J

    J1 = jac_at(eps)
    if not richardson:
        return J1
    return 2.0 * jac_at(0.5 * eps) - J1


def v_hessian_limit(params: CbiParams, t: float, i: int, j: int, k: int,
                    order: int = 32) -> float:
    """The lam -> 0 limit of d^2 v_k / d lam_i d lam_j (t, lam); always <= 0.

    Evaluates -e_k . exp(t btilde^T) int_0^t exp(-u btilde^T)
    sum_l e_l ( e_i . exp(u btilde) C_l exp(u btilde)^T e_j ) du by
    Gauss-Legendre quadrature.
    """
    dq = moments.derive(params)
    bt = dq.btilde
    d = params.d
    nodes, weights = matops.gauss_legendre(0.0, float(t), order)
    acc = np.zeros(d)
    for u, w in zip(nodes, weights):
        Eu = matops.mat_exp(bt, u)
        row_i = Eu[i, :]
        row_j = Eu[j, :]
        wvec = np.array([row_i @ C @ row_j for C in dq.big_c])
        acc += w * (matops.mat_exp(bt.T, -u) @ wvec)
    return float(-(matops.mat_exp(bt.T, t) @ acc)[k])


def v_hessian_fd(params: CbiParams, t: float, i: int, j: int, k: int,
                 eps: float = 1e-3, *, richardson: bool = True,
                 rtol: float = 1e-12, atol: float = 1e-14) -> float:
    """Finite-difference probe of the Hessian limit.

    Second central differences with step eps around the base eps*ones (the
    extreme evaluation points touch the boundary lam = 0, which is in the
    domain), Richardson-extrapolated in eps as in v_jacobian_fd.
    """
    d = params.d

    def vk(lam: np.ndarray) -> float:
        return float(solve_v(params, t, lam, rtol=rtol, atol=atol).v_final[k])

    def second_at(e: float) -> float:
        base = np.full(d, e)
        h = e
        ei = h * np.eye(d)[i]
        ej = h * np.eye(d)[j]
        if i == j:
            return (vk(base + ei) - 2.0 * vk(base) + vk(base - ei)) / h**2
        return (vk(base + ei + ej) - vk(base + ei - ej)
                - vk(base - ei + ej) + vk(base - ei - ej)) / (4.0 * h**2)

    A1 = second_at(eps)
    if not richardson:
        return A1
    return 2.0 * second_at(0.5 * eps) - A1
