"""Derived branching/immigration quantities and conditional moments.

From an admissible tuple this module builds the effective drift matrix
btilde, the effective immigration vector beta_tilde, the second-moment
matrices C_k, and (in the critical irreducible case) the ray-averaged
cbar = sum_k u_right[k] C_k:

    btilde[i, j] = B[i, j] + int (z_i - delta_ij)^+ mu_j(dz)
    beta_tilde   = beta + int z nu(dz)
    C_k          = 2 c_k e_k e_k^T + int z z^T mu_k(dz)

The conditional first moment of the process is
E(X_t | X_0 = x) = exp(t btilde) x + int_0^t exp(u btilde) beta_tilde du,
and for the pure-branching companion (beta = 0, nu empty) the conditional
covariance is
var(Z_t | Z_0 = z) = sum_l int_0^t (e_l . exp((t-u) btilde) z)
                                exp(u btilde) C_l exp(u btilde)^T du.

Criticality is classified from the spectral abscissa of btilde and
depends only on the branching data (B, mu, c), never on beta or nu.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import matops
from .matops import CRITICAL_TOL, PerronPair, SpectralSummary
from .model import CbiParams, validate

SUBCRITICAL = "subcritical"
CRITICAL = "critical"
SUPERCRITICAL = "supercritical"
NOT_IRREDUCIBLE = "not-irreducible"


@dataclass(frozen=True, eq=False)
class DerivedQuantities:
    btilde: np.ndarray
    beta_tilde: np.ndarray
    big_c: tuple[np.ndarray, ...]
    cbar: np.ndarray | None
    classification: str
    spectral: SpectralSummary
    perron: PerronPair | None


def _require_admissible(params: CbiParams) -> None:
    report = validate(params)
    if not report.admissible:
        raise ValueError("inadmissible parameters: " + "; ".join(report.violations))


def derive(params: CbiParams, crit_tol: float = CRITICAL_TOL) -> DerivedQuantities:
    """All derived quantities plus the criticality classification.

    cbar (and the Perron pair) are only defined in the critical
    irreducible case; otherwise those fields are None.
    """
    _require_admissible(params)
    d = params.d

    btilde = params.B.copy()
    for j, m in enumerate(params.mu):
        if m.natoms:
            btilde[:, j] += m.integrate(
                lambda z: np.maximum(z - np.eye(d)[j], 0.0))

    beta_tilde = params.beta + params.nu.integrate(lambda z: z)

    big_c = []
    for k, m in enumerate(params.mu):
        C = np.zeros((d, d))
        C[k, k] = 2.0 * params.c[k]
        if m.natoms:
            C = C + m.integrate(lambda z: z[:, :, None] * z[:, None, :])
        big_c.append(C)

    summary = matops.spectral(btilde)
    if not matops.is_irreducible(btilde):
        classification = NOT_IRREDUCIBLE
    elif summary.spectral_abscissa < -crit_tol:
        classification = SUBCRITICAL
    elif summary.spectral_abscissa > crit_tol:
        classification = SUPERCRITICAL
    else:
        classification = CRITICAL

    cbar = None
    perron = None
    if classification == CRITICAL:
        perron = matops.perron_pair(btilde, crit_tol=crit_tol)
        cbar = sum(perron.u_right[k] * big_c[k] for k in range(d))

    return DerivedQuantities(
        btilde=btilde,
        beta_tilde=beta_tilde,
        big_c=tuple(big_c),
        cbar=cbar,
        classification=classification,
        spectral=summary,
        perron=perron,
    )


def mean(params: CbiParams, x: np.ndarray, t: float, order: int = 32) -> np.ndarray:
    """E(X_t | X_0 = x) = exp(t btilde) x + int_0^t exp(u btilde) beta_tilde du."""
    if t < 0:
        raise ValueError(f"time must be >= 0, got {t}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    dq = derive(params)
    if t == 0:
        return x.copy()
    return matops.mat_exp(dq.btilde, t) @ x + matops.exp_integral_vec(
        dq.btilde, dq.beta_tilde, t, order=order)


def variance_no_immigration(params: CbiParams, z: np.ndarray, t: float,
                            order: int = 32) -> np.ndarray:
    """Conditional covariance var(Z_t | Z_0 = z) of the pure-branching process.

    Only defined for parameters without immigration (beta = 0, nu empty);
    anything else is rejected.
    """
    if t < 0:
        raise ValueError(f"time must be >= 0, got {t}")
    if np.any(params.beta != 0) or params.nu.natoms:
        raise ValueError("variance_no_immigration requires beta = 0 and an empty nu")
    z = np.atleast_1d(np.asarray(z, dtype=float))
    dq = derive(params)
    d = params.d
    nodes, weights = matops.gauss_legendre(0.0, float(t), order)
    out = np.zeros((d, d))
    for u, w in zip(nodes, weights):
        g = matops.mat_exp(dq.btilde, t - u) @ z
        Eu = matops.mat_exp(dq.btilde, u)
        S = np.zeros((d, d))
        for ell in range(d):
            S += g[ell] * (Eu @ dq.big_c[ell] @ Eu.T)
        out += w * S
    return 0.5 * (out + out.T)
