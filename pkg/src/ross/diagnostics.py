"""Executable pieces of the convergence machinery.

Two kinds of checks live here. The learning-rate bound and the m-constants
are plain arithmetic on user-supplied smoothness/variance constants. The
identity checks (auxiliary-sequence step and mean-preservation recursions)
are exact algebraic consequences of the round updates with a doubly
stochastic W, so they must hold to floating-point accuracy on every run;
a violation means the gossip or the matrix is broken.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InvariantFailure


@dataclass
class GammaBound:
    """Three-branch upper bound on the learning rate."""

    branches: list  # float per branch; None where infeasible
    infeasible: list  # bool per branch
    bound: float | None  # min over feasible branches

    @property
    def all_infeasible(self) -> bool:
        return self.bound is None


def gamma_upper_bound(alpha: float, smooth_l: float, rho: float, omega_min: float) -> GammaBound:
    """Evaluate the three learning-rate branch expressions.

    Branch 3 contains a discriminant that can go negative (momentum too weak
    against the omega_min^-4 term); that branch is then flagged infeasible
    and excluded from the minimum.
    """
    if not 0.0 < alpha < 1.0:
        raise ConfigError("alpha must lie in (0, 1)")
    if smooth_l <= 0.0:
        raise ConfigError("smoothness constant must be positive")
    if not 0.0 <= rho < 1.0:
        raise ConfigError("rho must lie in [0, 1)")
    if not 0.0 < omega_min <= 1.0:
        raise ConfigError("omega_min must lie in (0, 1]")
    one_m_a = 1.0 - alpha
    inv_w4 = 1.0 / omega_min**4

    b1 = alpha * smooth_l / one_m_a**2
    b2 = one_m_a * (1.0 - math.sqrt(rho)) / (8.0 * smooth_l * math.sqrt(inv_w4 + 2.0))
    disc = one_m_a**4 - 8.0 * smooth_l**2 * alpha * (12.0 + 64.0 * inv_w4) ** 2
    if disc >= 0.0:
        b3 = (one_m_a**2 + math.sqrt(disc)) / (16.0 * smooth_l * (3.0 + 16.0 * inv_w4))
    else:
        b3 = None
    branches = [b1, b2, b3]
    infeasible = [b is None for b in branches]
    feasible = [b for b in branches if b is not None]
    return GammaBound(branches=branches, infeasible=infeasible, bound=min(feasible) if feasible else None)


@dataclass
class ConvergenceDiagnostics:
    """Assumption constants plus the derived m1..m5 and the rate bound."""

    smooth_l: float
    sigma: float
    varsigma: float
    alpha: float
    gamma: float
    rho: float
    omega_min: float
    m: dict = field(init=False)
    gamma_bound: GammaBound = field(init=False)

    def __post_init__(self):
        a, g, L = self.alpha, self.gamma, self.smooth_l
        m1 = g / (2.0 * (1.0 - a)) - (1.0 - a) * g**2 / (2.0 * a * L)
        if m1 <= 0.0:
            self.m = {"m1": m1}
        else:
            self.m = {
                "m1": m1,
                "m2": (a * L * g**2 / (2.0 * (1.0 - a) ** 3) + L * g**2 / (2.0 * (1.0 - a) ** 2)) / m1,
                "m3": L * (1.0 - a) / (2.0 * m1 * a),
                "m4": L * a / (2.0 * m1 * (1.0 - a) ** 3),
                "m5": L**2 * g / (2.0 * m1 * (1.0 - a)),
            }
        self.gamma_bound = gamma_upper_bound(a, L, self.rho, self.omega_min)

    @property
    def m1_positive(self) -> bool:
        return self.m["m1"] > 0.0


def auxiliary_sequence(xbar_history: list[np.ndarray], alpha: float) -> list[np.ndarray]:
    """S[0] = xbar[0]; S[t] = xbar[t]/(1-a) - a*xbar[t-1]/(1-a) for t >= 1."""
    out = [np.asarray(xbar_history[0])]
    for t in range(1, len(xbar_history)):
        out.append((np.asarray(xbar_history[t]) - alpha * np.asarray(xbar_history[t - 1])) / (1.0 - alpha))
    return out


def check_sbar_identity(
    xbar_history: list[np.ndarray],
    gbar_sums: list[np.ndarray],
    gamma: float,
    alpha: float,
    n_agents: int,
    tol: float = 1e-8,
) -> float:
    """Verify S[t] - S[t-1] = -gamma/(N(1-a)) * sum_i gbar_i^[t] per round.

    `xbar_history` holds rounds 0..T, `gbar_sums` rounds 1..T. Returns the
    max relative L-inf residual; raises beyond `tol`.
    """
    if len(xbar_history) < 2:
        raise ValueError("need at least two recorded rounds")
    if len(gbar_sums) != len(xbar_history) - 1:
        raise ValueError("gbar_sums must cover exactly rounds 1..T")
    sbar = auxiliary_sequence(xbar_history, alpha)
    worst = 0.0
    scale_coeff = -gamma / (n_agents * (1.0 - alpha))
    for t in range(1, len(sbar)):
        lhs = sbar[t] - sbar[t - 1]
        rhs = scale_coeff * np.asarray(gbar_sums[t - 1])
        resid = float(np.abs(lhs - rhs).max()) / (1.0 + float(np.abs(sbar[t]).max()))
        worst = max(worst, resid)
        if resid > tol:
            raise InvariantFailure(f"auxiliary-sequence identity broken at round {t}: residual {resid}")
    return worst


def check_mean_preservation(
    xbar_new: np.ndarray,
    ubar_new: np.ndarray,
    xbar_prev: np.ndarray,
    ubar_prev: np.ndarray,
    gbar_mean: np.ndarray,
    gamma: float,
    alpha: float,
    tol: float = 1e-9,
) -> tuple[float, float]:
    """Verify the network-mean recursions for one completed round.

    ubar[t] = a*ubar[t-1] + mean_i(gbar_i)   and   xbar[t] = xbar[t-1] - gamma*ubar[t].
    These encode that gossip with column sums 1 preserves the mean. Returns
    (u_residual, x_residual) relative; raises beyond `tol`.
    """
    want_u = alpha * ubar_prev + gbar_mean
    resid_u = float(np.abs(ubar_new - want_u).max()) / (1.0 + float(np.abs(want_u).max()))
    want_x = xbar_prev - gamma * ubar_new
    resid_x = float(np.abs(xbar_new - want_x).max()) / (1.0 + float(np.abs(want_x).max()))
    if resid_u > tol or resid_x > tol:
        raise InvariantFailure(
            f"mean preservation broken: u residual {resid_u}, x residual {resid_x} "
            "(check the mixing matrix row/column sums)"
        )
    return resid_u, resid_x
