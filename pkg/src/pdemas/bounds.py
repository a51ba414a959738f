"""Closed-form constants and right-hand sides of the four robustness bounds.

All agent indices here are 1-based and cyclic: a nonpositive index m means
m + N.  Empty products are 1 and empty sums 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import PlantParams


def _cyc(i: int, n: int) -> int:
    """Map any integer index to {1..N}."""
    return (i - 1) % n + 1


def backward_gain_product(params: PlantParams, i: int, length: int) -> float:
    """Product of `length` gains stepping backward cyclically from k_i."""
    prod = 1.0
    for r in range(length):
        prod *= params.gain(i - r)
    return prod


@dataclass(frozen=True)
class TheoremConstants:
    """All gain-derived constants for a fixed decay exponent sigma."""

    sigma: float
    script_n: float
    m: np.ndarray        # M_i, shape (N,)
    c: np.ndarray        # C_i = M_i / (1 - script_n)
    c_tilde: np.ndarray  # 1 + (k_i/l) C_{i-1}
    h: np.ndarray        # H_{i,j}, shape (N, N)
    h_tilde: np.ndarray  # k_j H_{i-1,j-1} / (l (1-script_n)) + |k_i-k_j|/l

    def m_i(self, i: int) -> float:
        return float(self.m[i - 1])

    def c_i(self, i: int) -> float:
        return float(self.c[i - 1])

    def c_tilde_i(self, i: int) -> float:
        return float(self.c_tilde[i - 1])

    def h_ij(self, i: int, j: int) -> float:
        return float(self.h[i - 1, j - 1])

    def h_tilde_ij(self, i: int, j: int) -> float:
        return float(self.h_tilde[i - 1, j - 1])


def compute_constants(params: PlantParams, sigma: float) -> TheoremConstants:
    if not (0.0 < sigma < params.lam):
        raise ValueError(
            f"sigma must lie in (0, lambda)=(0, {params.lam}), got {sigma}"
        )
    n = params.n_agents
    ell = params.robin_l
    k = np.array(params.gains)

    script_n = float(np.prod(k)) / ell**n

    # M_i = 1 + sum_{m=1..i} prod_{r=0..m-1} k_{i-r} / l^m
    #         + sum_{m=i+1..N-1} (prod_{r=0..i-1} k_{i-r})(prod_{s=0..m-i-1} k_{N-s}) / l^m.
    # Both sums are backward cyclic gain products of length m starting at i.
    m_const = np.empty(n)
    for i in range(1, n + 1):
        m_const[i - 1] = 1.0 + sum(
            backward_gain_product(params, i, m) / ell**m
            for m in range(1, max(i, n - 1) + 1)
        )

    c_const = m_const / (1.0 - script_n)
    c_tilde = np.empty(n)
    for i in range(1, n + 1):
        c_tilde[i - 1] = 1.0 + (params.gain(i) / ell) * c_const[_cyc(i - 1, n) - 1]

    h_const = np.empty((n, n))
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            h_const[i - 1, j - 1] = _h_ij(params, i, j)

    h_tilde = np.empty((n, n))
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            h_tilde[i - 1, j - 1] = (
                params.gain(j)
                * h_const[_cyc(i - 1, n) - 1, _cyc(j - 1, n) - 1]
                / (ell * (1.0 - script_n))
                + abs(params.gain(i) - params.gain(j)) / ell
            )

    return TheoremConstants(
        sigma=sigma,
        script_n=script_n,
        m=m_const,
        c=c_const,
        c_tilde=c_tilde,
        h=h_const,
        h_tilde=h_tilde,
    )


def _h_ij(params: PlantParams, i: int, j: int) -> float:
    n = params.n_agents
    ell = params.robin_l
    total = abs(params.gain(i) - params.gain(j)) / ell
    for m in range(1, j + 1):
        prod = backward_gain_product(params, j, m)
        total += (
            prod * abs(params.gain(i - m) - params.gain(j - m)) / ell ** (m + 1)
        )
    for m in range(j + 1, n):
        kjm = backward_gain_product(params, j, j) * math.prod(
            params.gain(n + 1 - s) for s in range(1, m - j + 1)
        )
        total += (
            kjm
            * abs(params.gain(i - m + n) - params.gain(j - m + n))
            / ell ** (m + 1)
        )
    return total


@dataclass(frozen=True)
class DisturbanceFunctionals:
    """Aggregate sup-norm functionals of the unobservable disturbances."""

    d_of_t: float
    d_tilde_of_t: float


def disturbance_functional(
    f_sup_max: float,
    d0_sup_max: float,
    d1_sup_max: float,
    lam: float,
    sigma: float,
    robin_l: float,
) -> float:
    """2/(lambda-sigma) * max_i ||f|| + max_i ||d0|| + (1/l) max_i ||d1||."""
    return (
        2.0 / (lam - sigma) * f_sup_max
        + d0_sup_max
        + d1_sup_max / robin_l
    )


def update_functionals(
    f_sups,
    d0_sups,
    d1_sups,
    f_diff_sups,
    d0_diff_sups,
    d1_diff_sups,
    lam: float,
    sigma: float,
    robin_l: float,
) -> DisturbanceFunctionals:
    """Build D(t) and D~(t) from running per-agent and pairwise sups."""
    d = disturbance_functional(
        max(f_sups), max(d0_sups), max(d1_sups), lam, sigma, robin_l
    )
    d_tilde = disturbance_functional(
        max(f_diff_sups, default=0.0),
        max(d0_diff_sups, default=0.0),
        max(d1_diff_sups, default=0.0),
        lam,
        sigma,
        robin_l,
    )
    return DisturbanceFunctionals(d_of_t=d, d_tilde_of_t=d_tilde)


def rhs_theorem1(
    t: float, q_tilde0_norm: float, f_sup: float, lam: float, sigma: float
) -> float:
    """Estimation-error bound for one agent."""
    return math.exp(-sigma * t) * q_tilde0_norm + f_sup / (lam - sigma)


def rhs_theorem2(
    i: int,
    t: float,
    constants: TheoremConstants,
    d_of_t: float,
    u_tilde0_max: float,
    q_tilde0_max: float,
) -> float:
    """Tracking-error bound for agent i."""
    ct = constants.c_tilde_i(i)
    return ct * d_of_t + ct * math.exp(-constants.sigma * t) * (
        u_tilde0_max + q_tilde0_max
    )


def rhs_theorem3(
    i: int,
    j: int,
    t: float,
    constants: TheoremConstants,
    d_of_t: float,
    d_tilde_of_t: float,
    u_tilde0_pair_max: float,
    q_tilde0_pair_max: float,
    u_tilde0_max: float,
    q_tilde0_max: float,
) -> float:
    """Synchronization-error bound for the ordered pair (i, j)."""
    ctj = constants.c_tilde_i(j)
    decay = math.exp(-constants.sigma * t)
    return (
        ctj * d_tilde_of_t
        + ctj * decay * (u_tilde0_pair_max + q_tilde0_pair_max)
        + constants.h_tilde_ij(i, j)
        * constants.c_tilde_i(i)
        * (d_of_t + decay * (u_tilde0_max + q_tilde0_max))
    )


def rhs_theorem4(
    i: int,
    t: float,
    constants: TheoremConstants,
    d_of_t: float,
    r_sup: float,
    q_sup_i: float,
    u0_max: float,
    uref0_norm: float,
    v0_max: float,
    qhat0_max: float,
) -> float:
    """Closed-loop ISS bound for agent i."""
    ct = constants.c_tilde_i(i)
    decay = math.exp(-constants.sigma * t)
    return (
        (1.0 + 2.0 * ct) * decay * (2.0 * u0_max + uref0_norm)
        + (4.0 + 2.0 * ct) * decay * (v0_max + qhat0_max)
        + 3.0 * r_sup
        + 2.0 * q_sup_i
        + (1.0 + 2.0 * ct) * d_of_t
    )


def resolvent_determinant(params: PlantParams) -> float:
    """Positivity diagnostic for the resolvent boundary matrix."""
    gamma = math.sqrt(1.0 / params.alpha)
    coth = math.cosh(gamma) / math.sinh(gamma)
    return math.sinh(gamma) ** params.n_agents * (
        (gamma * coth + params.robin_l) ** params.n_agents
        - math.prod(params.gains)
    )
