"""Quasi-reversibility extrapolation of option prices.

Running the pricing PDE du/dtau = (sigma^2/2) s^2 d2u/ds2 in the forecast
direction is unstable, so instead of time-stepping we minimize the Tikhonov
functional

    J_beta(u) = || D_tau u - (sigma^2/2) s^2 D_ss u ||^2  +  beta || u - F ||^2

over a small space-time rectangle, where F is the quoted data continued onto
the grid.  The tau = 0 row of F is today's option mid at every stock node,
the low/high stock edges are the option bid/ask extended linearly in tau at
the rate they moved since the previous day, and interior rows interpolate
linearly between the edges.  The tau = 0 row and both stock edges are imposed
exactly; only interior nodes are unknowns, so the normal-equation matrix
A^T A + beta I is symmetric positive definite and the minimizer is unique.

Discretization: first-order forward differences in tau, second-order central
differences in s, on an n_s x n_tau grid covering two forecast days.  The
stock axis is centered on today's stock mid with half-width
max(half bid/ask spread, sigma * sqrt(2 * horizon) * stock mid), i.e. at
least the two-day diffusion scale, and is assembled in stock-mid units (the
s^2 d2/ds2 operator is invariant under that scaling).  The normal equations
are solved by conjugate gradient started from F, declaring convergence when
the recursive residual drops below cg_tol times the right-hand-side norm.

The forecast EST is the solved surface at the central stock node one trading
day ahead; odd grid sizes guarantee both indices exist exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConvergenceError, DataError
from .market_data import TRADING_DAY_YEARS, QuoteRecord

__all__ = [
    "AssembledSystem",
    "Minimizer",
    "QrmConfig",
    "QrmGrid",
    "assemble_system",
    "estimate_series",
    "solve_qrm",
]


@dataclass(frozen=True)
class QrmConfig:
    """Grid, regularization, and solver parameters."""

    n_s: int = 21
    n_tau: int = 11
    beta: float = 0.01
    horizon: float = TRADING_DAY_YEARS
    cg_tol: float = 1e-10
    cg_max_iter: int = 5000

    def __post_init__(self) -> None:
        for name in ("n_s", "n_tau"):
            v = getattr(self, name)
            if int(v) != v or v < 3 or v % 2 == 0:
                raise DataError(f"{name} must be an odd integer >= 3, got {v}")
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise DataError(f"beta must be > 0, got {self.beta}")
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise DataError(f"horizon must be > 0, got {self.horizon}")
        if not (math.isfinite(self.cg_tol) and self.cg_tol > 0):
            raise DataError(f"cg_tol must be > 0, got {self.cg_tol}")
        if int(self.cg_max_iter) != self.cg_max_iter or self.cg_max_iter <= 0:
            raise DataError(f"cg_max_iter must be a positive integer, got {self.cg_max_iter}")


@dataclass(frozen=True)
class QrmGrid:
    """Solution rectangle: stock nodes (currency), tau nodes (years), surface u."""

    s_values: np.ndarray
    tau_values: np.ndarray
    u: np.ndarray

    def __post_init__(self) -> None:
        n_s, n_tau = len(self.s_values), len(self.tau_values)
        if self.u.shape != (n_s, n_tau):
            raise DataError(f"surface shape {self.u.shape} does not match grid {(n_s, n_tau)}")
        if np.any(np.diff(self.s_values) <= 0) or np.any(np.diff(self.tau_values) <= 0):
            raise DataError("grid axes must be strictly increasing")
        if not np.all(np.isfinite(self.u)):
            raise DataError("surface contains non-finite values")


@dataclass(frozen=True)
class Minimizer:
    """Regularized solution plus the one-day-ahead estimate read from it."""

    grid: QrmGrid
    est: float
    residual: float
    iterations: int

    def to_json(self) -> dict:
        return {
            "est": self.est,
            "residual": self.residual,
            "iterations": self.iterations,
            "n_s": len(self.grid.s_values),
            "n_tau": len(self.grid.tau_values),
        }


@dataclass(frozen=True)
class AssembledSystem:
    """Least-squares pieces of J_beta over the interior unknowns.

    ``a_pde`` maps interior node values to PDE residuals, ``b_pde`` collects
    the boundary contributions moved to the right-hand side, ``f_interior``
    is the data surface at the unknown nodes, and ``f_surface`` the full
    n_s x n_tau data surface.  ``known_mask`` flags the imposed nodes in the
    flattened (s-major) node ordering.
    """

    a_pde: sp.csr_matrix
    b_pde: np.ndarray
    f_interior: np.ndarray
    f_surface: np.ndarray
    s_values: np.ndarray
    tau_values: np.ndarray
    known_mask: np.ndarray
    beta: float

    @property
    def n_unknowns(self) -> int:
        return self.a_pde.shape[1]

    def apply_normal(self, x: np.ndarray) -> np.ndarray:
        """(A^T A + beta I) x."""
        return self.a_pde.T @ (self.a_pde @ x) + self.beta * x

    def normal_rhs(self) -> np.ndarray:
        return self.a_pde.T @ self.b_pde + self.beta * self.f_interior

    def normal_matrix(self) -> np.ndarray:
        """Dense A^T A + beta I, for small-grid diagnostics only."""
        return (self.a_pde.T @ self.a_pde).toarray() + self.beta * np.eye(self.n_unknowns)


def _data_surface(prev: QuoteRecord, today: QuoteRecord, tau_values: np.ndarray,
                  n_s: int, horizon: float) -> np.ndarray:
    mid = today.option_mid
    slope_bid = today.option_bid - prev.option_bid
    slope_ask = today.option_ask - prev.option_ask
    f = np.empty((n_s, len(tau_values)))
    for j, tau in enumerate(tau_values):
        lo = today.option_bid + (tau / horizon) * slope_bid
        hi = today.option_ask + (tau / horizon) * slope_ask
        f[:, j] = np.linspace(lo, hi, n_s)
    f[:, 0] = mid
    return f


def assemble_system(records: Sequence[QuoteRecord], config: QrmConfig) -> AssembledSystem:
    """Build the discrete functional from the last two records.

    The diffusion coefficient uses the latest record's implied volatility.
    Raises ``DataError`` when fewer than two records are given or when the
    stock axis would collapse (zero spread and zero volatility).
    """
    if len(records) < 2:
        raise DataError(f"need at least 2 records to assemble, got {len(records)}")
    prev, today = records[-2], records[-1]
    sigma = today.implied_vol
    s_mid = today.stock_mid
    half_spread = 0.5 * (today.stock_ask - today.stock_bid)
    half_width = max(half_spread, sigma * math.sqrt(2.0 * config.horizon) * s_mid)
    if half_width <= 0.0:
        raise DataError(
            "collapsed stock grid: zero bid/ask spread and zero volatility leave no interval"
        )

    n_s, n_tau = config.n_s, config.n_tau
    # Stock axis in stock-mid units; s^2 d2/ds2 is invariant under the scaling.
    scaled_half = half_width / s_mid
    s_scaled = np.linspace(1.0 - scaled_half, 1.0 + scaled_half, n_s)
    tau_values = np.linspace(0.0, 2.0 * config.horizon, n_tau)
    ds = s_scaled[1] - s_scaled[0]
    dtau = tau_values[1] - tau_values[0]

    f_surface = _data_surface(prev, today, tau_values, n_s, config.horizon)

    known = np.zeros((n_s, n_tau), dtype=bool)
    known[:, 0] = True
    known[0, :] = True
    known[-1, :] = True
    known_mask = known.reshape(-1)

    def node(i: int, j: int) -> int:
        return i * n_tau + j

    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    r = 0
    inv_dtau = 1.0 / dtau
    for j in range(n_tau - 1):
        for i in range(1, n_s - 1):
            kappa = 0.5 * sigma * sigma * s_scaled[i] ** 2 / ds ** 2
            for col, val in (
                (node(i, j + 1), inv_dtau),
                (node(i, j), -inv_dtau + 2.0 * kappa),
                (node(i + 1, j), -kappa),
                (node(i - 1, j), -kappa),
            ):
                rows.append(r)
                cols.append(col)
                vals.append(val)
            r += 1
    a_full = sp.csr_matrix((vals, (rows, cols)), shape=(r, n_s * n_tau))
    flat_f = f_surface.reshape(-1)
    a_pde = a_full[:, ~known_mask].tocsr()
    b_pde = -(a_full[:, known_mask] @ flat_f[known_mask])
    return AssembledSystem(
        a_pde=a_pde,
        b_pde=b_pde,
        f_interior=flat_f[~known_mask],
        f_surface=f_surface,
        s_values=s_scaled * s_mid,
        tau_values=tau_values,
        known_mask=known_mask,
        beta=config.beta,
    )


def _conjugate_gradient(
    apply_m: Callable[[np.ndarray], np.ndarray],
    rhs: np.ndarray,
    x0: np.ndarray,
    tol: float,
    max_iter: int,
) -> tuple[np.ndarray, int]:
    """Plain CG on an SPD operator; converges on ||r|| <= tol * ||rhs||."""
    x = x0.copy()
    r = rhs - apply_m(x)
    p = r.copy()
    rs = float(r @ r)
    ref = math.sqrt(float(rhs @ rhs))
    if ref == 0.0:
        ref = 1.0
    threshold = tol * ref
    iterations = 0
    while math.sqrt(rs) > threshold:
        if iterations >= max_iter:
            raise ConvergenceError(
                f"conjugate gradient stalled at relative residual "
                f"{math.sqrt(rs) / ref:.3e} after {iterations} iterations",
                residual=math.sqrt(rs) / ref,
            )
        mp = apply_m(p)
        alpha = rs / float(p @ mp)
        x = x + alpha * p
        r = r - alpha * mp
        rs_next = float(r @ r)
        p = r + (rs_next / rs) * p
        rs = rs_next
        iterations += 1
    return x, iterations


def solve_qrm(records: Sequence[QuoteRecord], config: QrmConfig | None = None) -> Minimizer:
    """Minimize J_beta for the last two records and read off the estimate.

    Deterministic: identical inputs produce a bit-identical result.
    """
    config = config or QrmConfig()
    system = assemble_system(records, config)
    x, iterations = _conjugate_gradient(
        system.apply_normal,
        system.normal_rhs(),
        system.f_interior,
        config.cg_tol,
        config.cg_max_iter,
    )
    n_s, n_tau = config.n_s, config.n_tau
    flat = np.empty(n_s * n_tau)
    flat[system.known_mask] = system.f_surface.reshape(-1)[system.known_mask]
    flat[~system.known_mask] = x
    surface = flat.reshape(n_s, n_tau)
    grid = QrmGrid(s_values=system.s_values, tau_values=system.tau_values, u=surface)
    misfit = system.a_pde @ x - system.b_pde
    return Minimizer(
        grid=grid,
        est=float(surface[(n_s - 1) // 2, (n_tau - 1) // 2]),
        residual=float(misfit @ misfit),
        iterations=iterations,
    )


def estimate_series(
    records: Sequence[QuoteRecord], config: QrmConfig | None = None
) -> list[Minimizer | None]:
    """One solve per record pair, aligned to the records.

    Element k (k >= 1) is the solve on records k-1 and k; element 0 is None
    since no prior day exists.  Errors are re-raised with the day index.
    """
    if len(records) < 2:
        raise DataError(f"need at least 2 records, got {len(records)}")
    config = config or QrmConfig()
    out: list[Minimizer | None] = [None]
    for k in range(1, len(records)):
        try:
            out.append(solve_qrm(records[k - 1 : k + 1], config))
        except ConvergenceError as exc:
            raise ConvergenceError(
                f"day {k} ({records[k].day.isoformat()}): {exc}", residual=exc.residual
            ) from exc
        except DataError as exc:
            raise DataError(f"day {k} ({records[k].day.isoformat()}): {exc}") from exc
    return out
