"""Closed-form references: ideal cat signatures and damped-cat evolution.

Everything here is analytic; the simulator is validated against these
expressions.  The single-mode damping channel (rate gamma, reservoir
occupation n_bar) models the storage stage of the memory, so gamma is
usually bound to the mechanical linewidth when comparing with protocol
runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import GridAxis, GridField

__all__ = [
    "DecoherenceParams",
    "ideal_P_x",
    "ideal_P_p",
    "ideal_wigner",
    "evolved_wigner",
    "evolved_wigner_field",
    "cat_variance",
    "decohered_density",
    "q_parameter",
    "t_positive",
    "t_p_bound",
    "evolve_characteristic",
    "cat_char_normal",
]


@dataclass(frozen=True)
class DecoherenceParams:
    """Single-mode damping channel: decay rate, bath occupation, elapsed time."""

    gamma: float
    n_bar: float
    t: float = 0.0

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.n_bar < 0:
            raise ValueError("n_bar must be non-negative")
        if self.t < 0:
            raise ValueError("t must be non-negative")


def _cat_norm(alpha0: float) -> float:
    return 2.0 * (1.0 + math.exp(-2.0 * alpha0 * alpha0))


def ideal_P_x(x, alpha0: float):
    """x-quadrature distribution of the even cat: two hills, no fringes."""
    x_arr = np.asarray(x, dtype=float)
    a = float(alpha0)
    norm = _cat_norm(a)
    s = math.sqrt(2.0) * a
    vals = (np.exp(-((x_arr - s) ** 2)) + np.exp(-((x_arr + s) ** 2))
            + 2.0 * np.exp(-(x_arr ** 2) - 2.0 * a * a)) / (math.sqrt(math.pi) * norm)
    if np.ndim(x) == 0:
        return float(vals)
    return vals


def ideal_P_p(p, alpha0: float):
    """p-quadrature distribution: Gaussian envelope times interference fringes."""
    p_arr = np.asarray(p, dtype=float)
    a = float(alpha0)
    norm = _cat_norm(a)
    vals = 2.0 * np.exp(-(p_arr ** 2)) * (1.0 + np.cos(2.0 * math.sqrt(2.0) * p_arr * a)) \
        / (math.sqrt(math.pi) * norm)
    if np.ndim(p) == 0:
        return float(vals)
    return vals


def ideal_wigner(alpha, alpha0: float):
    """Wigner function of the even cat: two hills plus central fringes."""
    return evolved_wigner(alpha, 0.0, alpha0, 0.0, 1.0)


def evolved_wigner(alpha, t: float, alpha0: float, n_bar: float, gamma: float):
    """Wigner function of the cat after damped, possibly thermal, evolution.

    The hills shrink toward the origin at rate gamma while the interference
    coefficient collapses much faster; a thermal reservoir additionally
    broadens every term by the same factor.  Reduces to the ideal cat at
    t = 0.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    a_arr = np.asarray(alpha, dtype=complex)
    a0 = float(alpha0)
    decay = math.exp(-gamma * t)
    broad = 1.0 + 2.0 * n_bar * (1.0 - decay * decay)
    ab = a0 * decay
    overlap = math.exp(-2.0 * a0 * a0)  # <alpha0|-alpha0> for real alpha0
    minus = a_arr - ab
    plus = a_arr + ab
    terms = (np.exp(-2.0 * np.conj(minus) * minus / broad)
             + np.exp(-2.0 * np.conj(plus) * plus / broad)
             + overlap * np.exp(-2.0 * np.conj(minus) * plus / broad)
             + overlap * np.exp(-2.0 * np.conj(plus) * minus / broad))
    vals = np.real(terms) * 2.0 / (math.pi * _cat_norm(a0) * broad)
    if np.ndim(alpha) == 0:
        return float(vals)
    return vals


def evolved_wigner_field(grid_x, grid_y, t: float,
                         alpha0: float, n_bar: float, gamma: float) -> GridField:
    """Tabulate the evolved Wigner function on a (Re alpha, Im alpha) grid.

    Axes may be GridAxis objects or plain uniform coordinate arrays.
    """
    def as_axis(grid, tag):
        if isinstance(grid, GridAxis):
            return grid
        arr = np.asarray(grid, dtype=float)
        return GridAxis(start=float(arr[0]), stop=float(arr[-1]),
                        step=float(arr[1] - arr[0]), tag=tag)

    ax_x = as_axis(grid_x, "re_alpha")
    ax_y = as_axis(grid_y, "im_alpha")
    xs = ax_x.points()
    ys = ax_y.points()
    alpha = xs[:, None] + 1j * ys[None, :]
    vals = evolved_wigner(alpha, t, alpha0, n_bar, gamma)
    return GridField(axes=(ax_x, ax_y), values=vals,
                     meta={"kind": "wigner_oracle", "t": t, "alpha0": alpha0,
                           "n_bar": n_bar, "gamma": gamma})


def cat_variance(alpha0: float) -> float:
    """p-quadrature variance of the even cat; below 1/2 for every alpha0 > 0."""
    a = float(alpha0)
    if a < 0:
        raise ValueError("alpha0 must be non-negative")
    q = math.exp(-2.0 * a * a)
    return 0.5 - 2.0 * a * a * q / (1.0 + q)


def decohered_density(t: float, alpha0: float, gamma: float) -> tuple[float, float]:
    """Zero-temperature damped cat: (shrunken amplitude, coherence coefficient).

    The off-diagonal coefficient decays as exp(-2|alpha0|^2 (1 - e^{-2 gamma t}))
    and saturates at the cat overlap rather than vanishing.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    a = float(alpha0)
    decay = math.exp(-gamma * t)
    coefficient = math.exp(-2.0 * a * a * (1.0 - decay * decay))
    return a * decay, coefficient


def q_parameter(t: float, n_bar: float, gamma: float) -> float:
    """Gaussian-smoothing margin 1/2 - (1+n_bar)(1-e^{-2 gamma t}).

    Positive while the evolved Wigner function can still be negative; its
    root is the negativity-lifetime bound.
    """
    return 0.5 - (1.0 + n_bar) * (1.0 - math.exp(-2.0 * gamma * t))


def t_positive(n_bar: float, gamma: float) -> float:
    """Upper bound on the Wigner-negativity lifetime; independent of cat size."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if n_bar < 0:
        raise ValueError("n_bar must be non-negative")
    return math.log((1.0 + n_bar) / (0.5 + n_bar)) / (2.0 * gamma)


def t_p_bound(n_bar: float, gamma: float) -> float:
    """P-function positivity time; infinite at zero temperature."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if n_bar < 0:
        raise ValueError("n_bar must be non-negative")
    if n_bar == 0:
        return math.inf
    return math.log(1.0 / n_bar + 1.0) / (2.0 * gamma)


def evolve_characteristic(chi0: Callable[[complex], complex], s_order: float,
                          lam: complex, t: float, params: DecoherenceParams) -> complex:
    """Damping map on an s-ordered characteristic function.

    chi0 must be the initial characteristic function at the same ordering
    s_order; the map multiplies a Gaussian factor controlled by
    s_bar - s = 2 n_bar + 1 - s and rescales the argument by e^{-gamma t}.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    s_bar = 2.0 * params.n_bar + 1.0
    decay = math.exp(-params.gamma * t)
    lam_c = complex(lam)
    factor = math.exp(-(s_bar - s_order) * (abs(lam_c) ** 2 / 2.0) * (1.0 - decay * decay))
    return factor * complex(chi0(lam_c * decay))


def cat_char_normal(alpha0: float) -> Callable[[complex], complex]:
    """Normally ordered (s = 1) characteristic function of the even cat."""
    a0 = float(alpha0)
    norm = _cat_norm(a0)
    overlap = math.exp(-2.0 * a0 * a0)

    def chi(lam: complex) -> complex:
        lam = complex(lam)
        edge = lam * a0 - lam.conjugate() * a0  # alpha0 real
        ridge = lam * a0 + lam.conjugate() * a0
        return (np.exp(edge) + np.exp(-edge)
                + overlap * (np.exp(ridge) + np.exp(-ridge))) / norm

    return chi
