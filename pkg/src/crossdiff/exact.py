"""Closed-form reference solutions and PDE residual oracles.

The bounded gradient blow-up solution lives in three space dimensions:

    u(x, t) = x / s,   s = sqrt(kappa (1 - t) + |x|^2),
    D_j u_i = delta_ij / s - x_i x_j / s^3,
    u_t     = kappa u / (2 s^2).

Its diffusion tensor has the form theta delta_ij delta_ab + A_ia A_jb with
A_ia = a(|u|^2) delta_ia + b(|u|^2) u_i u_a. Two coefficient sets are
provided:

``"printed"``  the explicit closed form quoted alongside the solution.
``"exact"``    coefficients for which u solves u_t = Div(A(u) Du) exactly.

For ``"exact"`` put y = |u|^2, P = (N-1) a + (1-y)(a + b y) and require
P = p := sqrt(N (N-1-theta)), which matches the printed value at u = 0. The
radial balance then becomes a linear first-order equation for m = a + b y
whose solution is a combination of Gauss hypergeometric functions; see
:func:`js_coefficients`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import root
from scipy.special import hyp2f1

from .errors import ConfigError
from .mesh import Grid, flux_divergence_padded, integrate, pad

JS_VARIANTS = ("exact", "printed")
JS_DIM = 3


def check_js_parameters(kappa: float, theta: float, N: int = JS_DIM) -> None:
    kmax = 2.0 * (N - 1) / (N - 2)
    if not 0.0 < kappa < kmax:
        raise ConfigError(f"js: kappa must lie in (0, {kmax:g}), got {kappa:g}")
    tmax = N - 2 - kappa / (2.0 * (N - 1))
    if not 0.0 < theta < tmax:
        raise ConfigError(f"js: theta must lie in (0, {tmax:g}) for kappa={kappa:g}, got {theta:g}")


def js_state(x, t: float, kappa: float):
    """Return (u, Du, u_t) at points ``x`` of shape (3, ...); Du[i, j] = D_j u_i."""
    x = np.asarray(x, dtype=float)
    s2 = kappa * (1.0 - t) + (x**2).sum(axis=0)
    if np.any(s2 <= 1e-300):
        raise ValueError("js_state: evaluated on the singular set s = 0")
    s = np.sqrt(s2)
    u = x / s
    eye = np.eye(x.shape[0]).reshape((x.shape[0],) * 2 + (1,) * (x.ndim - 1))
    Du = eye / s - np.einsum("i...,j...->ij...", x, x) / s**3
    ut = kappa * u / (2.0 * s2)
    return u, Du, ut


def _series_2f1_minus_one(a, b, c, y, terms=60):
    """2F1(a, b; c; y) - 1 summed directly (small |y|)."""
    total = np.zeros_like(y)
    term = np.ones_like(y)
    for n in range(terms):
        term = term * (a + n) * (b + n) / ((c + n) * (n + 1)) * y
        total = total + term
    return total


def js_coefficients(y, kappa: float, theta: float, variant: str = "exact", N: int = JS_DIM):
    """Scalar coefficients (a, b) of A_ia = a delta_ia + b u_i u_a at y = |u|^2."""
    y = np.asarray(y, dtype=float)
    if variant == "printed":
        q = N * (N - 1 - theta) - (2 * (N - 1 - theta) + kappa / 2) * y - theta * y**2
        if np.any(q <= 0):
            raise ValueError("js_tensor: square-root argument is not positive")
        r = np.sqrt(q)
        a = (N - 1 - theta - y * (1 + kappa / (2 * (N - 1)))) / r
        b = np.full_like(y, kappa / (2 * (N - 1))) / r
        return a, b
    if variant != "exact":
        raise ValueError(f"unknown js variant {variant!r}")
    if np.any((y < 0) | (y >= 1)):
        raise ValueError("js_tensor: exact coefficients need |u| < 1")
    p = np.sqrt(N * (N - 1 - theta))
    K = kappa / 2 + (N - 1) * theta
    n = N / 2
    damp = (1 - y) ** ((N - 2) / 2)
    S1 = (K / (2 * p)) / (n + 1) * hyp2f1(n + 1, n, n + 2, y) + (3 * theta / (2 * p)) / (n + 1) * hyp2f1(n + 1, n - 1, n + 2, y)
    F3 = hyp2f1(n, n, n + 1, y)
    m = damp * (y * S1 + (p / N) * F3)
    a = (p - (1 - y) * m) / (N - 1)
    # b = ((N - y) m - p) / ((N - 1) y) cancels badly near y = 0
    small = y < 0.1
    b = np.empty_like(y)
    yl = np.where(small, y, 0.0)
    f3m1 = _series_2f1_minus_one(n, n, n + 1, yl)
    lead = np.expm1(np.log1p(-yl / N) + ((N - 2) / 2) * np.log1p(-yl) + np.log1p(f3m1))
    with np.errstate(invalid="ignore", divide="ignore"):
        b_small = np.where(
            yl > 0,
            p * lead / np.where(yl > 0, yl, 1.0) + (N - yl) * damp * S1,
            0.0,
        ) / (N - 1)
        # y = 0 limit: b = (N m1 - m0)/(N - 1) with m0 = p/N, m1 = m'(0)
        m0 = p / N
        m1 = (K + 3 * theta + 2 * p * m0) / (p * (N + 2))
        b_small = np.where(yl > 0, b_small, (N * m1 - m0) / (N - 1))
        b_big = ((N - y) * m - p) / ((N - 1) * np.where(small, 1.0, y))
    b = np.where(small, b_small, b_big)
    return a, b


def js_tensor_field(W: np.ndarray, kappa: float, theta: float, variant: str = "exact") -> np.ndarray:
    """Full tensor of shape (3, 3, 3, 3, ...) indexed (i, alpha, j, beta)."""
    W = np.asarray(W, dtype=float)
    y = (W**2).sum(axis=0)
    a, b = js_coefficients(y, kappa, theta, variant)
    d = W.shape[0]
    eye = np.eye(d).reshape((d, d) + (1,) * (W.ndim - 1))
    Aia = a * eye + b * np.einsum("i...,j...->ij...", W, W)
    T = np.einsum("ia...,jb...->iajb...", Aia, Aia)
    for i in range(d):
        for al in range(d):
            T[i, al, i, al] += theta
    return T


def js_tensor(u, kappa: float, theta: float, variant: str = "exact"):
    """Full diffusion tensor at a single state ``u`` (3-vector)."""
    from .models import DiffusionTensor

    check_js_parameters(kappa, theta)
    u = np.asarray(u, dtype=float)
    if u.shape != (JS_DIM,):
        raise ValueError("js_tensor expects a 3-vector")
    return DiffusionTensor("full", js_tensor_field(u, kappa, theta, variant))


# ---------------------------------------------------------------- solutions


@dataclass
class ExactSolution:
    """A reference solution sampled on grids.

    ``state(grid, t, padded)`` returns shape (m, *cells) or, with ``padded``,
    values on the ghost-extended grid. ``time_derivative`` has the same
    signature and may be None, in which case a centred difference is used.
    """

    name: str
    state: Callable
    time_derivative: Callable | None = None
    window: tuple[float, float] = (-np.inf, np.inf)
    exact_ghosts: bool = True


def from_function(name: str, u: Callable, ut: Callable | None = None, window=(-np.inf, np.inf)) -> ExactSolution:
    """Wrap ``u(coords, t) -> (m, ...)`` with coords a list of coordinate arrays."""

    def state(grid, t, padded=False):
        return np.asarray(u(grid.mesh(padded), t), dtype=float)

    deriv = None
    if ut is not None:
        def deriv(grid, t, padded=False):
            return np.asarray(ut(grid.mesh(padded), t), dtype=float)
    return ExactSolution(name, state, deriv, window)


def js_solution(kappa: float) -> ExactSolution:
    def u(X, t):
        return js_state(np.stack(X), t, kappa)[0]

    def ut(X, t):
        return js_state(np.stack(X), t, kappa)[2]

    return from_function("js", u, ut, window=(-np.inf, 1.0))


@dataclass
class ResidualReport:
    times: list[float]
    spacings: list[float]
    norms: np.ndarray  # (grids, times)
    orders: np.ndarray  # (grids - 1, times)
    fd_time: bool


def _residual_norm(model, solution: ExactSolution, grid: Grid, t: float):
    if solution.exact_ghosts:
        Wp = solution.state(grid, t, padded=True)
    else:
        Wp = pad(grid, solution.state(grid, t))
    W = Wp[(slice(None),) + (slice(1, -1),) * grid.dim]
    div = flux_divergence_padded(grid.spacing, Wp, model.tensor_field(Wp), model.layout)
    fd = solution.time_derivative is None
    if fd:
        dt = 1e-6
        ut = (solution.state(grid, t + dt) - solution.state(grid, t - dt)) / (2 * dt)
    else:
        ut = solution.time_derivative(grid, t)
    DW = None
    if model.reaction.needs_gradient:
        from .mesh import FieldSet, gradient

        DW = gradient(grid, FieldSet(grid, W)).values
    r = ut - div - model.reaction_field(W, DW)
    return float(np.sqrt(integrate(grid, (r**2).sum(axis=0)))), fd


def evolution_residual(model, solution: ExactSolution, grid, times: Sequence[float]) -> ResidualReport:
    """L2 norm of u_t - Div(A(u) Du) - g(u) over cells for each time.

    ``grid`` may be a single Grid or a sequence of refinements; with two or
    more grids the observed order log(r_coarse/r_fine)/log(h_coarse/h_fine)
    is reported per consecutive pair.
    """
    grids = [grid] if isinstance(grid, Grid) else list(grid)
    times = [float(t) for t in times]
    lo, hi = solution.window
    for t in times:
        if not lo <= t < hi:
            raise ValueError(f"time {t} outside validity window {solution.window}")
    norms = np.zeros((len(grids), len(times)))
    fd_any = False
    for gi, g in enumerate(grids):
        for ti, t in enumerate(times):
            norms[gi, ti], fd = _residual_norm(model, solution, g, t)
            fd_any |= fd
    hs = [max(g.spacing) for g in grids]
    orders = np.zeros((max(len(grids) - 1, 0), len(times)))
    for gi in range(len(grids) - 1):
        with np.errstate(divide="ignore", invalid="ignore"):
            orders[gi] = np.log(norms[gi] / norms[gi + 1]) / np.log(hs[gi] / hs[gi + 1])
    return ResidualReport(times, hs, norms, orders, fd_any)


# ---------------------------------------------------------------- separable profiles


def _profile_operator(U, alpha, c1, eps0, h):
    """-(|U|^alpha U')' + c1 U - eps0 |U|^alpha U with zero Dirichlet ghosts."""
    Up = np.concatenate([[-U[0]], U, [-U[-1]]])
    w = np.abs(Up) ** alpha
    flux = 0.5 * (w[1:] + w[:-1]) * np.diff(Up) / h
    return -np.diff(flux) / h + c1 * U - eps0 * np.abs(U) ** alpha * U


@dataclass
class StationaryProfile:
    grid: Grid
    values: np.ndarray
    alpha: float
    c1: float
    eps0: float
    residual: float  # max-norm of the discrete stationary equation


def stationary_profile(alpha: float, c1: float, eps0: float, length: float, cells: int, amplitude: float = 3.0, xtol: float = 1e-12) -> StationaryProfile:
    """Nonzero 1d profile of -Div(|U|^alpha DU) + c1 U = eps0 |U|^alpha U, U = 0 at both ends.

    Solved as a nonlinear root problem started from ``amplitude * sin``.
    """
    from .mesh import build_grid

    grid = build_grid([length], [cells], "dirichlet0")
    h = grid.spacing[0]
    x = grid.centers(0)
    guess = amplitude * np.sin(np.pi * x / length)
    sol = root(_profile_operator, guess, args=(alpha, c1, eps0, h), method="hybr", options={"xtol": xtol})
    U = sol.x
    res = float(np.abs(_profile_operator(U, alpha, c1, eps0, h)).max())
    if np.abs(U).max() < 1e-8:
        raise ValueError("stationary_profile converged to the zero solution")
    return StationaryProfile(grid, U, alpha, c1, eps0, res)


def separable_amplitude(t, alpha: float, c1: float, law: str = "printed", c0: float = 1.0):
    """Time factor c(t) of W = c(t) U0 and its derivative.

    ``printed``: c = c1 t / (alpha + 1).
    ``ode``: solution of c' = c1 c^(alpha+1), c(0) = c0, which is what
    substituting W = c(t) U0 into the evolution equation requires.
    """
    t = np.asarray(t, dtype=float)
    if law == "printed":
        return c1 * t / (alpha + 1), np.full_like(t, c1 / (alpha + 1))
    if law == "ode":
        base = c0 ** (-alpha) - alpha * c1 * t
        if np.any(base <= 0):
            raise ValueError("separable amplitude has blown up before t")
        c = base ** (-1.0 / alpha)
        return c, c1 * c ** (alpha + 1)
    raise ValueError(f"unknown amplitude law {law!r}")


def separable_solution(profile: StationaryProfile, law: str = "printed", c0: float = 1.0) -> ExactSolution:
    """W(x, t) = c(t) U0(x) on the profile's grid (ghosts from the Dirichlet rule)."""

    def state(grid, t, padded=False):
        c, _ = separable_amplitude(t, profile.alpha, profile.c1, law, c0)
        vals = c * profile.values[None]
        return pad(grid, vals) if padded else vals

    def deriv(grid, t, padded=False):
        _, dc = separable_amplitude(t, profile.alpha, profile.c1, law, c0)
        return dc * profile.values[None]

    hi = np.inf
    if law == "ode" and profile.c1 > 0:
        hi = c0 ** (-profile.alpha) / (profile.alpha * profile.c1)
    lo = 0.0 if law == "ode" else -np.inf
    return ExactSolution(f"separable-{law}", state, deriv, (lo, hi), exact_ghosts=False)
