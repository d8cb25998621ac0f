"""Integral diagnostics of a state: norms, energies, Levine potentials, BMO, slab criterion,
principal eigenpairs and the eigenpair-weighted balance identity."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from numpy.lib.stride_tricks import sliding_window_view
from scipy.sparse.linalg import cg

from .errors import ConfigError, ConvergenceError
from .mesh import FieldSet, Grid, gradient, integrate

GAUSS_NODES = 32
_RHO, _RHO_W = np.polynomial.legendre.leggauss(GAUSS_NODES)
_RHO = 0.5 * (_RHO + 1.0)
_RHO_W = 0.5 * _RHO_W


def _pointwise_abs(field: FieldSet) -> np.ndarray:
    return np.sqrt((field.values**2).sum(axis=0))


def lp_norm(field: FieldSet, p: float) -> float:
    """(int |W|^p)^(1/p) with |W| the Euclidean norm over components; p = inf gives the max."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    r = _pointwise_abs(field)
    if np.isinf(p):
        return float(r.max())
    return integrate(field.grid, r**p) ** (1.0 / p)


def _flux(W: FieldSet, model) -> np.ndarray:
    """A(W) DW at cell centres, shape (m, d, *cells)."""
    DW = gradient(W.grid, W).values
    A = model.tensor_field(W.values)
    if model.layout == "component":
        return np.einsum("ij...,jb...->ib...", A, DW)
    return np.einsum("iajb...,jb...->ia...", A, DW)


def weighted_dirichlet(W: FieldSet, model) -> float:
    """int lambda(W) |DW|^2 with lambda = ell (1 + |W|^k)."""
    DW = gradient(W.grid, W)
    return integrate(W.grid, model.weight(W.values) * DW.norm2())


def flux_energy(W: FieldSet, model) -> float:
    """y = int |A(W) DW|^2."""
    return integrate(W.grid, (_flux(W, model) ** 2).sum(axis=(0, 1)))


def _potential_map(a) -> Callable:
    if callable(a) and not hasattr(a, "diffusion"):
        return a
    return a.diffusion.potential


def phi_density(values: np.ndarray, a) -> np.ndarray:
    """int_0^1 <a(rho u), u> d rho, pointwise, by 32-node Gauss-Legendre."""
    amap = _potential_map(a)
    out = np.zeros(values.shape[1:])
    for rho, w in zip(_RHO, _RHO_W):
        out += w * (amap(rho * values) * values).sum(axis=0)
    return out


def levine_phi(W: FieldSet, a) -> float:
    """phi = int int_0^1 <a(rho W), W> d rho. ``a`` is a model with a potential map or a callable."""
    return integrate(W.grid, phi_density(W.values, a))


def levine_psi(W: FieldSet, a, B: Callable | None = None, gamma: float = 1.0) -> float:
    """psi = -gamma int |D a(W)|^2 + int B(W).

    ``B`` defaults to the reaction potential of ``a`` when ``a`` is a model.
    """
    amap = _potential_map(a)
    if B is None:
        reaction = getattr(a, "reaction", None)
        if reaction is None or not reaction.has_potential:
            raise ConfigError("levine_psi needs a potential B")
        B = reaction.potential
    aW = FieldSet(W.grid, amap(W.values))
    Da = gradient(W.grid, aW)
    return -gamma * integrate(W.grid, Da.norm2()) + integrate(W.grid, B(W.values))


def bmo_seminorm(field: FieldSet, sizes) -> float:
    """max over grid-aligned cubes of (1/|Q|) int_Q |f - f_Q|.

    Cubes of physical side ``size`` are anchored at cell corners with stride
    half a side; the last anchor is pinned flush to the upper boundary.
    """
    g = field.grid
    v = field.values
    best = 0.0
    for size in np.atleast_1d(sizes):
        if any(size > L * (1 + 1e-12) for L in g.extents):
            raise ValueError(f"cube size {size} exceeds the domain")
        side = [max(1, int(round(size / h))) for h in g.spacing]
        side = [min(s, n) for s, n in zip(side, g.cells)]
        win = sliding_window_view(v, side, axis=tuple(range(1, g.dim + 1)))
        idx = []
        for s, n in zip(side, g.cells):
            stride = max(1, s // 2)
            anchors = list(range(0, n - s + 1, stride))
            if anchors[-1] != n - s:
                anchors.append(n - s)
            idx.append(np.array(anchors))
        sub = win[(slice(None),) + np.ix_(*idx)]
        cube_axes = tuple(range(-g.dim, 0))
        mean = sub.mean(axis=cube_axes, keepdims=True)
        dev = np.sqrt(((sub - mean) ** 2).sum(axis=0)).mean(axis=cube_axes)
        best = max(best, float(dev.max()))
    return best


def slab_criterion(field: FieldSet, R: float) -> float:
    """(1/R) int_0^R int_{B_R} |D_{x3} W|^2 with B_R the centred square of side 2R in (x1, x2)."""
    g = field.grid
    if g.dim != 3:
        raise ValueError("slab_criterion needs a 3d grid")
    if not 0 < R <= g.extents[2] * (1 + 1e-12) or 2 * R > min(g.extents[:2]) * (1 + 1e-12):
        raise ValueError(f"R={R} exceeds the domain")
    D3 = gradient(g, field).values[:, 2]
    sl = []
    for ax in range(2):
        c = min(g.cells[ax], max(1, int(np.floor(2 * R / g.spacing[ax] + 1e-9))))
        start = (g.cells[ax] - c) // 2
        sl.append(slice(start, start + c))
    n3 = min(g.cells[2], max(1, int(round(R / g.spacing[2]))))
    sl.append(slice(0, n3))
    box = D3[(slice(None),) + tuple(sl)]
    return float((box**2).sum() * g.cell_volume / R)


# ---------------------------------------------------------------- eigenpairs


@dataclass
class EigenPair:
    eigenvalue: float
    eigenfunction: np.ndarray
    normalization: str
    residual: float
    iterations: int


def divergence_operator(grid: Grid, gamma: np.ndarray) -> sp.csr_matrix:
    """Sparse matrix of -Div(gamma D .) on cells with the grid's ghost rules.

    Face coefficients are arithmetic means of the adjacent cells; at a
    boundary face the cell value itself is used.
    """
    gamma = np.maximum(np.asarray(gamma, dtype=float), 1e-12)
    shape = grid.shape
    n = int(np.prod(shape))
    index = np.arange(n).reshape(shape)
    rows, cols, vals = [], [], []
    diag = np.zeros(n)
    for ax in range(grid.dim):
        h2 = grid.spacing[ax] ** 2
        lo, hi = grid.bcs[ax]
        nax = shape[ax]
        a = np.take(index, range(nax - 1), axis=ax).ravel()
        b = np.take(index, range(1, nax), axis=ax).ravel()
        gf = 0.5 * (gamma.ravel()[a] + gamma.ravel()[b]) / h2
        np.add.at(diag, a, gf)
        np.add.at(diag, b, gf)
        rows += [a, b]
        cols += [b, a]
        vals += [-gf, -gf]
        first = np.take(index, [0], axis=ax).ravel()
        last = np.take(index, [nax - 1], axis=ax).ravel()
        if lo.kind in ("periodic", "antiperiodic"):
            sign = 1.0 if lo.kind == "periodic" else -1.0
            gf = 0.5 * (gamma.ravel()[first] + gamma.ravel()[last]) / h2
            np.add.at(diag, first, gf)
            np.add.at(diag, last, gf)
            rows += [first, last]
            cols += [last, first]
            vals += [-sign * gf, -sign * gf]
            continue
        for cells_, bc in ((first, lo), (last, hi)):
            gb = gamma.ravel()[cells_] / h2
            if bc.kind in ("dirichlet0", "dirichlet"):
                np.add.at(diag, cells_, 2.0 * gb)
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(diag)
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))


def _normalize(grid: Grid, phi: np.ndarray, normalization: str, s: float) -> np.ndarray:
    if normalization == "l1":
        return phi / integrate(grid, np.abs(phi))
    if normalization == "ls":
        return phi / integrate(grid, np.abs(phi) ** s) ** (1.0 / s)
    if normalization == "sup":
        return phi / np.abs(phi).max()
    raise ValueError(f"unknown normalization {normalization!r}")


def principal_eigenpair(grid: Grid, gamma, normalization: str = "l1", s: float = 2.0, tol: float = 1e-10, max_iter: int = 500) -> EigenPair:
    """Smallest eigenvalue and positive eigenfunction of -Div(gamma D phi) = lambda phi.

    Inverse power iteration with conjugate-gradient inner solves. The grid
    must carry at least one Dirichlet end so the operator is definite.
    """
    if not any(bc.kind in ("dirichlet0", "dirichlet") for pair in grid.bcs for bc in pair):
        raise ConfigError("principal_eigenpair needs a Dirichlet boundary somewhere")
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), grid.shape)
    L = divergence_operator(grid, gamma)
    x = np.ones(L.shape[0])
    x /= np.linalg.norm(x)
    lam_old, res_old = np.inf, np.inf
    for it in range(1, max_iter + 1):
        y, info = cg(L, x, x0=x / max(lam_old, 1.0) if np.isfinite(lam_old) else None, rtol=tol, atol=0.0, maxiter=20 * L.shape[0])
        if info != 0:
            raise ConvergenceError(f"inner CG solve did not converge (info={info})")
        x = y / np.linalg.norm(y)
        Lx = L @ x
        lam = float(x @ Lx)
        res = float(np.linalg.norm(Lx - lam * x))
        if res <= 1e-11 * lam or (res <= 1e-9 * lam and res >= 0.5 * res_old):
            break
        lam_old, res_old = lam, res
    else:
        raise ConvergenceError(f"inverse iteration did not converge in {max_iter} steps")
    if x.sum() < 0:
        x = -x
    phi = _normalize(grid, x.reshape(grid.shape), normalization, s)
    return EigenPair(lam, phi, normalization, res, it)


def rayleigh_residual(grid: Grid, gamma, pair: EigenPair) -> float:
    """||-Div(gamma D phi) - lambda phi||_2 / ||phi||_2 with the discrete operator."""
    L = divergence_operator(grid, np.broadcast_to(np.asarray(gamma, dtype=float), grid.shape))
    phi = pair.eigenfunction.ravel()
    return float(np.linalg.norm(L @ phi - pair.eigenvalue * phi) / np.linalg.norm(phi))


def row_eigenpairs(W: FieldSet, model, normalization: str = "l1") -> list[EigenPair]:
    """One principal pair per row weight gamma_i(W) of a factored-rows model."""
    diff = model.diffusion
    if getattr(diff, "name", None) != "factored_rows":
        raise ConfigError("row eigenpairs need a factored_rows diffusion")
    gam = diff.gamma(W.values)
    return [principal_eigenpair(W.grid, gam[i], normalization) for i in range(model.m)]


def weighted_balance(W: FieldSet, model, pairs: list[EigenPair] | None = None, z=None) -> tuple[float, float]:
    """(sum_i z_i lambda_i int phi_i sum_j hat a_ij(u_j),  sum_i z_i int (G(W) W)_i phi_i)."""
    diff = model.diffusion
    if getattr(diff, "name", None) != "factored_rows":
        raise ConfigError("weighted_balance needs a factored_rows diffusion")
    if pairs is None:
        pairs = row_eigenpairs(W, model)
    z = np.ones(model.m) if z is None else np.asarray(z, dtype=float)
    if (z <= 0).any():
        raise ValueError("z must be positive")
    P = diff.hat(W.values).sum(axis=1)
    GW = model.reaction_field(W.values)
    lhs = sum(z[i] * pairs[i].eigenvalue * integrate(W.grid, pairs[i].eigenfunction * P[i]) for i in range(model.m))
    rhs = sum(z[i] * integrate(W.grid, pairs[i].eigenfunction * GW[i]) for i in range(model.m))
    return float(lhs), float(rhs)


# ---------------------------------------------------------------- registry


def _bmo_default(W, model, params):
    sizes = params.get("bmo_sizes") or [min(W.grid.extents) / 4]
    return bmo_seminorm(W, sizes)


def _slab_default(W, model, params):
    R = params.get("slab_R") or W.grid.extents[2]
    return slab_criterion(W, R)


FUNCTIONALS: dict[str, Callable] = {
    "mass": lambda W, model, params: integrate(W.grid, W),
    "l1": lambda W, model, params: lp_norm(W, 1),
    "l2": lambda W, model, params: lp_norm(W, 2),
    "l2sq": lambda W, model, params: lp_norm(W, 2) ** 2,
    "linf": lambda W, model, params: lp_norm(W, np.inf),
    "weighted_dirichlet": lambda W, model, params: weighted_dirichlet(W, model),
    "flux_energy": lambda W, model, params: flux_energy(W, model),
    "phi": lambda W, model, params: levine_phi(W, model),
    "psi": lambda W, model, params: levine_psi(W, model),
    "bmo": _bmo_default,
    "slab": _slab_default,
}


def evaluate(names, W: FieldSet, model, params: dict | None = None) -> dict[str, float]:
    params = params or {}
    out = {}
    for name in names:
        if name not in FUNCTIONALS:
            raise ConfigError(f"unknown functional {name!r}")
        out[name] = float(FUNCTIONALS[name](W, model, params))
    return out


@dataclass
class DiagnosticsSeries:
    columns: list[str]
    rows: list[list[float]] = field(default_factory=list)

    def append(self, time: float, values: dict[str, float]) -> None:
        if self.rows and time <= self.rows[-1][0]:
            raise ValueError("diagnostics times must be strictly increasing")
        self.rows.append([float(time)] + [float(values[c]) for c in self.columns])

    def column(self, name: str) -> np.ndarray:
        if name == "time":
            return np.array([r[0] for r in self.rows])
        j = self.columns.index(name) + 1
        return np.array([r[j] for r in self.rows])

    def __len__(self):
        return len(self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time"] + self.columns)
        for r in self.rows:
            w.writerow([repr(x) for x in r])
        return buf.getvalue()
