"""Cell-centred box grids, ghost-cell boundary conditions and discrete calculus.

Every field lives at cell centres. Boundary conditions are realised by a
single layer of ghost cells, so one family of stencils covers Dirichlet,
Neumann, periodic and antiperiodic ends:

    DirichletZero   ghost = -interior        (face value 0)
    NeumannZero     ghost =  interior        (face derivative 0)
    DirichletValue  ghost = 2 g - interior   (face value g)
    Periodic        ghost = opposite end
    Antiperiodic    ghost = -opposite end

Divergence-form operators use compact face differences for the normal
derivative and arithmetic means of the adjacent cell coefficients on faces.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError

BC_KINDS = ("dirichlet0", "neumann0", "dirichlet", "periodic", "antiperiodic")
_WRAPPING = ("periodic", "antiperiodic")


@dataclass(frozen=True)
class BC:
    kind: str
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in BC_KINDS:
            raise ConfigError(f"unknown boundary condition {self.kind!r}")

    @classmethod
    def parse(cls, tag: str) -> "BC":
        tag = tag.strip().lower()
        if tag.startswith("dirichlet:"):
            return cls("dirichlet", float(tag.split(":", 1)[1]))
        aliases = {"dirichlet": "dirichlet0", "neumann": "neumann0"}
        return cls(aliases.get(tag, tag))

    def tag(self) -> str:
        if self.kind == "dirichlet":
            return f"dirichlet:{self.value!r}"
        return self.kind


DIRICHLET0 = BC("dirichlet0")
NEUMANN0 = BC("neumann0")
PERIODIC = BC("periodic")
ANTIPERIODIC = BC("antiperiodic")


@dataclass(frozen=True)
class Grid:
    extents: tuple[float, ...]
    cells: tuple[int, ...]
    bcs: tuple[tuple[BC, BC], ...]
    origin: tuple[float, ...] = ()

    def __post_init__(self):
        if not 1 <= len(self.cells) <= 3:
            raise ConfigError(f"grid dimension must be 1, 2 or 3, got {len(self.cells)}")
        if len(self.extents) != len(self.cells) or len(self.bcs) != len(self.cells):
            raise ConfigError("extents, cells and bcs must have one entry per axis")
        for ax, (L, n) in enumerate(zip(self.extents, self.cells)):
            if not L > 0:
                raise ConfigError(f"axis {ax}: extent must be positive, got {L}")
            if int(n) != n or n < 2:
                raise ConfigError(f"axis {ax}: need at least 2 cells, got {n}")
        for ax, (lo, hi) in enumerate(self.bcs):
            if (lo.kind in _WRAPPING or hi.kind in _WRAPPING) and lo.kind != hi.kind:
                raise ConfigError(f"axis {ax}: {lo.kind}/{hi.kind} must be declared on both ends")
        if not self.origin:
            object.__setattr__(self, "origin", (0.0,) * len(self.cells))

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.cells)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.extents, self.cells))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self.extents))

    def centers(self, axis: int) -> np.ndarray:
        h = self.spacing[axis]
        return self.origin[axis] + h * (np.arange(self.cells[axis]) + 0.5)

    def padded_centers(self, axis: int) -> np.ndarray:
        h = self.spacing[axis]
        return self.origin[axis] + h * (np.arange(-1, self.cells[axis] + 1) + 0.5)

    def mesh(self, padded: bool = False) -> list[np.ndarray]:
        axes = [self.padded_centers(a) if padded else self.centers(a) for a in range(self.dim)]
        return np.meshgrid(*axes, indexing="ij")


def build_grid(extents: Sequence[float], cells: Sequence[int], bcs="neumann0", origin=None) -> Grid:
    """Build a cell-centred grid.

    ``bcs`` may be a single tag for every end, one tag or (lo, hi) pair per
    axis, with tags given as strings or :class:`BC` instances.
    """
    extents = tuple(float(e) for e in extents)
    cells = tuple(int(c) for c in cells)
    dim = len(cells)

    def as_bc(b):
        return b if isinstance(b, BC) else BC.parse(b)

    if isinstance(bcs, (str, BC)):
        pairs = [(as_bc(bcs), as_bc(bcs))] * dim
    else:
        pairs = []
        for b in bcs:
            if isinstance(b, (str, BC)):
                pairs.append((as_bc(b), as_bc(b)))
            else:
                lo, hi = b
                pairs.append((as_bc(lo), as_bc(hi)))
    origin = tuple(float(o) for o in origin) if origin is not None else ()
    return Grid(extents, cells, tuple(pairs), origin)


@dataclass
class FieldSet:
    grid: Grid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == self.grid.dim:
            self.values = self.values[None]
        if self.values.shape[1:] != self.grid.shape:
            raise ValueError(f"field shape {self.values.shape} does not match grid {self.grid.shape}")

    @property
    def m(self) -> int:
        return self.values.shape[0]

    def copy(self) -> "FieldSet":
        return FieldSet(self.grid, self.values.copy(), self.time)

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.values).all())

    def first_nonfinite(self):
        """(component, cell index) of the first non-finite entry, or None."""
        bad = np.argwhere(~np.isfinite(self.values))
        return None if bad.size == 0 else tuple(int(i) for i in bad[0])

    def sup(self) -> float:
        with np.errstate(over="ignore", invalid="ignore"):
            top = float(np.sqrt((self.values**2).sum(axis=0)).max())
        return top if np.isfinite(top) else float("inf")


@dataclass
class VectorField:
    grid: Grid
    values: np.ndarray  # (component, direction, *cells)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[1:] != (self.grid.dim, *self.grid.shape):
            raise ValueError(f"vector field shape {self.values.shape} inconsistent with grid")

    def norm2(self) -> np.ndarray:
        """Pointwise squared Frobenius norm over (component, direction)."""
        return (self.values**2).sum(axis=(0, 1))


def field_from_function(grid: Grid, fn, time: float = 0.0) -> FieldSet:
    """Sample ``fn(*coords)`` (returning one array or a list per component) at cell centres."""
    vals = fn(*grid.mesh())
    if isinstance(vals, (list, tuple)):
        vals = np.stack([np.broadcast_to(v, grid.shape) for v in vals])
    else:
        vals = np.broadcast_to(vals, grid.shape)[None]
    return FieldSet(grid, np.array(vals, dtype=float), time)


# ---------------------------------------------------------------- ghosts


def _sl(ndim: int, axis: int, index) -> tuple:
    s = [slice(None)] * ndim
    s[axis] = index
    return tuple(s)


def _ghost_axis(arr: np.ndarray, axis: int, lo: BC, hi: BC) -> np.ndarray:
    """Append one ghost layer on both ends of ``axis`` (axis counts leading dims)."""
    shape = list(arr.shape)
    shape[axis] += 2
    out = np.empty(shape)
    nd = arr.ndim
    out[_sl(nd, axis, slice(1, -1))] = arr
    n = shape[axis]
    if lo.kind in _WRAPPING:
        sign = 1.0 if lo.kind == "periodic" else -1.0
        out[_sl(nd, axis, 0)] = sign * out[_sl(nd, axis, n - 2)]
        out[_sl(nd, axis, n - 1)] = sign * out[_sl(nd, axis, 1)]
        return out
    for ghost, inner, bc in ((0, 1, lo), (n - 1, n - 2, hi)):
        if bc.kind == "dirichlet0":
            out[_sl(nd, axis, ghost)] = -out[_sl(nd, axis, inner)]
        elif bc.kind == "neumann0":
            out[_sl(nd, axis, ghost)] = out[_sl(nd, axis, inner)]
        else:
            out[_sl(nd, axis, ghost)] = 2.0 * bc.value - out[_sl(nd, axis, inner)]
    return out


def pad(grid: Grid, values: np.ndarray, lead: int = 1, parity=None) -> np.ndarray:
    """Return ``values`` with one ghost layer on every spatial axis.

    ``lead`` is the number of leading non-spatial axes. ``parity`` overrides
    the grid BCs per axis with 'even'/'odd' reflection (used for fluxes).
    """
    out = values
    for ax in range(grid.dim):
        lo, hi = grid.bcs[ax]
        if parity is not None and lo.kind not in _WRAPPING:
            kind = "neumann0" if parity[ax] == "even" else "dirichlet0"
            lo = hi = BC(kind)
        out = _ghost_axis(out, lead + ax, lo, hi)
    return out


def interior(arr: np.ndarray, dim: int) -> np.ndarray:
    """Strip one ghost layer from the trailing ``dim`` axes."""
    return arr[(Ellipsis,) + (slice(1, -1),) * dim]


# ---------------------------------------------------------------- calculus


def _centered(arr: np.ndarray, axis: int, h: float) -> np.ndarray:
    nd = arr.ndim
    return (arr[_sl(nd, axis, slice(2, None))] - arr[_sl(nd, axis, slice(None, -2))]) / (2.0 * h)


def gradient(grid: Grid, field: FieldSet) -> VectorField:
    """Centred-difference gradient at cell centres; boundary cells use ghosts."""
    if field.grid != grid:
        raise ValueError("field is not on this grid")
    d = grid.dim
    P = pad(grid, field.values)
    comps = []
    for ax in range(d):
        g = _centered(P, 1 + ax, grid.spacing[ax])
        # strip ghosts on the remaining axes
        s = [slice(None)] + [slice(1, -1)] * d
        s[1 + ax] = slice(None)
        comps.append(g[tuple(s)])
    return VectorField(grid, np.stack(comps, axis=1))


def _face_values(F: np.ndarray, axis: int, lo: BC, wrap: bool) -> np.ndarray:
    """Cell-centred values -> values on the n+1 faces along ``axis``."""
    first = np.take(F, [0], axis=axis)
    second = np.take(F, [1], axis=axis)
    last = np.take(F, [-1], axis=axis)
    before = np.take(F, [-2], axis=axis)
    inner = 0.5 * (np.take(F, range(1, F.shape[axis]), axis=axis) + np.take(F, range(F.shape[axis] - 1), axis=axis))
    if wrap:
        sign = 1.0 if lo.kind == "periodic" else -1.0
        seam = 0.5 * (first + sign * last)
        return np.concatenate([seam, inner, sign * seam], axis=axis)
    return np.concatenate([1.5 * first - 0.5 * second, inner, 1.5 * last - 0.5 * before], axis=axis)


def divergence(grid: Grid, flux: VectorField) -> FieldSet:
    """Divergence of a cell-centred flux via face averages.

    Interior faces take the mean of the two adjacent cells; non-wrapping
    boundary faces use second-order linear extrapolation.
    """
    if flux.grid != grid:
        raise ValueError("flux is not on this grid")
    out = np.zeros((flux.values.shape[0], *grid.shape))
    for ax in range(grid.dim):
        lo, _ = grid.bcs[ax]
        Fa = flux.values[:, ax]
        faces = _face_values(Fa, 1 + ax, lo, lo.kind in _WRAPPING)
        n = faces.shape[1 + ax]
        out += (np.take(faces, range(1, n), axis=1 + ax) - np.take(faces, range(n - 1), axis=1 + ax)) / grid.spacing[ax]
    return FieldSet(grid, out)


def flux_divergence_padded(spacing: Sequence[float], Wp: np.ndarray, Ap: np.ndarray, layout: str) -> np.ndarray:
    """Div(A(W) DW) at interior cells from arrays that already carry one ghost layer.

    ``Wp`` has shape (m, *(n+2)). For layout ``"component"`` ``Ap`` has shape
    (m, m, *(n+2)) and acts on the component index only. For ``"full"`` it
    has shape (m, d, m, d, *(n+2)), indices (i, alpha, j, beta).
    Normal derivatives on faces are compact differences; tangential ones are
    means of the adjacent centred differences. Face coefficients are the
    arithmetic mean of the two adjacent cells.
    """
    d = Wp.ndim - 1
    m = Wp.shape[0]
    n = [s - 2 for s in Wp.shape[1:]]
    out = np.zeros((m, *n))
    if layout not in ("component", "full"):
        raise ValueError(f"unknown tensor layout {layout!r}")
    if layout == "full":
        # centred derivative along b: interior along b, padded elsewhere
        cent = [_centered(Wp, 1 + b, spacing[b]) for b in range(d)]
    for a in range(d):
        h = spacing[a]
        # faces along a are pairs (k, k+1), k = 0..n_a; interior on the other axes
        lo_s = [slice(1, -1)] * d
        hi_s = list(lo_s)
        lo_s[a] = slice(0, -1)
        hi_s[a] = slice(1, None)
        lo_s, hi_s = tuple(lo_s), tuple(hi_s)
        dn = (Wp[(slice(None),) + hi_s] - Wp[(slice(None),) + lo_s]) / h
        if layout == "component":
            Af = Ap[(slice(None), slice(None)) + lo_s] + Ap[(slice(None), slice(None)) + hi_s]
            if m == 1:
                flux = 0.5 * Af[0] * dn
            else:
                flux = 0.5 * np.einsum("ij...,j...->i...", Af, dn)
        else:
            grads = []
            for b in range(d):
                if b == a:
                    grads.append(dn)
                    continue
                gl = [slice(1, -1)] * d
                gh = list(gl)
                gl[b] = gh[b] = slice(None)
                gl[a], gh[a] = slice(0, -1), slice(1, None)
                grads.append(0.5 * (cent[b][(slice(None),) + tuple(gl)] + cent[b][(slice(None),) + tuple(gh)]))
            Dface = np.stack(grads, axis=1)  # (m, d, faces...)
            Af = Ap[(slice(None), a, slice(None), slice(None)) + lo_s] + Ap[(slice(None), a, slice(None), slice(None)) + hi_s]
            flux = 0.5 * np.einsum("ijb...,jb...->i...", Af, Dface)
        out += (flux[_sl(d + 1, 1 + a, slice(1, None))] - flux[_sl(d + 1, 1 + a, slice(None, -1))]) / h
    return out


def integrate(grid: Grid, values) -> float:
    """Midpoint rule: sum of cell values times cell volume.

    Accepts a scalar array on the grid or a FieldSet (summed over components).
    """
    if isinstance(values, FieldSet):
        values = values.values.sum(axis=0)
    arr = np.ascontiguousarray(np.broadcast_to(np.asarray(values, dtype=float), grid.shape))
    return float(arr.sum() * grid.cell_volume)


# ---------------------------------------------------------------- reflection


def reflect(field: FieldSet, axis: int, parity: str) -> FieldSet:
    """Extend ``field`` across the upper face of ``axis`` by mirror reflection.

    ``even`` mirrors values, ``odd`` mirrors with a sign flip. The doubled
    grid is periodic (even) or antiperiodic (odd) along ``axis``.
    """
    grid = field.grid
    if not 0 <= axis < grid.dim:
        raise ValueError(f"axis {axis} out of range for dim {grid.dim}")
    if parity not in ("even", "odd"):
        raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")
    sign = 1.0 if parity == "even" else -1.0
    v = field.values
    mirrored = sign * np.flip(v, axis=1 + axis)
    new_vals = np.concatenate([v, mirrored], axis=1 + axis)
    ext = list(grid.extents)
    ext[axis] *= 2
    cells = list(grid.cells)
    cells[axis] *= 2
    bcs = list(grid.bcs)
    wrap = PERIODIC if parity == "even" else ANTIPERIODIC
    bcs[axis] = (wrap, wrap)
    new_grid = Grid(tuple(ext), tuple(cells), tuple(bcs), grid.origin)
    return FieldSet(new_grid, new_vals, field.time)


def restrict(field: FieldSet, axis: int, bcs: tuple[BC, BC] | None = None) -> FieldSet:
    """Inverse of :func:`reflect`: keep the lower half along ``axis``."""
    grid = field.grid
    n = grid.cells[axis] // 2
    idx = [slice(None)] * field.values.ndim
    idx[1 + axis] = slice(0, n)
    ext = list(grid.extents)
    ext[axis] /= 2
    cells = list(grid.cells)
    cells[axis] = n
    new_bcs = list(grid.bcs)
    new_bcs[axis] = bcs if bcs is not None else (NEUMANN0, NEUMANN0)
    new_grid = Grid(tuple(ext), tuple(cells), tuple(new_bcs), grid.origin)
    return FieldSet(new_grid, field.values[tuple(idx)].copy(), field.time)


def seam_residual(field: FieldSet, axis: int, parity: str) -> float:
    """Max mismatch of the mirror symmetry about the midplane of ``axis``."""
    sign = 1.0 if parity == "even" else -1.0
    v = field.values
    n = v.shape[1 + axis] // 2
    lower = np.take(v, range(n), axis=1 + axis)
    upper = np.flip(np.take(v, range(n, 2 * n), axis=1 + axis), axis=1 + axis)
    return float(np.abs(lower - sign * upper).max())


# ---------------------------------------------------------------- text I/O


def field_to_text(field: FieldSet) -> str:
    """Plain-text/CSV layout: '#'-prefixed header, then one row per cell.

    Rows are in lexicographic cell order (last axis fastest): cell indices
    followed by the m component values.
    """
    g = field.grid
    buf = io.StringIO()
    buf.write(f"# dim={g.dim}\n")
    buf.write("# cells=" + ",".join(str(c) for c in g.cells) + "\n")
    buf.write("# extents=" + ",".join(repr(e) for e in g.extents) + "\n")
    buf.write("# origin=" + ",".join(repr(o) for o in g.origin) + "\n")
    buf.write("# bcs=" + ",".join(f"{lo.tag()}|{hi.tag()}" for lo, hi in g.bcs) + "\n")
    buf.write(f"# m={field.m}\n")
    buf.write(f"# time={field.time!r}\n")
    cols = [f"i{a}" for a in range(g.dim)] + [f"w{c}" for c in range(field.m)]
    buf.write(",".join(cols) + "\n")
    flat = field.values.reshape(field.m, -1)
    for k, idx in enumerate(np.ndindex(*g.shape)):
        row = [str(i) for i in idx] + [repr(float(x)) for x in flat[:, k]]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def field_from_text(text: str) -> FieldSet:
    header = {}
    rows = []
    lines = text.splitlines()
    for line in lines:
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            header[key.strip()] = val.strip()
        elif line and not line[0].isalpha():
            rows.append(line)
    try:
        dim = int(header["dim"])
        cells = tuple(int(c) for c in header["cells"].split(","))
        extents = tuple(float(e) for e in header["extents"].split(","))
        origin = tuple(float(o) for o in header["origin"].split(","))
        bcs = tuple(tuple(BC.parse(t) for t in pair.split("|")) for pair in header["bcs"].split(","))
        m = int(header["m"])
        time = float(header["time"])
    except KeyError as exc:
        raise ConfigError(f"field file header is missing {exc.args[0]!r}") from None
    grid = Grid(extents, cells, bcs, origin)
    data = np.array([[float(x) for x in r.split(",")[dim:]] for r in rows])
    if data.shape != (int(np.prod(cells)), m):
        raise ConfigError(f"field file has {data.shape[0]} rows, expected {int(np.prod(cells))}")
    return FieldSet(grid, data.T.reshape(m, *cells), time)
