"""Diffusion-tensor and reaction families, pointwise evaluation and ellipticity sampling.

All family methods are vectorised: a state ``W`` has shape ``(m, ...)`` and
the trailing axes are carried through, so the same code evaluates a single
point or a whole grid.

Tensor layouts:
    "component"  shape (m, m, ...), the same matrix for every spatial direction
    "full"       shape (m, d, m, d, ...), indices (i, alpha, j, beta)

The ellipticity weight is lambda(W) = ell * (1 + |W|**k).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import exact
from .errors import ConfigError

_TINY = 1e-300


def _vec(x, n=None, name="value") -> np.ndarray:
    if isinstance(x, str):
        x = [float(t) for t in x.replace(";", ",").split(",") if t.strip()]
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if n is not None:
        if arr.size == 1:
            arr = np.full(n, float(arr[0]))
        if arr.shape != (n,):
            raise ConfigError(f"{name}: expected {n} entries, got {arr.size}")
    return arr


def _mat(x, n, name="matrix") -> np.ndarray:
    if isinstance(x, str):
        x = [[float(t) for t in row.split(",")] for row in x.split(";")]
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr * np.eye(n)
    if arr.shape != (n, n):
        raise ConfigError(f"{name}: expected {n}x{n}, got shape {arr.shape}")
    return arr


def _norm(W: np.ndarray) -> np.ndarray:
    return np.sqrt((W**2).sum(axis=0))


# ---------------------------------------------------------------- diffusion


class Diffusion:
    """Base class. ``potential`` returns the map a(W) whose Jacobian is the tensor, if any."""

    name = "?"
    layout = "component"
    has_potential = False
    k = 0.0

    def __init__(self, m: int):
        self.m = m

    def tensor(self, W: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def potential(self, W: np.ndarray) -> np.ndarray:
        raise ConfigError(f"diffusion family {self.name!r} has no potential map")


class Constant(Diffusion):
    name = "constant"
    has_potential = True

    def __init__(self, m, matrix=1.0):
        super().__init__(m)
        self.matrix = _mat(matrix, m, "matrix")

    def tensor(self, W):
        return np.broadcast_to(self.matrix.reshape((self.m, self.m) + (1,) * (W.ndim - 1)), (self.m, self.m) + W.shape[1:]).copy()

    def potential(self, W):
        return np.einsum("ij,j...->i...", self.matrix, W)


class SKT(Diffusion):
    """a_i(W) = (d_i + sum_j alpha_ij u_j) u_i, tensor = Jacobian of a."""

    name = "skt"
    has_potential = True

    def __init__(self, m, d=1.0, alpha=0.0):
        super().__init__(m)
        self.d = _vec(d, m, "d")
        self.alpha = _mat(alpha, m, "alpha") if np.ndim(alpha) or isinstance(alpha, str) else np.full((m, m), float(alpha))
        if (self.d <= 0).any() or (self.alpha < 0).any():
            raise ConfigError("skt: need d > 0 and alpha >= 0")
        self.k = 1.0 if np.any(self.alpha) else 0.0

    def tensor(self, W):
        diag = self.d.reshape((-1,) + (1,) * (W.ndim - 1)) + np.einsum("ij,j...->i...", self.alpha, W)
        A = np.einsum("ij,i...->ij...", self.alpha, W)
        idx = np.arange(self.m)
        A[idx, idx] += diag
        return A

    def potential(self, W):
        return (self.d.reshape((-1,) + (1,) * (W.ndim - 1)) + np.einsum("ij,j...->i...", self.alpha, W)) * W


class ScalarWeight(Diffusion):
    """gamma(W) * [a_ij] with gamma = gamma0 + gamma1 |W|**power."""

    name = "scalar_weight"

    def __init__(self, m, matrix=1.0, gamma0=1.0, gamma1=0.0, power=1.0):
        super().__init__(m)
        self.matrix = _mat(matrix, m, "matrix")
        self.gamma0, self.gamma1, self.power = float(gamma0), float(gamma1), float(power)
        if self.gamma0 < 0 or self.gamma1 < 0 or self.gamma0 + self.gamma1 == 0:
            raise ConfigError("scalar_weight: need gamma0, gamma1 >= 0, not both zero")
        self.k = self.power if self.gamma1 > 0 else 0.0

    def gamma(self, W):
        return self.gamma0 + self.gamma1 * _norm(W) ** self.power

    def tensor(self, W):
        return np.einsum("ij,...->ij...", self.matrix, self.gamma(W))


class FactoredRows(Diffusion):
    """Row i is gamma_i(W) * [a_i1(u_1), ..., a_im(u_m)].

    a_ij(t) = a_ij + slope_ij t and gamma_i = delta_i + sum_j weights_ij |u_j|**power.
    """

    name = "factored_rows"

    def __init__(self, m, a=1.0, slope=0.0, delta=1.0, weights=0.0, power=1.0):
        super().__init__(m)
        self.a = _mat(a, m, "a")
        self.slope = _mat(slope, m, "slope") if np.ndim(slope) or isinstance(slope, str) else np.full((m, m), float(slope))
        self.delta = _vec(delta, m, "delta")
        self.weights = _mat(weights, m, "weights") if np.ndim(weights) or isinstance(weights, str) else np.full((m, m), float(weights))
        self.power = float(power)
        if (self.delta <= 0).any() or (self.weights < 0).any():
            raise ConfigError("factored_rows: need delta > 0 and weights >= 0")
        self.k = self.power if np.any(self.weights) else 0.0

    def gamma(self, W):
        """Row weights gamma_i(W), shape (m, ...)."""
        return self.delta.reshape((-1,) + (1,) * (W.ndim - 1)) + np.einsum("ij,j...->i...", self.weights, np.abs(W) ** self.power)

    def entries(self, W):
        """a_ij(u_j), shape (m, m, ...)."""
        return self.a.reshape(self.a.shape + (1,) * (W.ndim - 1)) + np.einsum("ij,j...->ij...", self.slope, W)

    def hat(self, W):
        """Antiderivatives int_0^{u_j} a_ij, shape (m, m, ...)."""
        return np.einsum("ij,j...->ij...", self.a, W) + 0.5 * np.einsum("ij,j...->ij...", self.slope, W**2)

    def tensor(self, W):
        return self.gamma(W)[:, None] * self.entries(W)


class DiagonalPowerLaw(Diffusion):
    """a_i(u) = |u|**(m_i - 1) u_i."""

    name = "diagonal_power"
    has_potential = True

    def __init__(self, m, exponents=2.0):
        super().__init__(m)
        self.exponents = _vec(exponents, m, "exponents")
        if (self.exponents < 1).any():
            raise ConfigError("diagonal_power: exponents must be >= 1")
        self.k = float(self.exponents[0] - 1) if np.all(self.exponents == self.exponents[0]) else float(self.exponents.min() - 1)

    def _e(self, W):
        return self.exponents.reshape((-1,) + (1,) * (W.ndim - 1))

    def potential(self, W):
        r = np.maximum(_norm(W), _TINY)
        return r ** (self._e(W) - 1) * W

    def tensor(self, W):
        if self.m == 1:
            e = self.exponents[0]
            return (e * np.abs(W) ** (e - 1))[None]
        r0 = _norm(W)
        r = np.maximum(r0, _TINY)
        e = self._e(W)
        outer = np.einsum("i...,j...->ij...", W, W)
        with np.errstate(over="ignore"):
            coef = np.where(r0 > 0, (e - 1) * r ** (e - 3), 0.0)
        A = coef[:, None] * outer
        idx = np.arange(self.m)
        A[idx, idx] += r ** (e - 1)
        return A


class DiagonalSeparate(Diffusion):
    """a_i(u) = |u_i|**(m_i - 1) u_i, acting on each component separately."""

    name = "diagonal_separate"
    has_potential = True

    def __init__(self, m, exponents=2.0):
        super().__init__(m)
        self.exponents = _vec(exponents, m, "exponents")
        if (self.exponents < 1).any():
            raise ConfigError("diagonal_separate: exponents must be >= 1")
        self.k = float(self.exponents.min() - 1)

    def potential(self, W):
        e = self.exponents.reshape((-1,) + (1,) * (W.ndim - 1))
        return np.abs(W) ** (e - 1) * W

    def tensor(self, W):
        e = self.exponents.reshape((-1,) + (1,) * (W.ndim - 1))
        A = np.zeros((self.m, self.m) + W.shape[1:])
        idx = np.arange(self.m)
        A[idx, idx] = e * np.abs(W) ** (e - 1)
        return A


class KShifted(Diffusion):
    """a_i(u) = (K + |u|^2)**((m0 - 1)/2) u_i."""

    name = "kshifted"
    has_potential = True

    def __init__(self, m, K=1.0, m0=3.0):
        super().__init__(m)
        self.K, self.m0 = float(K), float(m0)
        if self.K <= 0 or self.m0 < 1:
            raise ConfigError("kshifted: need K > 0 and m0 >= 1")
        self.k = self.m0 - 1

    def potential(self, W):
        return (self.K + (W**2).sum(axis=0)) ** ((self.m0 - 1) / 2) * W

    def tensor(self, W):
        s = self.K + (W**2).sum(axis=0)
        A = (self.m0 - 1) * s ** ((self.m0 - 3) / 2) * np.einsum("i...,j...->ij...", W, W)
        idx = np.arange(self.m)
        A[idx, idx] += s ** ((self.m0 - 1) / 2)
        return A


class JSTensor(Diffusion):
    """theta delta_ij delta_ab + A_ia(u) A_jb(u) in three space dimensions."""

    name = "js"
    layout = "full"

    def __init__(self, m, kappa=1.0, theta=0.1, variant="exact"):
        if m != 3:
            raise ConfigError(f"js: needs m = 3 components, got {m}")
        super().__init__(m)
        self.kappa, self.theta, self.variant = float(kappa), float(theta), str(variant)
        exact.check_js_parameters(self.kappa, self.theta)
        if self.variant not in exact.JS_VARIANTS:
            raise ConfigError(f"js: unknown variant {self.variant!r}")

    def tensor(self, W):
        return exact.js_tensor_field(W, self.kappa, self.theta, self.variant)


class Triangular(Diffusion):
    """Components u_1..u_n then v.

    Row i < n: d/du_i a_i(u_i) on the diagonal and c_i(v) in the v column.
    Row n: d(v) on the diagonal only. Here a_i(s) = base_i s + |s|**(q_i - 1) s,
    c_i(v) = c0_i + c1_i v, d(v) = d0 + d1 v**2.
    """

    name = "triangular"
    has_potential = False

    def __init__(self, m, base=1.0, q=1.0, c0=0.0, c1=0.0, d0=1.0, d1=0.0):
        if m < 2:
            raise ConfigError("triangular: need m >= 2")
        super().__init__(m)
        n = m - 1
        self.base, self.q = _vec(base, n, "base"), _vec(q, n, "q")
        self.c0, self.c1 = _vec(c0, n, "c0"), _vec(c1, n, "c1")
        self.d0, self.d1 = float(d0), float(d1)
        if (self.base < 0).any() or (self.q < 1).any() or self.d0 <= 0 or self.d1 < 0:
            raise ConfigError("triangular: need base >= 0, q >= 1, d0 > 0, d1 >= 0")
        self.k = float(self.q.min() - 1)

    def tensor(self, W):
        n = self.m - 1
        u, v = W[:n], W[n]
        A = np.zeros((self.m, self.m) + W.shape[1:])
        shape = (-1,) + (1,) * (W.ndim - 1)
        idx = np.arange(n)
        A[idx, idx] = self.base.reshape(shape) + self.q.reshape(shape) * np.abs(u) ** (self.q.reshape(shape) - 1)
        A[idx, n] = self.c0.reshape(shape) + self.c1.reshape(shape) * v
        A[n, n] = self.d0 + self.d1 * v**2
        return A


DIFFUSION_FAMILIES: dict[str, type[Diffusion]] = {
    cls.name: cls
    for cls in (Constant, SKT, ScalarWeight, FactoredRows, DiagonalPowerLaw, DiagonalSeparate, KShifted, JSTensor, Triangular)
}


# ---------------------------------------------------------------- reactions


class Reaction:
    name = "?"
    needs_gradient = False
    has_potential = False

    def __init__(self, m: int):
        self.m = m

    def __call__(self, W, DW=None):
        raise NotImplementedError

    def potential(self, W):
        raise ConfigError(f"reaction family {self.name!r} declares no potential B")


class NoReaction(Reaction):
    name = "none"

    def __call__(self, W, DW=None):
        return np.zeros_like(W)


class LinearMatrix(Reaction):
    """G(W) W with G = [[b1 + c1 u, k1 v + l1], [k2 u + l2, b2 + c2 v]]."""

    name = "linear_matrix"

    def __init__(self, m, b=0.0, c=0.0, k=0.0, l=0.0):
        if m != 2:
            raise ConfigError("linear_matrix: defined for m = 2")
        super().__init__(m)
        self.b, self.c, self.k, self.l = (_vec(x, 2, n) for x, n in ((b, "b"), (c, "c"), (k, "k"), (l, "l")))

    def matrix(self, W):
        u, v = W[0], W[1]
        b, c, k, l = self.b, self.c, self.k, self.l
        return np.array([[b[0] + c[0] * u, k[0] * v + l[0]], [k[1] * u + l[1], b[1] + c[1] * v]])

    def __call__(self, W, DW=None):
        return np.einsum("ij...,j...->i...", self.matrix(W), W)


class PowerLaw(Reaction):
    """coef * |W|**power * W; negative coef is a sink."""

    name = "power"

    def __init__(self, m, coef=-1.0, power=1.0):
        super().__init__(m)
        self.coef, self.power = float(coef), float(power)
        if self.power < 0:
            raise ConfigError("power: exponent must be >= 0")

    def __call__(self, W, DW=None):
        return self.coef * _norm(W) ** self.power * W


class PotentialPair(Reaction):
    """b(W) = coef |W|**(q - 1) W with declared potential B(W) = B_coef |W|**B_power."""

    name = "potential_pair"
    has_potential = True

    def __init__(self, m, coef=1.0, q=3.0, B_coef=0.0, B_power=2.0):
        super().__init__(m)
        self.coef, self.q = float(coef), float(q)
        self.B_coef, self.B_power = float(B_coef), float(B_power)
        if self.q < 1:
            raise ConfigError("potential_pair: q must be >= 1")

    def __call__(self, W, DW=None):
        return self.coef * np.maximum(_norm(W), _TINY) ** (self.q - 1) * W

    def potential(self, W):
        return self.B_coef * _norm(W) ** self.B_power


class GradientReaction(Reaction):
    """(W/|W|) |DW|**q - f_coef |W|**f_power W, with W/|W| taken as 0 at W = 0."""

    name = "gradient"
    needs_gradient = True

    def __init__(self, m, q=1.0, f_coef=1.0, f_power=0.0):
        super().__init__(m)
        self.q, self.f_coef, self.f_power = float(q), float(f_coef), float(f_power)

    def __call__(self, W, DW=None):
        if DW is None:
            raise ValueError("gradient reaction needs DW")
        r = _norm(W)
        unit = np.divide(W, r, out=np.zeros_like(W), where=r > 0)
        g = np.sqrt((DW**2).sum(axis=(0, 1))) ** self.q
        return unit * g - self.f_coef * r**self.f_power * W


class Custom(Reaction):
    name = "custom"

    def __init__(self, m, fn: Callable = None, B: Callable | None = None, needs_gradient=False):
        super().__init__(m)
        if fn is None:
            raise ConfigError("custom reaction needs a callable")
        self.fn, self.B = fn, B
        self.needs_gradient = bool(needs_gradient)
        self.has_potential = B is not None

    def __call__(self, W, DW=None):
        return np.asarray(self.fn(W, DW) if self.needs_gradient else self.fn(W), dtype=float)

    def potential(self, W):
        if self.B is None:
            return super().potential(W)
        return self.B(W)


REACTION_FAMILIES: dict[str, type[Reaction]] = {
    cls.name: cls for cls in (NoReaction, LinearMatrix, PowerLaw, PotentialPair, GradientReaction, Custom)
}


# ---------------------------------------------------------------- model


@dataclass
class DiffusionTensor:
    layout: str
    values: np.ndarray


@dataclass
class ModelSpec:
    m: int
    diffusion: Diffusion
    reaction: Reaction
    k: float
    ell: float = 1.0
    config: dict = field(default_factory=dict)

    @property
    def layout(self) -> str:
        return self.diffusion.layout

    def tensor_field(self, W: np.ndarray) -> np.ndarray:
        return self.diffusion.tensor(W)

    def reaction_field(self, W: np.ndarray, DW: np.ndarray | None = None) -> np.ndarray:
        return self.reaction(W, DW)

    def weight(self, W: np.ndarray) -> np.ndarray:
        """lambda(W) = ell * (1 + |W|**k)."""
        return self.ell * (1.0 + _norm(W) ** self.k)


def _split(cfg: dict) -> tuple[str, dict]:
    cfg = dict(cfg)
    try:
        name = str(cfg.pop("family")).strip().lower()
    except KeyError:
        raise ConfigError("model section needs a 'family'") from None
    return name, cfg


def build_model(config: dict) -> ModelSpec:
    """Build a validated model from ``{"m", "diffusion": {...}, "reaction": {...}, "k", "ell"}``.

    Family sub-dicts carry ``family`` plus keyword parameters; numbers may be
    given as strings ("1,2" for vectors, "1,0;0,1" for matrices).
    """
    try:
        m = int(config.get("m", 1))
    except (TypeError, ValueError):
        raise ConfigError(f"m must be an integer, got {config.get('m')!r}") from None
    if m < 1:
        raise ConfigError(f"m must be >= 1, got {m}")
    dname, dparams = _split(config.get("diffusion", {"family": "constant"}))
    rname, rparams = _split(config.get("reaction", {"family": "none"}))
    if dname not in DIFFUSION_FAMILIES:
        raise ConfigError(f"unknown diffusion family {dname!r}")
    if rname not in REACTION_FAMILIES:
        raise ConfigError(f"unknown reaction family {rname!r}")
    try:
        diff = DIFFUSION_FAMILIES[dname](m, **dparams)
        reac = REACTION_FAMILIES[rname](m, **rparams)
    except TypeError as exc:
        raise ConfigError(f"bad parameters: {exc}") from None
    k = diff.k
    if config.get("k") is not None:
        declared = float(config["k"])
        if declared < 0:
            raise ConfigError(f"k must be >= 0, got {declared}")
        if not np.isclose(declared, k):
            raise ConfigError(f"declared k={declared} does not match family {dname!r} (k={k})")
        k = declared
    ell = float(config.get("ell", 1.0))
    if ell <= 0:
        raise ConfigError("ell must be positive")
    return ModelSpec(m, diff, reac, float(k), ell, dict(config))


def eval_diffusion(model: ModelSpec, W) -> DiffusionTensor:
    W = np.asarray(W, dtype=float)
    if not np.isfinite(W).all():
        raise ValueError("W must be finite")
    return DiffusionTensor(model.layout, model.tensor_field(W))


def eval_reaction(model: ModelSpec, W, DW=None) -> np.ndarray:
    W = np.asarray(W, dtype=float)
    if model.reaction.needs_gradient and DW is None:
        raise ValueError(f"reaction {model.reaction.name!r} needs a gradient")
    if DW is not None:
        DW = np.asarray(DW, dtype=float)
        if DW.ndim == 1:
            DW = DW[:, None]
    return model.reaction_field(W, DW)


def quadratic_form(model: ModelSpec, W, xi) -> float:
    """<A(W) xi, xi> with xi of shape (m,) or (m, d)."""
    W = np.asarray(W, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if xi.ndim == 1:
        xi = xi[:, None]
    A = model.tensor_field(W)
    if model.layout == "component":
        return float(np.einsum("ij,ja,ia->", A, xi, xi))
    return float(np.einsum("iajb,jb,ia->", A, xi, xi))


def ellipticity_estimate(model: ModelSpec, samples) -> float:
    """min over (W, xi) of <A(W) xi, xi> / ((1 + |W|**k) |xi|^2)."""
    samples = list(samples)
    if not samples:
        raise ValueError("ellipticity_estimate needs at least one sample")
    best = np.inf
    for W, xi in samples:
        W = np.asarray(W, dtype=float)
        xi = np.asarray(xi, dtype=float)
        n2 = float((xi**2).sum())
        if n2 == 0:
            raise ValueError("xi must be nonzero")
        q = quadratic_form(model, W, xi)
        best = min(best, q / ((1.0 + float(np.linalg.norm(W)) ** model.k) * n2))
    return float(best)
