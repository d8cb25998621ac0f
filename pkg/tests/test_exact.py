import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crossdiff import exact
from crossdiff.errors import ConfigError
from crossdiff.mesh import build_grid
from crossdiff.models import build_model

KAPPA, THETA = 1.0, 0.1


def _js_model(variant="exact"):
    return build_model({"m": 3, "diffusion": {"family": "js", "kappa": KAPPA, "theta": THETA, "variant": variant}})


def _cube(n):
    return build_grid([2, 2, 2], [n, n, n], "neumann0", origin=[-1, -1, -1])


def test_js_state_origin_is_zero():
    for t in (0.0, 0.5, 0.99):
        u, Du, ut = exact.js_state(np.zeros(3), t, KAPPA)
        assert np.array_equal(u, np.zeros(3))
        assert np.allclose(Du, np.eye(3) / np.sqrt(KAPPA * (1 - t)), rtol=1e-15)


def test_js_state_singular_set():
    with pytest.raises(ValueError):
        exact.js_state(np.zeros(3), 1.0, KAPPA)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3), st.floats(0, 0.999))
def test_js_state_odd_radial_bounded(x, t):
    x = np.array(x)
    u, _, _ = exact.js_state(x, t, KAPPA)
    um, _, _ = exact.js_state(-x, t, KAPPA)
    assert np.array_equal(um, -u)
    assert np.linalg.norm(u) < 1
    assert np.linalg.norm(np.cross(u, x)) <= 1e-15 * max(1.0, np.linalg.norm(x))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3), st.floats(0, 0.9))
def test_js_derivatives_match_finite_differences(x, t):
    x = np.array(x)
    _, Du, ut = exact.js_state(x, t, KAPPA)
    h = 1e-6
    fd = np.zeros((3, 3))
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        fd[:, j] = (exact.js_state(x + e, t, KAPPA)[0] - exact.js_state(x - e, t, KAPPA)[0]) / (2 * h)
    assert np.allclose(Du, fd, atol=1e-8)
    fdt = (exact.js_state(x, t + h, KAPPA)[0] - exact.js_state(x, t - h, KAPPA)[0]) / (2 * h)
    assert np.allclose(ut, fdt, atol=1e-8)


def test_js_gradient_grows_while_state_bounded():
    g = _cube(16)
    X = np.stack(g.mesh())
    sups_u, sups_Du = [], []
    for t in (0.5, 0.9, 0.99, 0.999):
        u, Du, _ = exact.js_state(X, t, KAPPA)
        sups_u.append(np.sqrt((u**2).sum(axis=0)).max())
        sups_Du.append(np.sqrt((Du**2).sum(axis=(0, 1))).max())
    assert max(sups_u) <= 1
    assert np.all(np.diff(sups_Du) > 0)


@pytest.mark.parametrize("variant", exact.JS_VARIANTS)
def test_js_tensor_at_origin(variant):
    N = 3
    T = exact.js_tensor(np.zeros(3), KAPPA, THETA, variant).values
    d = (N - 1 - THETA) / np.sqrt(N * (N - 1 - THETA))
    expected = THETA * np.einsum("ij,ab->iajb", np.eye(3), np.eye(3)) + d**2 * np.einsum("ia,jb->iajb", np.eye(3), np.eye(3))
    assert np.allclose(T, expected, atol=1e-14)


def test_js_quadratic_form_lower_bound():
    rng = np.random.default_rng(0)
    for variant in exact.JS_VARIANTS:
        U = rng.uniform(-1, 1, (3, 10_000))
        # keep |u| <= 0.6, inside the range of both coefficient sets
        U *= 0.6 / np.maximum(1.0, np.sqrt((U**2).sum(axis=0)))
        Xi = rng.standard_normal((3, 3, 10_000))
        T = exact.js_tensor_field(U, KAPPA, THETA, variant)
        q = np.einsum("iajbn,jbn,ian->n", T, Xi, Xi)
        assert np.all(q >= THETA * (Xi**2).sum(axis=(0, 1)) * (1 - 1e-12))


def test_js_parameter_checks():
    exact.check_js_parameters(1.0, 0.1)
    with pytest.raises(ConfigError):
        exact.check_js_parameters(4.0, 0.1)
    with pytest.raises(ConfigError):
        exact.check_js_parameters(1.0, 1 - 1.0 / 4)
    with pytest.raises(ValueError):
        exact.js_coefficients(np.array([1.0]), KAPPA, THETA, "exact")


def test_js_small_y_branch_is_continuous():
    y = np.array([0.1 - 1e-12, 0.1 + 1e-12])
    _, b = exact.js_coefficients(y, KAPPA, THETA)
    assert abs(b[0] - b[1]) < 1e-8


def test_js_exact_residual_second_order():
    grids = [_cube(n) for n in (8, 16, 32)]
    rep = exact.evolution_residual(_js_model(), exact.js_solution(KAPPA), grids, [0.5])
    assert rep.orders.min() >= 1.8
    assert not rep.fd_time


def test_js_printed_tensor_leaves_residual():
    grids = [_cube(n) for n in (8, 16, 32)]
    exact_rep = exact.evolution_residual(_js_model(), exact.js_solution(KAPPA), grids, [0.5])
    printed = exact.evolution_residual(_js_model("printed"), exact.js_solution(KAPPA), grids, [0.5])
    # the printed coefficients do not make u an exact solution: refinement stalls
    assert printed.orders[-1, 0] < 0.5
    assert printed.norms[-1, 0] > 100 * exact_rep.norms[-1, 0]


def test_affine_steady_state_zero_residual():
    g = build_grid([1, 2], [6, 7], "neumann0")
    model = build_model({"m": 2, "diffusion": {"family": "constant", "matrix": "2,0.3;0.1,1"}})
    sol = exact.from_function("affine", lambda X, t: np.stack([1 + 2 * X[0] - X[1], 3 * X[1]]), lambda X, t: np.zeros((2, *X[0].shape)))
    rep = exact.evolution_residual(model, sol, g, [0.0, 1.0])
    assert rep.norms.max() <= 1e-12


def test_residual_window_enforced():
    with pytest.raises(ValueError):
        exact.evolution_residual(_js_model(), exact.js_solution(KAPPA), _cube(4), [1.0])


ALPHA, C1, EPS0 = 1.0, 1.0, 10.0


def _separable_model():
    return build_model(
        {
            "m": 1,
            "diffusion": {"family": "scalar_weight", "gamma0": 0.0, "gamma1": 1.0, "power": ALPHA},
            "reaction": {"family": "power", "coef": EPS0, "power": ALPHA},
        }
    )


@pytest.fixture(scope="module")
def profiles():
    return [exact.stationary_profile(ALPHA, C1, EPS0, 1.0, n, amplitude=0.2) for n in (32, 64)]


def test_stationary_profile_nontrivial(profiles):
    for p in profiles:
        assert p.residual < 1e-10
        assert np.abs(p.values).max() > 0.1


def test_stationary_profile_trivial_start_rejected():
    # below the nonlinear principal eigenvalue there is no nonzero profile
    with pytest.raises(ValueError):
        exact.stationary_profile(ALPHA, C1, 2.0, 1.0, 32)


def test_separable_ode_law_tracks_stationary_residual(profiles):
    model = _separable_model()
    times = [0.0, 0.05, 0.2]
    for p in profiles:
        sol = exact.separable_solution(p, "ode")
        rep = exact.evolution_residual(model, sol, p.grid, times)
        bound = 10 * p.residual * (1 + np.array(times)) ** (ALPHA + 1)
        c = exact.separable_amplitude(np.array(times), ALPHA, C1, "ode")[0]
        assert np.all(rep.norms[0] <= bound * c ** (ALPHA + 1) + 1e-13)


def test_separable_printed_law_is_not_a_solution(profiles):
    model = _separable_model()
    for p in profiles:
        rep = exact.evolution_residual(model, exact.separable_solution(p, "printed"), p.grid, [0.05, 0.2])
        assert rep.norms.min() > 1e4 * p.residual


def test_separable_amplitude_laws():
    c, dc = exact.separable_amplitude(np.array([0.0, 0.3]), ALPHA, C1, "ode")
    assert c[0] == 1.0
    assert np.allclose(dc, C1 * c ** (ALPHA + 1))
    with pytest.raises(ValueError):
        exact.separable_amplitude(np.array([2.0]), ALPHA, C1, "ode")
    with pytest.raises(ValueError):
        exact.separable_amplitude(0.1, ALPHA, C1, "other")
