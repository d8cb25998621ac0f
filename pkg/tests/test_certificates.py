import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crossdiff import certificates as cert
from crossdiff.errors import ConfigError
from crossdiff.functionals import levine_psi
from crossdiff.mesh import FieldSet, build_grid, field_from_function
from crossdiff.models import build_model

K_POROUS = np.sqrt(1.5)


def _sine(M, n=64):
    g = build_grid([1], [n], "dirichlet0")
    return field_from_function(g, lambda x: M * np.sin(np.pi * x))


def _porous(M, samples=20_000):
    return cert.scalar_certificate(lambda u: u**2, lambda u: u**3, lambda u: 0.8 * u**5, K_POROUS, _sine(M), samples=samples)


def _power_model(m, m0):
    return build_model({"m": m, "diffusion": {"family": "diagonal_power", "exponents": float(m0)}})


# ---------------------------------------------------------------- horizon


def test_horizon_examples():
    assert cert.blowup_horizon(1, 1, 2) == 1
    assert cert.blowup_horizon(2, 0.5, 4 / 3) == pytest.approx(12)


@pytest.mark.parametrize("args", [(1, 1, 1), (0, 1, 2), (1, -1, 2), (1, 1, 0.5)])
def test_horizon_guards(args):
    with pytest.raises(ValueError):
        cert.blowup_horizon(*args)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.01, 10), st.floats(1.01, 5))
def test_horizon_decreases_in_psi(phi, psi, dpsi, c):
    assert cert.blowup_horizon(phi, psi + dpsi, c) < cert.blowup_horizon(phi, psi, c)


# ---------------------------------------------------------------- scalar


def test_porous_pair_certified():
    rep = _porous(60.0)
    assert rep.verdict == cert.CERTIFIED
    assert rep.c == pytest.approx(4 / 3)
    assert all(ch.passed for ch in rep.checks)
    assert rep.horizon == pytest.approx(rep.phi0 / (rep.c - 1) / rep.psi0)
    text = rep.to_text()
    assert "verdict = BlowupCertified" in text


def test_porous_small_data_insufficient():
    rep = _porous(0.5)
    assert rep.verdict == cert.INSUFFICIENT
    assert rep.psi0 <= 0
    assert rep.horizon is None


def test_scalar_k_range():
    for k in (0.0, np.sqrt(2), 2.0):
        with pytest.raises(ConfigError):
            cert.scalar_certificate(lambda u: u**2, lambda u: u**3, lambda u: 0.8 * u**5, k, _sine(1.0))


def test_scalar_wrong_potential_fails():
    rep = cert.scalar_certificate(lambda u: u**2, lambda u: u**3, lambda u: 0.5 * u**5, K_POROUS, _sine(60.0), samples=5000)
    assert rep.verdict == cert.FAILED
    assert "B' = 2 gamma a' b" in rep.failed


def test_power_pair_potential_matches_porous():
    B = cert.power_pair_potential(2, 3)
    u = np.linspace(0, 5, 11)
    assert np.allclose(B(u), 0.8 * u**5)


# ---------------------------------------------------------------- kappa


@pytest.mark.parametrize("m0", [2, 3, 5, 8])
@pytest.mark.parametrize("box", [1e-3, 1.0, 1e3])
def test_kappa_scalar_closed_form(m0, box):
    model = _power_model(1, m0)
    a, jac = cert.model_maps(model)
    U, Xi = cert.kappa_pairs(a, 1, 2000, box=box, seed=m0, nonnegative=True, jac=jac)
    assert cert.kappa_infimum(a, (U, Xi), jac) == pytest.approx((m0 + 1) / (2 * m0), rel=1e-9)


@pytest.mark.parametrize("m,m0", [(2, 3), (3, 4), (4, 5)])
def test_kappa_aligned_value_dual_route(m, m0):
    # analytic: sup over xi is at xi = S^-1 a, where it equals (m0+1)/(2 m0) for every u
    model = _power_model(m, m0)
    a, jac = cert.model_maps(model)
    U = cert.kappa_samples(m, 500, 1.0, seed=1, exclude_radius=1e-3)
    aligned = cert.kappa_ratio(a, U, cert.aligned_directions(a, U, jac), jac)
    assert np.allclose(aligned, (m0 + 1) / (2 * m0), rtol=1e-9)
    rng = np.random.default_rng(2)
    for _ in range(5):
        rand = cert.kappa_ratio(a, U, rng.standard_normal(U.shape), jac)
        assert np.all(rand <= aligned * (1 + 1e-12))


def test_kappa_amplitude_invariance():
    model = _power_model(3, 4)
    a, jac = cert.model_maps(model)
    U = cert.kappa_samples(3, 200, 1.0, seed=5, exclude_radius=1e-2)
    Xi = np.random.default_rng(6).standard_normal(U.shape)
    base = cert.kappa_ratio(a, U, Xi, jac)
    for s in (1e-3, 1e-1, 10.0, 1e3):
        assert np.allclose(cert.kappa_ratio(a, s * U, Xi, jac), base, rtol=1e-9, atol=0)


def test_kappa_identity_map_is_one():
    a = lambda U: U
    jac = lambda U: np.broadcast_to(np.eye(U.shape[0])[:, :, None], (U.shape[0], U.shape[0], U.shape[1]))
    U = cert.kappa_samples(3, 300, 2.0, seed=0, exclude_radius=1e-6)
    Xi = cert.aligned_directions(a, U, jac)
    # Cauchy-Schwarz equality case: <u, xi>^2 / (|u|^2 |xi|^2) = 1 at xi = u
    assert cert.kappa_infimum(a, (U, Xi), jac) == pytest.approx(1.0, rel=1e-12)


def test_kappa_linear_spd_alignment():
    M = np.array([[2.0, 0.5, 0.0], [0.5, 1.0, 0.2], [0.0, 0.2, 3.0]])
    a = lambda U: M @ U
    jac = lambda U: np.broadcast_to(M[:, :, None], (3, 3, U.shape[1]))
    U = cert.kappa_samples(3, 200, 1.0, seed=3, exclude_radius=1e-3)
    aligned = cert.kappa_ratio(a, U, cert.aligned_directions(a, U, jac), jac)
    Xi = np.random.default_rng(4).standard_normal((3, 200 * 20))
    rand = cert.kappa_ratio(a, np.tile(U[:, :200], 20), Xi, jac)
    assert rand.max() <= aligned.max() * (1 + 1e-12)
    # a = M u, a_u = M: the aligned direction is u itself, giving exactly 1
    assert np.allclose(aligned, 1.0, rtol=1e-12)


def test_kappa_kshifted_closed_form():
    K, m0 = 2.0, 3.0
    model = build_model({"m": 2, "diffusion": {"family": "kshifted", "K": K, "m0": m0}})
    a, jac = cert.model_maps(model)
    rng = np.random.default_rng(7)
    U = rng.uniform(-1, 1, (2, 400))
    Xi = rng.standard_normal((2, 400))
    sampled = cert.kappa_ratio(a, U, Xi, jac)
    s = K + (U**2).sum(axis=0)
    ux = (U * Xi).sum(axis=0)
    x2 = (Xi**2).sum(axis=0)
    phi = (s ** ((m0 + 1) / 2) - K ** ((m0 + 1) / 2)) / (m0 + 1)
    closed = s ** (m0 - 1) * ux**2 / (2 * s ** ((m0 - 3) / 2) * (s * x2 + (m0 - 1) * ux**2) * phi)
    assert np.allclose(sampled, closed, rtol=1e-6)
    # dropping the K^((m0+1)/2) term from phi gives the reduced form, which sits below
    reduced = (m0 + 1) * ux**2 / (2 * (s * x2 + (m0 - 1) * ux**2))
    assert np.all(reduced <= sampled * (1 + 1e-12))


def test_kappa_ratio_degenerate_samples():
    model = _power_model(2, 3)
    a, jac = cert.model_maps(model)
    r = cert.kappa_ratio(a, np.zeros((2, 1)), np.ones((2, 1)), jac)
    assert np.isnan(r[0])
    with pytest.raises(ValueError):
        cert.kappa_infimum(a, (np.zeros((2, 2)), np.ones((2, 2))), jac)
    with pytest.raises(ValueError):
        cert.kappa_infimum(a, [], jac)


def test_kappa_infimum_accepts_pair_list():
    model = _power_model(2, 3)
    a, jac = cert.model_maps(model)
    pairs = [(np.array([1.0, 0.5]), np.array([0.3, -1.0])), (np.array([0.2, 0.1]), np.array([1.0, 1.0]))]
    U = np.stack([p[0] for p in pairs], axis=1)
    Xi = np.stack([p[1] for p in pairs], axis=1)
    assert cert.kappa_infimum(a, pairs, jac) == cert.kappa_infimum(a, (U, Xi), jac)


def test_entrywise_diagnostic_below_quadratic_form_value():
    U = cert.kappa_samples(4, 4000, 1.0, seed=0, nonnegative=True, exclude_radius=1e-3)
    assert cert.entrywise_kappa([5.0] * 4, U) == pytest.approx(0.1875, rel=1e-9)
    model = _power_model(4, 5)
    a, jac = cert.model_maps(model)
    Xi = cert.aligned_directions(a, U, jac)
    assert cert.kappa_infimum(a, (U, Xi), jac) == pytest.approx(0.6, rel=1e-9)


# ---------------------------------------------------------------- system


def test_system_kappa_range():
    model = _power_model(2, 3)
    a, jac = cert.model_maps(model)
    g = build_grid([1], [8], "dirichlet0")
    u0 = FieldSet(g, np.ones((2, 8)))
    for kappa in (0.5, 0.7, 0.0):
        with pytest.raises(ConfigError):
            cert.system_certificate(a, a, lambda U: np.zeros(U.shape[1:]), kappa, u0, jac)


def test_system_identity_map_fails_kappa():
    g = build_grid([1, 1], [8, 8], "dirichlet0")
    u0 = field_from_function(g, lambda x, y: [np.sin(np.pi * x), np.sin(np.pi * y)])
    a = lambda U: U
    jac = lambda U: np.broadcast_to(np.eye(2)[:, :, None], (2, 2, U.shape[1]))
    b = lambda U: U
    B = lambda U: 0.5 * (U**2).sum(axis=0)
    rep = cert.system_certificate(a, b, B, 0.45, u0, jac, samples=2000)
    assert rep.verdict == cert.FAILED
    assert "kappa condition" in rep.failed
    kappa_check = next(ch for ch in rep.checks if ch.name == "kappa condition")
    assert kappa_check.residual == pytest.approx(1.0, rel=1e-12)


def test_system_m1_shares_pointwise_quantity_with_scalar():
    # for m = 1 the kappa ratio is a^2 / (2 a' A), half the scalar k-ratio a^2 / (a' A)
    model = _power_model(1, 2)
    a, jac = cert.model_maps(model)
    U = np.linspace(0.01, 10, 500)[None]
    khat = cert.kappa_ratio(a, U, np.ones_like(U), jac)
    u = U[0]
    k2 = u**4 / (2 * u * u**3 / 3)
    assert np.allclose(khat, k2 / 2, rtol=1e-12)


def test_system_m1_values_match_scalar():
    u0 = _sine(60.0)
    model = _power_model(1, 2)
    a, jac = cert.model_maps(model)
    B = lambda U: 0.8 * np.abs(U[0]) ** 5
    b = lambda U: U**3
    sysrep = cert.system_certificate(a, b, B, 0.45, u0, jac, samples=5000, nonnegative=True)
    scal = _porous(60.0, samples=5000)
    assert sysrep.phi0 == pytest.approx(scal.phi0, rel=1e-12)
    assert sysrep.psi0 == pytest.approx(scal.psi0, rel=1e-10)
    # the remaining pointwise conditions agree; only the kappa condition separates the routes
    assert sysrep.failed == ["kappa condition"]
    matched = cert.blowup_horizon(sysrep.phi0, sysrep.psi0, scal.c)
    assert matched == pytest.approx(scal.horizon, rel=1e-10)


def test_system_conditional_flag():
    model = _power_model(2, 3)
    a, jac = cert.model_maps(model)
    g = build_grid([1], [8], "dirichlet0")
    u0 = FieldSet(g, np.ones((2, 8)))
    rep = cert.system_certificate(a, a, lambda U: np.zeros(U.shape[1:]), 0.4, u0, jac, samples=200, exclude_radius=0.1)
    assert rep.conditional
    assert "conditional" in rep.to_text()


# ---------------------------------------------------------------- convection


A2 = lambda U: U**2
AP2 = lambda U: 2 * U


def _conv_pair(gamma, q=7.0):
    b = lambda U: U**q
    B = lambda U: (2 * gamma * 2 / (2 + q)) * (np.abs(U) ** (2 + q)).sum(axis=0)
    return b, B


def test_convection_zero_vector_reduces():
    gamma = 1.2
    b = lambda U: U**3
    B = lambda U: gamma * 0.8 * (U**5).sum(axis=0)
    u0 = _sine(60.0)
    rep = cert.convection_certificate(A2, b, B, [0.0], gamma, K_POROUS, u0, a_prime=AP2, samples=5000)
    assert rep.verdict == cert.CERTIFIED
    psi = levine_psi(u0, A2, lambda U: B(U), gamma=gamma)
    assert rep.psi0 == pytest.approx(psi, rel=1e-12)


def test_convection_gamma_guard():
    b, B = _conv_pair(2.0)
    with pytest.raises(ConfigError):
        cert.convection_certificate(A2, b, B, [0.0], 1.0, K_POROUS, _sine(1.0))


def test_convection_orthogonality_violation_named():
    b, B = _conv_pair(2.0)
    rep = cert.convection_certificate(A2, b, B, [1.0], 2.0, K_POROUS, _sine(3.0), a_prime=AP2, samples=2000)
    assert rep.verdict == cert.FAILED
    assert "orthogonality" in rep.failed
    check = next(ch for ch in rep.checks if ch.name == "orthogonality")
    assert check.worst is not None and check.residual > 0


def test_convection_demands_stronger_data():
    gamma = 2.0
    b, B = _conv_pair(gamma)
    g = build_grid([1], [64], "dirichlet0")
    base = np.sin(np.pi * g.centers(0))

    def psi(M, weight):
        return levine_psi(FieldSet(g, M * base), A2, B, gamma=weight)

    def threshold(weight):
        lo, hi = 1e-2, 1e2
        for _ in range(80):
            mid = np.sqrt(lo * hi)
            lo, hi = (mid, hi) if psi(mid, weight) <= 0 else (lo, mid)
        return hi

    t1, t2 = threshold(1.0), threshold(gamma)
    assert t1 < t2
    M = np.sqrt(t1 * t2)
    assert psi(M, 1.0) > 0
    rep = cert.convection_certificate(A2, b, B, [0.0], gamma, K_POROUS, FieldSet(g, M * base), a_prime=AP2, samples=5000)
    assert rep.verdict == cert.INSUFFICIENT


# ---------------------------------------------------------------- falsifier


@pytest.fixture(scope="module")
def small_fit():
    return cert.inequality_falsifier("intineqnk", 0.0, [0.1, 1.0, 10.0], 2, trials=60, seed=3, ascent_iters=10)


def test_falsifier_constants_bounded_below_and_monotone(small_fit):
    C = [small_fit.C[e] for e in small_fit.eps]
    assert min(C) >= 1.0
    assert all(C[i] >= C[i + 1] for i in range(len(C) - 1))


def test_falsifier_counterexample_contract(small_fit):
    assert small_fit.violations >= 0
    if small_fit.counterexample is not None:
        W = small_fit.counterexample
        L, G, R = cert.inequality_terms("intineqnk", W.values[0], W.grid, 0.0)
        assert any(L - (e * G + small_fit.C[e] * R) > cert.VIOLATION_MARGIN * abs(e * G + small_fit.C[e] * R) for e in small_fit.eps)


def test_zero_field_never_violates():
    g = build_grid([1, 1], [8, 8])
    for ineq in cert.INEQUALITIES:
        L, G, R = cert.inequality_terms(ineq, np.zeros(g.shape), g, 1.0)
        assert L == 0.0 and G == 0.0 and R == 0.0


def test_constant_field_forces_unit_constant():
    g = build_grid([1, 1], [8, 8])
    for c in (0.5, 2.0):
        L, G, R = cert.inequality_terms("intineqnk", np.full(g.shape, c), g, 1.0)
        assert G == 0.0
        assert L == pytest.approx(R)


def test_falsifier_input_checks():
    with pytest.raises(ConfigError):
        cert.inequality_falsifier("nonsense", 0.0, [1.0], 1)
    with pytest.raises(ConfigError):
        cert.inequality_falsifier("intineq0", 0.0, [1.0], 1, trials=0)
    with pytest.raises(ConfigError):
        cert.inequality_terms("nonsense", np.zeros(4), build_grid([1], [4]), 0.0)
