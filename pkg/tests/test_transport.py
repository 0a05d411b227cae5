import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from oracles import lp_vertex_enumeration
from pmelab.geometry import ModelManifold, exp_map, origin, pairwise_distances, tangent_frame
from pmelab.solver import DensityField, RadialGrid, near_dirac_datum
from pmelab.transport import (
    DiscreteMeasure,
    DualPotential,
    QuadratureError,
    QuadratureSpec,
    TransportError,
    exact_ot,
    hopf_lax,
    kantorovich_lower_bound,
    lipschitz_constant,
    measure_to_csv,
    plan_to_csv,
    potential_from_duals,
    quantile_w2_squared,
    round_to_marginals,
    sinkhorn,
    transportation_simplex,
    w1_bisector_lower_bound,
    w2_same_center_radial,
    w2_upper_discrete,
)
from pmelab.transport.radial import _directions


def random_instance(rng, m, n, integer=False):
    a = rng.integers(1, 5, m).astype(float) if integer else rng.random(m) + 0.05
    b = rng.integers(1, 5, n).astype(float) if integer else rng.random(n) + 0.05
    if integer:
        # Integer masses make degenerate pivots common.
        b = b * a.sum() / b.sum()
    else:
        b = b * a.sum() / b.sum()
    C = rng.integers(0, 4, (m, n)).astype(float) if integer else rng.random((m, n))
    return a, b, C


def linprog_cost(a, b, C):
    m, n = C.shape
    A = np.zeros((m + n, m * n))
    for i in range(m):
        A[i, i * n:(i + 1) * n] = 1
    for j in range(n):
        A[m + j, j::n] = 1
    res = linprog(C.ravel(), A_eq=A[:-1], b_eq=np.concatenate([a, b])[:-1], bounds=(0, None), method="highs")
    return res.fun


def test_simplex_matches_vertex_enumeration_small():
    rng = np.random.default_rng(0)
    for trial in range(30):
        m, n = rng.integers(1, 5, 2)
        a, b, C = random_instance(rng, m, n, integer=trial % 2 == 0)
        pi, u, v, _ = transportation_simplex(a, b, C)
        assert np.sum(pi * C) == pytest.approx(lp_vertex_enumeration(a, b, C), abs=1e-12)


def test_simplex_plan_and_duals_certify_optimality():
    rng = np.random.default_rng(1)
    for _ in range(20):
        a, b, C = random_instance(rng, 12, 9, integer=bool(rng.integers(2)))
        pi, u, v, _ = transportation_simplex(a, b, C)
        assert np.allclose(pi.sum(1), a) and np.allclose(pi.sum(0), b)
        assert np.all(pi >= -1e-15)
        red = C - u[:, None] - v[None, :]
        assert red.min() >= -1e-10
        assert np.all(np.abs(red[pi > 1e-12]) < 1e-10)
        assert np.sum(pi * C) == pytest.approx(np.dot(u, a) + np.dot(v, b), abs=1e-10)
        assert np.sum(pi * C) == pytest.approx(linprog_cost(a, b, C), abs=1e-9)


def test_simplex_handles_degenerate_equal_masses():
    # Uniform masses with a permutation structure are maximally degenerate.
    n = 30
    rng = np.random.default_rng(2)
    x = rng.random((n, 2))
    y = rng.random((n, 2))
    C = ((x[:, None] - y[None]) ** 2).sum(-1)
    pi, *_ = transportation_simplex(np.ones(n), np.ones(n), C)
    assert np.sum(pi * C) == pytest.approx(linprog_cost(np.ones(n), np.ones(n), C), abs=1e-9)


def test_exact_ot_rejects_unbalanced_and_bad_shapes():
    mu = DiscreteMeasure(np.zeros((2, 1)), [0.5, 0.5])
    with pytest.raises(TransportError):
        exact_ot(mu, DiscreteMeasure(np.zeros((2, 1)), [0.5, 0.6]), np.ones((2, 2)))
    with pytest.raises(TransportError):
        exact_ot(mu, mu, np.ones((3, 2)))
    with pytest.raises(TransportError):
        DiscreteMeasure(np.zeros((2, 1)), [-1.0, 2.0])


def test_sinkhorn_close_to_exact_and_feasible():
    rng = np.random.default_rng(3)
    for _ in range(4):
        x, y = rng.random((16, 2)), rng.random((16, 2))
        a, b = rng.random(16) + 0.1, rng.random(16) + 0.1
        b *= a.sum() / b.sum()
        C = ((x[:, None] - y[None]) ** 2).sum(-1)
        mu, nu = DiscreteMeasure(x, a), DiscreteMeasure(y, b)
        exact = exact_ot(mu, nu, C).cost
        plan = sinkhorn(mu, nu, C, 1e-3 * np.median(C))
        r, c = plan.marginals()
        assert np.allclose(r, a, atol=1e-12) and np.allclose(c, b, atol=1e-12)
        assert exact - 1e-12 <= plan.cost <= exact * (1 + 1e-3)


def test_rounding_produces_coupling():
    rng = np.random.default_rng(4)
    pi = rng.random((5, 7))
    a, b = rng.random(5), rng.random(7)
    b *= a.sum() / b.sum()
    F = round_to_marginals(pi, a, b)
    assert np.allclose(F.sum(1), a) and np.allclose(F.sum(0), b) and F.min() >= 0


def test_quantile_uniform_versus_dirac():
    # W2^2 between the uniform law on [0, 1] and a point mass at 0 is 1/3.
    k = 20000
    x = (np.arange(k) + 0.5) / k
    assert quantile_w2_squared(x, np.full(k, 1 / k), [0.0], [1.0]) == pytest.approx(1 / 3, rel=1e-8)
    # Translation by s costs s^2.
    assert quantile_w2_squared(x, np.full(k, 1 / k), x + 0.25, np.full(k, 1 / k)) == pytest.approx(0.0625)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_quantile_equals_exact_ot_on_line(seed):
    rng = np.random.default_rng(seed)
    xa, xb = rng.random(32), rng.random(32)
    wa, wb = rng.random(32) + 0.01, rng.random(32) + 0.01
    wb *= wa.sum() / wb.sum()
    C = (xa[:, None] - xb[None]) ** 2
    exact = exact_ot(DiscreteMeasure(xa, wa), DiscreteMeasure(xb, wb), C).cost
    assert quantile_w2_squared(xa, wa, xb, wb) == pytest.approx(exact, rel=1e-10, abs=1e-14)


def test_co_centred_radial_matches_cloud_ot():
    # With matching direction sets the ray-wise coupling is optimal, so the
    # point-cloud optimum equals the radial quantile value.
    M = ModelManifold(2, 1.0)
    g = RadialGrid(M, 1.0, 32)
    rng = np.random.default_rng(5)
    a = DensityField(g, rng.random(32), 0.0)
    b = DensityField(g, rng.random(32), 0.0)
    b.values *= a.mass() / b.mass()
    x = origin(M)
    frame = tangent_frame(x)
    dirs = _directions(2, 4) @ frame
    def cloud(f):
        pts = np.concatenate([np.array([exp_map(x, d, r).coords for d in dirs]) for r in g.centers])
        w = np.repeat(f.values * g.volumes / 4, 4)
        return pts, w
    pa, wa = cloud(a)
    pb, wb = cloud(b)
    C = pairwise_distances(M, pa, pb) ** 2
    exact = exact_ot(DiscreteMeasure(pa, wa), DiscreteMeasure(pb, wb), C).cost
    assert w2_same_center_radial(a, b) ** 2 == pytest.approx(exact, rel=1e-6)


def test_hopf_lax_of_absolute_value():
    y = np.linspace(-3, 3, 6001)
    phi = DualPotential(np.abs(y), y)
    x = np.array([-2.0, -0.3, 0.0, 0.4, 1.5])
    s = 0.8
    q = hopf_lax(phi, s, np.abs(x[:, None] - y[None]))
    ref = np.where(np.abs(x) >= s, np.abs(x) - s / 2, x ** 2 / (2 * s))
    assert np.allclose(q.values, ref, atol=1e-6)
    assert hopf_lax(phi, 0.0, np.abs(y[:, None] - y[None])).values.tolist() == phi.values.tolist()
    with pytest.raises(TransportError):
        hopf_lax(phi, -1.0, np.abs(x[:, None] - y[None]))


def test_hopf_lax_semigroup_on_line():
    y = np.linspace(-2, 2, 801)
    D = np.abs(y[:, None] - y[None])
    phi = DualPotential(np.sin(3 * y) + y ** 2, y)
    two = hopf_lax(hopf_lax(phi, 0.3, D), 0.5, D)
    once = hopf_lax(phi, 0.8, D)
    assert np.max(np.abs(two.values - once.values)[200:-200]) < 1e-4
    assert two.s == pytest.approx(0.8)


def test_kantorovich_bound_from_duals_is_half_cost():
    rng = np.random.default_rng(6)
    M = ModelManifold(2, 1.0)
    x = origin(M)
    fr = tangent_frame(x)

    def pts(k):
        out = []
        for _ in range(k):
            c = rng.normal(size=2)
            out.append(exp_map(x, (c / np.linalg.norm(c)) @ fr, rng.random()).coords)
        return np.array(out)

    X, Y = pts(10), pts(12)
    a = rng.random(10) + 0.1
    b = rng.random(12) + 0.1
    b *= a.sum() / b.sum()
    D = pairwise_distances(M, X, Y)
    mu0, mu1 = DiscreteMeasure(X, a), DiscreteMeasure(Y, b)
    plan = exact_ot(mu0, mu1, D ** 2)
    phi = potential_from_duals(plan.u)
    lb = kantorovich_lower_bound(mu0, mu1, phi, D.T)
    assert lb == pytest.approx(0.5 * plan.cost, rel=1e-10)
    # Any other potential gives a smaller value.
    other = DualPotential(phi.values + 0.1 * rng.normal(size=10))
    assert kantorovich_lower_bound(mu0, mu1, other, D.T) <= 0.5 * plan.cost + 1e-12


def test_lipschitz_constant():
    y = np.linspace(0, 1, 11)
    D = np.abs(y[:, None] - y[None])
    assert lipschitz_constant(3 * y, D) == pytest.approx(3.0)


def test_csv_writers(tmp_path):
    mu = DiscreteMeasure(np.array([[0.0, 1.0], [2.0, 3.0]]), [0.25, 0.75])
    p = measure_to_csv(mu, tmp_path / "mu.csv")
    assert p.read_text().splitlines()[0] == "p0,p1,weight"
    plan = exact_ot(mu, mu, np.array([[0.0, 1.0], [1.0, 0.0]]))
    lines = plan_to_csv(plan, tmp_path / "plan.csv").read_text().splitlines()
    assert lines[0] == "i,j,weight" and len(lines) == 3


def bisector_setup(delta=0.05, width=0.1):
    M = ModelManifold(2, 1.0)
    g = RadialGrid(M, 1.0, 200)
    x = origin(M)
    y = exp_map(x, tangent_frame(x)[0], delta)
    return g, x, y, near_dirac_datum(g, 1.0, width)


def test_bisector_bound_between_delta_and_upper():
    g, x, y, rho = bisector_setup()
    lb = w1_bisector_lower_bound(rho, x, y)
    ub, quant = w2_upper_discrete(rho, x, y, n_shells=6, n_dirs=16)
    assert 0.05 < lb <= ub + quant
    # Small caps recover the distance of the centres.
    _, _, _, tiny = bisector_setup(width=0.01)
    assert w1_bisector_lower_bound(tiny, x, y) == pytest.approx(0.05, rel=1e-4)


def test_bisector_excess_matches_uniform_cap_constant():
    # For a uniform cap of radius w on H^2: excess / delta ~ K w^2 / 8.
    for w in (0.05, 0.1):
        g, x, y, rho = bisector_setup(delta=0.01, width=w)
        lb = w1_bisector_lower_bound(rho, x, y)
        assert (lb / 0.01 - 1) / w ** 2 == pytest.approx(0.125, rel=0.05)


def test_bisector_quadrature_error_detected():
    g, x, y, rho = bisector_setup()
    with pytest.raises(QuadratureError):
        w1_bisector_lower_bound(rho, x, y, QuadratureSpec(n_r=2, n_alpha=4, tol=1e-14))


def test_upper_bound_engines_agree():
    g, x, y, rho = bisector_setup()
    exact, _ = w2_upper_discrete(rho, x, y, n_shells=4, n_dirs=8)
    ent, _ = w2_upper_discrete(rho, x, y, n_shells=4, n_dirs=8, engine="sinkhorn", ent_reg=1e-3)
    assert exact <= ent * (1 + 1e-12) and ent <= exact * (1 + 1e-3)
    with pytest.raises(TransportError):
        w2_upper_discrete(rho, x, y, engine="auction")
