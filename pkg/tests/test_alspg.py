import numpy as np
import pytest

import oracles
from helpers import fd_gradient
from geopro.alspg import (
    AlspgConfig,
    AlspgState,
    CostSpec,
    ProblemSpec,
    al_gradient,
    al_objective,
    alspg_solve,
    residual_V,
    update_multipliers,
    update_penalties,
)
from geopro.bindings import ConstraintBinding, Selector
from geopro.dynamics import DoubleIntegrator, SingleIntegrator, Unicycle, linearize, rollout
from geopro.geometry import ConvexPolytope
from geopro.projectors import BoxLimit, ReachPoint, SafePolytope
from geopro.spg import SpgConfig


def _scalar_problem(rhs=1.0):
    lower = ConstraintBinding(BoxLimit([rhs], [np.inf]), Selector((0,)), on="input", name="u_ge")
    return ProblemSpec(SingleIntegrator(1, 1.0), [0.0], 1, CostSpec(R=1.0), [lower])


def _lq_problem(rng, N=12, integ="euler"):
    model = DoubleIntegrator(0.1, integ)
    Q = np.diag(rng.uniform(0.5, 2, 4))
    R = np.diag(rng.uniform(0.1, 1, 2))
    x_ref = rng.normal(0, 1, 4)
    return ProblemSpec(model, rng.normal(0, 1, 4), N, CostSpec(R=R, Q=Q, x_ref=x_ref)), Q, R, x_ref


def _dense(spec):
    u0 = np.zeros((spec.N, spec.model.n_u))
    lin = linearize(spec.model, rollout(spec.model, spec.x0, u0), u0)
    return oracles.dense_rollout_matrices(lin.A, lin.B)


# ------------------------------------------------------------------ objective and gradient


def test_objective_examples():
    spec = ProblemSpec(DoubleIntegrator(0.1), [1.0, -1.0, 0.0, 0.0], 5, CostSpec(R=1.0, Q=1.0))
    u = np.zeros((5, 2))
    X = rollout(spec.model, spec.x0, u)
    assert al_objective(spec, u) == pytest.approx(float(np.sum(X[1:] ** 2)), rel=1e-14)
    spec = _scalar_problem()
    assert al_objective(spec, np.zeros((1, 1)), None, [2.0]) == pytest.approx(1.0)
    assert al_objective(spec, np.full((1, 1), 3.0), None, [2.0]) == pytest.approx(9.0)


def test_residual_examples():
    spec = _scalar_problem()
    V, norm = residual_V(spec, np.zeros((1, 1)))
    np.testing.assert_array_equal(V[0], [[-1.0]])
    assert norm == 1.0
    V, norm = residual_V(spec, np.full((1, 1), 2.0))
    assert norm == 0.0


def test_feasible_point_gradient_is_cost_gradient():
    spec = ProblemSpec(DoubleIntegrator(0.1), np.zeros(4), 6, CostSpec(R=0.5),
                       [ConstraintBinding(SafePolytope(ConvexPolytope.box([5, 5], [6, 6])), Selector((0, 1)))])
    u = np.random.default_rng(0).normal(0, 0.1, (6, 2))
    np.testing.assert_allclose(al_gradient(spec, u), 2 * 0.5 * u, atol=1e-14)
    assert al_objective(spec, u) == pytest.approx(0.5 * np.sum(u**2), rel=1e-14)


@pytest.mark.parametrize("integ", ["euler", "rk4"])
def test_lq_gradient_closed_form(integ):
    rng = np.random.default_rng(1)
    spec, Q, R, x_ref = _lq_problem(rng, integ=integ)
    calA, calB = _dense(spec)
    u = rng.normal(0, 1, (spec.N, 2))
    x = calA @ spec.x0 + calB @ u.ravel()
    Qb = np.kron(np.eye(spec.N), Q)
    g = 2 * np.kron(np.eye(spec.N), R) @ u.ravel() + calB.T @ (2 * Qb @ (x - np.tile(x_ref, spec.N)))
    np.testing.assert_allclose(al_gradient(spec, u).ravel(), g, rtol=1e-10, atol=1e-10)


def test_gradient_finite_differences_with_constraints():
    rng = np.random.default_rng(5)
    obs = ConvexPolytope.regular([0.6, 0.4], 0.3, 6)
    spec = ProblemSpec(
        Unicycle(0.1), [0.0, 0.0, 0.3], 15, CostSpec(R=0.2, rate=0.1),
        [ConstraintBinding(SafePolytope(obs, 0.05), Selector((0, 1)), name="safe"),
         ConstraintBinding(ReachPoint([1.5, 0.5]), Selector((0, 1)), steps=(15,), name="goal"),
         ConstraintBinding(BoxLimit([-0.5, -1.0], [1.0, 1.0]), Selector((0, 1)), on="input", name="box")],
    )
    checked = 0
    for _ in range(10):
        u = rng.normal(0.8, 0.5, (15, 2))
        lams = [rng.normal(0, 0.5, (15, b.dim)) for b in spec.constraints]
        rhos = 10 ** rng.uniform(-1, 2, 3)
        fd = fd_gradient(spec, u, lams, rhos)
        if fd is None:
            continue
        g = al_gradient(spec, u, lams, rhos)
        assert np.max(np.abs(g - fd)) / max(np.max(np.abs(fd)), np.max(np.abs(g))) <= 1e-4
        checked += 1
    assert checked >= 5


def test_switch_detection_rejects_kinks():
    spec = _scalar_problem()
    # the clamp switches between 1 - 5e-7 and 1 + 5e-7
    assert fd_gradient(spec, np.full((1, 1), 1.0 - 5e-7), [np.zeros((1, 1))], [1.0]) is None
    assert fd_gradient(spec, np.full((1, 1), 0.5), [np.zeros((1, 1))], [1.0]) is not None


def test_problem_spec_validation():
    with pytest.raises(ValueError):
        ProblemSpec(SingleIntegrator(1, 1.0), [0.0], 0)
    with pytest.raises(ValueError):
        ProblemSpec(SingleIntegrator(1, 1.0), [0.0, 1.0], 3)
    with pytest.raises(ValueError):
        ProblemSpec(SingleIntegrator(1, 1.0), [0.0], 3, CostSpec(R=-1.0))
    with pytest.raises(ValueError):
        ProblemSpec(SingleIntegrator(1, 1.0), [0.0], 3, input_lower=[1.0], input_upper=[0.0])
    with pytest.raises(ValueError):
        ProblemSpec(SingleIntegrator(1, 1.0), [0.0], 3,
                    constraints=[ConstraintBinding(ReachPoint([1.0]), Selector((0,)), steps=(4,))])
    with pytest.raises(TypeError):
        ProblemSpec(SingleIntegrator(1, 1.0), [0.0], 3, constraints=[ReachPoint([1.0])])
    with pytest.raises(ValueError):
        AlspgConfig(beta=1.0)


# ------------------------------------------------------------------ updates


def _state(rhos, lambdas=None):
    lambdas = lambdas or [np.zeros((1, 1)) for _ in rhos]
    return AlspgState(np.zeros((1, 1)), lambdas, np.asarray(rhos, float))


def test_multiplier_update_examples():
    st = update_multipliers(_state([0.1], [np.array([[0.7]])]), [np.zeros((1, 1))])
    assert st.lambdas[0][0, 0] == 0.7
    st = update_multipliers(_state([0.1]), [np.array([[-1.0]])])
    assert st.lambdas[0][0, 0] == pytest.approx(-0.1)


def test_penalty_update_examples():
    st = _state([0.1])
    seq = [0.1]
    # |V| failing to decrease; an exactly equal |V| counts as decreased
    for _ in range(3):
        st = update_penalties(st, [1.0], [0.999])
        seq.append(float(st.rhos[0]))
    np.testing.assert_allclose(seq, [0.1, 0.5, 2.5, 12.5])
    st = _state([0.1])
    for v_prev, v in ((1.0, 0.5), (0.5, 0.2), (0.2, 0.1)):
        st = update_penalties(st, [v], [v_prev])
    assert st.rhos[0] == 0.1
    st = update_penalties(_state([0.1, 0.1]), [1.0, 0.1], [0.5, 0.5])
    np.testing.assert_allclose(st.rhos, [0.5, 0.1])
    assert update_penalties(_state([0.1]), [1.0], [1.0]).rhos[0] == 0.1
    st = update_penalties(_state([5e7]), [1.0], [0.5])
    assert st.rhos[0] == 1e8


# ------------------------------------------------------------------ solve


def test_scalar_problem_multiplier_converges_to_kkt_value():
    rep = alspg_solve(_scalar_problem(), None, AlspgConfig(max_outer=500))
    lams = [float(l[0][0, 0]) for l in rep.state.lambda_history]
    assert rep.converged
    # lambda* = -2 from stationarity 2u + lambda = 0 at u* = 1
    assert abs(lams[-1] + 2.0) <= 1e-3 and abs(rep.inputs[0, 0] - 1.0) <= 1e-4
    gaps = np.abs(np.asarray(lams) + 2.0)
    assert np.all(np.diff(gaps) <= 1e-12)


def test_solve_invariants():
    rep = alspg_solve(_scalar_problem(), None, AlspgConfig(max_outer=60))
    st = rep.state
    rhos = [np.full(1, 0.1)] + st.rho_history
    assert all(np.all(b >= a) for a, b in zip(rhos, rhos[1:]))
    lam_prev = [np.zeros((1, 1))] + [l[0] for l in st.lambda_history[:-1]]
    for lp, ln, rho, v in zip(lam_prev, (l[0] for l in st.lambda_history), rhos, st.v_norm_history):
        np.testing.assert_allclose(np.abs(ln - lp), rho[0] * v, rtol=1e-12)
    assert rep.converged == (rep.final_v_norm <= 1e-4)


@pytest.mark.parametrize("integ", ["euler", "rk4"])
def test_unconstrained_lq_matches_normal_equations(integ):
    rng = np.random.default_rng(2)
    spec, Q, R, x_ref = _lq_problem(rng, integ=integ)
    calA, calB = _dense(spec)
    Qb = np.kron(np.eye(spec.N), Q)
    H = np.kron(np.eye(spec.N), R) + calB.T @ Qb @ calB
    u_star = -np.linalg.solve(H, calB.T @ Qb @ (calA @ spec.x0 - np.tile(x_ref, spec.N)))
    cfg = AlspgConfig(inner=SpgConfig(max_iters=20000, step_tolerance=1e-12), early_inner_tol=1e-12)
    rep = alspg_solve(spec, None, cfg)
    assert rep.converged
    assert np.max(np.abs(rep.inputs.ravel() - u_star)) <= 1e-6


def test_inputs_obey_box_exactly():
    spec = ProblemSpec(DoubleIntegrator(0.1), np.zeros(4), 20, CostSpec(R=0.01, Qf=10.0, xf_ref=[3, 0, 0, 0]),
                       input_lower=[-1.0, -0.5], input_upper=[1.0, 0.5])
    rep = alspg_solve(spec)
    assert np.all(rep.inputs >= spec.input_lower) and np.all(rep.inputs <= spec.input_upper)
    assert np.any(rep.inputs[:, 0] == 1.0)


def test_reach_problem_converges():
    spec = ProblemSpec(DoubleIntegrator(0.1), np.zeros(4), 20, CostSpec(R=0.1),
                       [ConstraintBinding(ReachPoint([1.0, 0.5, 0.0, 0.0]), Selector((0, 1, 2, 3)), steps=(20,))])
    # with rho0 = 0.1 |V| shrinks monotonically but slowly, so rho never grows
    rep = alspg_solve(spec, None, AlspgConfig(rho0=10.0))
    assert rep.converged and rep.final_v_norm <= 1e-4
    np.testing.assert_allclose(rep.states[-1], [1.0, 0.5, 0.0, 0.0], atol=1e-3)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergent_start_reports_instead_of_raising():
    spec = ProblemSpec(SingleIntegrator(1, 1.0), [0.0], 3, CostSpec(R=1.0),
                       [ConstraintBinding(ReachPoint([1.0]), Selector((0,)))])
    rep = alspg_solve(spec, np.full((3, 1), 1e308))
    assert not rep.converged and rep.status.startswith("rollout failed")


def test_summary_fields():
    rep = alspg_solve(_scalar_problem(), None, AlspgConfig(max_outer=3))
    s = rep.summary()
    for key in ("converged", "outer_iters", "inner_iters_total", "final_v_norm", "objective", "solve_time_s"):
        assert key in s
