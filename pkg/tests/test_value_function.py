import numpy as np
import pytest

from minimaxcert import (
    assemble_sensitivity_system,
    phi_gradient,
    phi_hessian,
    solve_lower,
    value_derivatives,
)
from minimaxcert.oracle import fd_derivatives
from minimaxcert.problem import eval_bundle, parse_problem
from minimaxcert.value_function import SingularSensitivityError

from conftest import random_smooth_instance


def smooth_solution(spec, x, config, seed_y=None, seed_lam=None):
    y0 = seed_y if seed_y is not None else [0.0] * spec.m
    lam0 = seed_lam if seed_lam is not None else None
    return solve_lower(spec, x, (y0, None, lam0), config, "smooth")


def phi_of(spec, config, sol):
    def func(xv):
        s = solve_lower(spec, xv, (sol.y, sol.mu, sol.lam), config, "smooth")
        return eval_bundle(spec, s.x, s.y).f

    return func


# --- assembly ----------------------------------------------------------------

def test_sensitivity_system_p1_origin(p1, config):
    sol = smooth_solution(p1, [0.0], config)
    system = assemble_sensitivity_system(p1, sol, config)
    expected_K = np.array([[-1.0, 0.0, 1.0], [0.0, 0.0, 2.0], [1.0, 2.0, 0.0]])
    assert np.allclose(system.K, expected_K, atol=1e-10)
    assert np.allclose(system.N.ravel(), [1.0, 0.0, 0.0], atol=1e-12)
    assert system.blocks["y"] == slice(0, 1)
    assert system.blocks["w"] == slice(1, 2)
    assert system.blocks["lam"] == slice(2, 3)


def test_sensitivity_blocks_active_case(p2, config):
    # lam = 1, w = 0: the slack block is -2*Diag(lam) and the coupling vanishes
    sol = smooth_solution(p2, [0.5], config)
    system = assemble_sensitivity_system(p2, sol, config)
    w_sl = system.blocks["w"]
    lam_sl = system.blocks["lam"]
    assert system.K[w_sl, w_sl][0, 0] == pytest.approx(-2.0, abs=1e-9)
    assert system.K[w_sl, lam_sl][0, 0] == pytest.approx(0.0, abs=1e-9)
    assert system.K[lam_sl, w_sl][0, 0] == pytest.approx(0.0, abs=1e-9)
    # zero blocks exactly zero
    mu_sl = system.blocks["mu"]
    assert system.K[mu_sl, mu_sl].size == 0


def test_sensitivity_degenerate_no_constraints(config):
    spec = parse_problem("dims 1 1 0 0 0 0\nf = -(y1-x1)^2\n")
    sol = smooth_solution(spec, [0.3], config)
    system = assemble_sensitivity_system(spec, sol, config)
    assert system.K.shape == (1, 1)
    assert system.K[0, 0] == pytest.approx(-2.0)


def test_sensitivity_rejects_nonsmooth_path(p2, config):
    sol = solve_lower(p2, [0.5], ([0.0], None, [0.0]), config, "nonsmooth")
    with pytest.raises(ValueError):
        assemble_sensitivity_system(p2, sol, config)


def test_singular_k_is_reported(p2, config):
    # at the degenerate point (beta nonempty, w = lam = 0) K is exactly
    # singular: the smooth-path hypotheses genuinely fail there
    from minimaxcert.lower import KktSolution

    sol = KktSolution(
        x=np.array([0.0]), y=np.array([0.0]), w=np.array([0.0]),
        mu=np.zeros(0), lam=np.array([0.0]), residual=0.0, path="smooth",
    )
    with pytest.raises(SingularSensitivityError):
        assemble_sensitivity_system(p2, sol, config)


# --- gradient ----------------------------------------------------------------

def test_phi_gradient_p1(p1, config):
    sol = smooth_solution(p1, [0.3], config)
    assert phi_gradient(p1, sol)[0] == pytest.approx(0.3, abs=1e-10)
    sol0 = smooth_solution(p1, [0.0], config)
    assert phi_gradient(p1, sol0)[0] == pytest.approx(0.0, abs=1e-10)


def test_phi_gradient_p2_interior(p2, config):
    sol = smooth_solution(p2, [-0.5], config)
    assert phi_gradient(p2, sol)[0] == pytest.approx(0.0, abs=1e-9)


# --- Hessian -----------------------------------------------------------------

def test_phi_hessian_p1(p1, config):
    sol = smooth_solution(p1, [0.0], config)
    assert phi_hessian(p1, sol)[0, 0] == pytest.approx(1.0, abs=1e-9)
    sol5 = smooth_solution(p1, [0.5], config)
    assert phi_hessian(p1, sol5)[0, 0] == pytest.approx(1.0, abs=1e-9)


def test_phi_hessian_unconstrained_toy(config):
    spec = parse_problem("dims 1 1 0 0 0 0\nf = -(y1-x1)^2\n")
    sol = smooth_solution(spec, [0.2], config)
    assert phi_hessian(spec, sol)[0, 0] == pytest.approx(0.0, abs=1e-10)


# --- FD agreement ------------------------------------------------------------

@pytest.mark.parametrize("x", [-0.4, -0.2, 0.0, 0.2, 0.4])
def test_phi_derivatives_match_fd_p1(p1, config, x):
    sol = smooth_solution(p1, [x], config)
    vd = value_derivatives(p1, sol, config)
    grad_fd, hess_fd = fd_derivatives(
        phi_of(p1, config, sol), [x], config.fd_step, config.fd_hess_step
    )
    assert abs(vd.gradient[0] - grad_fd[0]) <= 1e-6
    assert abs(vd.hessian[0, 0] - hess_fd[0, 0]) <= 1e-4


@pytest.mark.parametrize("x", [-0.6, -0.3, 0.3, 0.45, 0.6])
def test_phi_derivatives_match_fd_p2_smooth_regions(p2, config, x):
    sol = smooth_solution(p2, [x], config)
    vd = value_derivatives(p2, sol, config)
    grad_fd, hess_fd = fd_derivatives(
        phi_of(p2, config, sol), [x], config.fd_step, config.fd_hess_step
    )
    assert abs(vd.gradient[0] - grad_fd[0]) <= 1e-6
    assert abs(vd.hessian[0, 0] - hess_fd[0, 0]) <= 1e-4


def test_hessian_consistent_with_gradient_jacobian(p1, config):
    # hess phi equals the FD Jacobian of the analytic gradient
    h = 1e-6
    for x in (-0.2, 0.0, 0.3):
        sol = smooth_solution(p1, [x], config)
        vd = value_derivatives(p1, sol, config)
        gp = phi_gradient(p1, solve_lower(p1, [x + h], (sol.y, sol.mu, sol.lam),
                                          config, "smooth"))
        gm = phi_gradient(p1, solve_lower(p1, [x - h], (sol.y, sol.mu, sol.lam),
                                          config, "smooth"))
        fd = (gp[0] - gm[0]) / (2 * h)
        assert abs(vd.hessian[0, 0] - fd) <= 1e-6


def test_random_instances_match_fd(config):
    rng = np.random.default_rng(17)
    for _ in range(4):
        spec, x, y, mu, lam = random_smooth_instance(rng, max_dim=2, max_m2=2)
        sol = solve_lower(spec, x, (y, mu, lam), config, "smooth")
        vd = value_derivatives(spec, sol, config)
        grad_fd, hess_fd = fd_derivatives(
            phi_of(spec, config, sol), x, config.fd_step, config.fd_hess_step
        )
        assert np.max(np.abs(vd.gradient - grad_fd)) <= 1e-6
        assert np.max(np.abs(vd.hessian - hess_fd)) <= 1e-4


# --- sign-convention guard ----------------------------------------------------

def test_symmetric_display_equals_exact_jacobian_assembly(config):
    """The symmetric bordered matrix with unmodified N gives the same
    correction as the exact squared-slack Jacobian (lambda column negated)
    paired with the lambda-flipped left factor."""
    rng = np.random.default_rng(29)
    specs = []
    for _ in range(3):
        specs.append(random_smooth_instance(rng, max_dim=2, max_m2=2))
    # include a case with an x-dependent active constraint
    specs.append((
        parse_problem("dims 1 1 0 1 0 0\nf = -(y1-x1)^2\ng1 = y1 - x1 + 0.5\n"),
        np.array([0.5]), np.array([0.0]), np.zeros(0), np.array([1.0]),
    ))
    for spec, x, y, mu, lam in specs:
        sol = solve_lower(spec, x, (y, mu, lam), config, "smooth")
        system = assemble_sensitivity_system(spec, sol, config)
        K, N = system.K, system.N
        size = K.shape[0]
        s = np.ones(size)
        s[system.blocks["lam"]] = -1.0
        S = np.diag(s)
        J_exact = K @ S
        corr_display = N.T @ np.linalg.solve(K, N)
        corr_exact = (S @ N).T @ np.linalg.solve(J_exact, N)
        assert np.allclose(corr_display, corr_exact, atol=1e-9)
        # and both reproduce the FD Hessian
        vd = value_derivatives(spec, sol, config)
        _, hess_fd = fd_derivatives(phi_of(spec, config, sol), x,
                                    config.fd_step, config.fd_hess_step)
        assert np.max(np.abs(vd.hessian - hess_fd)) <= 1e-4


def test_condition_estimate_attached(p1, config):
    sol = smooth_solution(p1, [0.0], config)
    system = assemble_sensitivity_system(p1, sol, config)
    assert system.condition > 0
    assert not system.condition_warning
