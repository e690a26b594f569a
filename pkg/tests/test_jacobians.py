import json
import math

import numpy as np
import pytest

from dirw.analysis import CLASS_STRICT_LOCAL_MIN, CLASS_STRICT_SADDLE, symmetric_eigen
from dirw.errors import NonStationaryPointError, NumericalFailure
from dirw.jacobians import (
    FixedPointJacobian,
    dirl1_jacobian,
    dirl2_jacobian,
    estimate_map_lipschitz,
    finite_difference_jacobian,
    full_jacobian,
    saddle_unstable_equivalence,
    unstable_fixed_point_check,
)
from dirw.problems import Problem, SmoothTerm
from dirw.regularizers import Regularizer
from dirw.solvers import SolverConfig, fixed_point_map, run, solution_map

ALPHA, BETA, MU = 0.2, 4.0, 0.3


def test_dirl1_jacobian_at_minimum(bench):
    jac = dirl1_jacobian(bench, [0.0, 1.0], ALPHA, BETA, MU)
    assert jac.active == (1,) and jac.inactive == (0,)
    # block eigenvalue 1 - (alpha/beta) * 1.75, structural 1-alpha and
    # relaxation factor 1 - alpha(1-mu) with multiplicity n
    assert np.allclose(np.sort(jac.spectrum), [0.8, 0.86, 0.86, 0.9125], atol=1e-12)
    assert jac.scalar_J == pytest.approx(0.8)
    assert jac.scalar_eps == pytest.approx(0.86)
    assert not unstable_fixed_point_check(jac)


def test_dirl1_jacobian_at_saddle(bench, saddle_x2):
    jac = dirl1_jacobian(bench, [0.0, saddle_x2], ALPHA, BETA, MU)
    expected = 1.0 - (ALPHA / BETA) * (2.0 - 0.25 * saddle_x2**-1.5)
    assert expected == pytest.approx(2.3071068, abs=1e-6)
    assert jac.spectrum[-1] == pytest.approx(expected, abs=1e-9)
    assert unstable_fixed_point_check(jac)


def test_dirl1_jacobian_rejects_nonstationary(bench):
    with pytest.raises(NonStationaryPointError):
        dirl1_jacobian(bench, [1.0, 1.0], ALPHA, BETA, MU)


def test_dirl2_jacobian_at_minimum(bench):
    jac = dirl2_jacobian(bench, [0.0, 1.0], ALPHA, BETA, MU)
    # active-block scaling 1 + (lam/beta) r'(1)/1 = 1.125 divides the
    # restricted Hessian before the spectral map
    expected = 1.0 - (ALPHA / BETA) * 1.75 / 1.125
    assert jac.spectrum[-1] == pytest.approx(expected, abs=1e-12)
    assert not unstable_fixed_point_check(jac)


def test_dirl2_jacobian_at_saddle(bench, saddle_x2):
    jac = dirl2_jacobian(bench, [0.0, saddle_x2], ALPHA, BETA, MU)
    r = bench.reg
    P = 1.0 + 0.25 * r.derivative(saddle_x2) / saddle_x2
    expected = 1.0 - (ALPHA / BETA) * (2.0 - 0.25 * saddle_x2**-1.5) / P
    assert expected > 1.0 + 1e-6
    assert jac.spectrum[-1] == pytest.approx(expected, abs=1e-9)
    assert unstable_fixed_point_check(jac)


def test_dirl2_jacobian_requires_lpn_or_full_support():
    prob = Problem(
        SmoothTerm("quadratic", 2.0 * np.eye(2), np.array([0.0, -2.5])),
        Regularizer("EXP", 1.0),
        1.0,
    )
    # (0, x2) stationary points of this objective keep coordinate 1 inactive
    x2 = 1.097159736276423  # solves 2(x2 - 5/4) + e^{-x2} = 0
    with pytest.raises(ValueError):
        dirl2_jacobian(prob, [0.0, x2], ALPHA, BETA, MU)


def test_dirl2_block_eigenvalue_exactly_one_when_hessian_vanishes():
    # restricted Hessian 0 at x* = 1 (see the degenerate construction),
    # J* empty so the weighted-l2 Jacobian applies; the map has a unit
    # eigenvalue exactly.
    h = math.exp(-1.0)
    prob = Problem(
        SmoothTerm("quadratic", np.array([[h]]), np.array([-2.0 * h])),
        Regularizer("EXP", 1.0),
        1.0,
    )
    jac = dirl2_jacobian(prob, [1.0], ALPHA, BETA, MU)
    assert np.max(jac.spectrum) == pytest.approx(1.0, abs=1e-12)
    assert not unstable_fixed_point_check(jac)


def test_unstable_check_boundary():
    jac = FixedPointJacobian(
        algorithm="DIRL1", dimension=1, active=(0,), inactive=(),
        block_II=np.eye(1), off_IJ=np.zeros((1, 0)), off_Ieps=np.zeros(1),
        scalar_J=0.8, scalar_eps=0.86, spectrum=np.array([0.5, 1.0]),
    )
    assert not unstable_fixed_point_check(jac)
    jac.spectrum = np.array([0.9125, 0.8, 0.86, 0.86])
    assert not unstable_fixed_point_check(jac)
    jac.spectrum = np.array([0.8, 2.307])
    assert unstable_fixed_point_check(jac)


def test_finite_difference_recovers_linear_map(rng):
    # no truncation error on a linear map, so a larger h avoids the
    # rounding amplification of tiny steps
    M = rng.normal(size=(6, 6))
    J = finite_difference_jacobian(lambda v: M @ v, rng.normal(size=6), h=1e-4)
    assert np.max(np.abs(J - M)) <= 1e-10 * max(1.0, np.max(np.abs(M)))


def test_finite_difference_flags_bad_column():
    def bad(v):
        return np.array([1.0 / (v[1] - 1.0)])

    # columns other than 1 keep v[1] = 1, so the first one already blows up
    with pytest.raises(NumericalFailure, match="column 0"):
        finite_difference_jacobian(bad, np.array([0.0, 1.0]), h=1e-6)


@pytest.mark.parametrize("algorithm", ["DIRL1", "DIRL2"])
def test_analytic_matches_fd_at_smooth_points(bench, algorithm, rng):
    config = SolverConfig(algorithm, alpha=ALPHA, beta=BETA, mu=MU)
    T = fixed_point_map(config, bench)
    checked = 0
    while checked < 20:
        x = rng.uniform(0.1, 2.0, 2) * rng.choice([-1.0, 1.0], 2)
        eps = rng.uniform(0.1, 1.0, 2)
        if algorithm == "DIRL1":
            grad = bench.gradient_smooth(x)
            w = np.atleast_1d(bench.reg.derivative(np.abs(x) + eps))
            margin = np.abs(np.abs(x - grad / BETA) - bench.lam * w / BETA)
            if np.min(margin) < 1e-5:
                continue
        v = np.concatenate([x, eps])
        fd = finite_difference_jacobian(T, v, h=1e-6)
        an = full_jacobian(bench, config, x, eps)
        assert np.max(np.abs(fd - an)) <= 1e-5
        checked += 1


def test_analytic_matches_fd_at_stationary_points(bench, saddle_x2):
    # support coordinates only for the weighted-l1 map (the inactive
    # directions are only one-sidedly smooth in eps at the boundary)
    config1 = SolverConfig("DIRL1", alpha=ALPHA, beta=BETA, mu=MU)
    T1 = fixed_point_map(config1, bench)
    for x2 in (1.0, saddle_x2):
        jac = dirl1_jacobian(bench, [0.0, x2], ALPHA, BETA, MU)
        full = jac.assemble_full()
        # column 1: active x coordinate; column 3: its relaxation entry,
        # which exercises the off_Ieps block
        fd = finite_difference_jacobian(T1, np.array([0.0, x2, 0.0, 0.0]), 1e-7,
                                        columns=[1, 3])
        assert np.max(np.abs(fd - full[:, [1, 3]])) <= 1e-5
        assert abs(jac.off_Ieps[0]) > 1e-3
    # the weighted-l2 map is two-sidedly smooth at (x, eps) = (0, 0)
    config2 = SolverConfig("DIRL2", alpha=ALPHA, beta=BETA, mu=MU)
    T2 = fixed_point_map(config2, bench)
    for x2 in (1.0, saddle_x2):
        jac = dirl2_jacobian(bench, [0.0, x2], ALPHA, BETA, MU)
        fd = finite_difference_jacobian(T2, np.array([0.0, x2, 0.0, 0.0]), 1e-7)
        assert np.max(np.abs(fd - jac.assemble_full())) <= 1e-5


def coupled_problem():
    A = np.array([[2.0, 0.3], [0.3, 2.0]])
    return Problem(
        SmoothTerm("quadratic", A, np.array([0.0, -2.5])), Regularizer("LPN", 0.5), 1.0
    )


def test_off_diagonal_block_against_fd():
    # nonseparable smooth term exercises the active-inactive coupling
    prob = coupled_problem()
    trace = run(SolverConfig("DIRL1"), prob, np.array([1.0, 2.0]))
    assert trace.converged
    x_star = trace.limit_x
    assert x_star[0] == 0.0 and x_star[1] > 0.1
    for algorithm, builder in (("DIRL1", dirl1_jacobian), ("DIRL2", dirl2_jacobian)):
        config = SolverConfig(algorithm, alpha=ALPHA, beta=BETA, mu=MU)
        jac = builder(prob, x_star, ALPHA, BETA, MU)
        assert abs(jac.off_IJ[0, 0]) > 1e-3
        T = fixed_point_map(config, prob)
        fd = finite_difference_jacobian(T, np.concatenate([x_star, np.zeros(2)]),
                                        1e-7, columns=[0, 1])
        full = jac.assemble_full()
        assert np.max(np.abs(fd - full[:, :2])) <= 1e-5


@pytest.mark.parametrize("algorithm", ["DIRL1", "DIRL2"])
def test_triangular_spectrum_matches_general_eigensolver(bench, saddle_x2, algorithm):
    builder = dirl1_jacobian if algorithm == "DIRL1" else dirl2_jacobian
    for x2 in (1.0, saddle_x2):
        jac = builder(bench, [0.0, x2], ALPHA, BETA, MU)
        general = np.sort(np.linalg.eigvals(jac.assemble_full()).real)
        assert np.max(np.abs(general - jac.spectrum)) <= 1e-6


def test_congruence_preserves_eigenvalue_signs(rng):
    for _ in range(100):
        n = int(rng.integers(1, 8))
        B = rng.normal(size=(n, n))
        H = 0.5 * (B + B.T)
        P = rng.uniform(0.1, 10.0, n)
        inv_sqrt = 1.0 / np.sqrt(P)
        congruent = inv_sqrt[:, None] * H * inv_sqrt[None, :]
        vals_h, _ = symmetric_eigen(H)
        vals_c, _ = symmetric_eigen(congruent)
        assert (vals_h[0] < 0.0) == (vals_c[0] < 0.0)


def test_no_eigenvalue_near_zero(bench, saddle_x2):
    # alpha < beta/rho holds for defaults (rho ~ 26.15, beta/rho ~ 0.153)
    for x2, builder in ((1.0, dirl1_jacobian), (saddle_x2, dirl1_jacobian),
                        (1.0, dirl2_jacobian), (saddle_x2, dirl2_jacobian)):
        jac = builder(bench, [0.0, x2], ALPHA, BETA, MU)
        assert np.min(np.abs(jac.spectrum)) > 1e-10


def test_saddle_unstable_equivalence(bench, saddle_x2):
    eq = saddle_unstable_equivalence(bench, [0.0, saddle_x2], ALPHA, BETA, MU, "DIRL1")
    assert eq.classification == CLASS_STRICT_SADDLE
    assert eq.unstable and eq.consistent
    eq2 = saddle_unstable_equivalence(bench, [0.0, 1.0], ALPHA, BETA, MU, "DIRL1")
    assert eq2.classification == CLASS_STRICT_LOCAL_MIN
    assert not eq2.unstable and eq2.consistent
    assert eq2.alpha_below_beta_over_rho
    eq3 = saddle_unstable_equivalence(bench, [0.0, saddle_x2], ALPHA, BETA, MU, "DIRL2")
    eq4 = saddle_unstable_equivalence(bench, [0.0, 1.0], ALPHA, BETA, MU, "DIRL2")
    assert (eq3.classification, eq4.classification) == (eq.classification, eq2.classification)
    assert eq3.unstable and eq3.consistent and not eq4.unstable and eq4.consistent


def test_dirl2_boundary_partials_vanish(bench):
    # d S^x_1 / d x_1 along (x_1, eps_1) = (t, t) -> 0 as t -> 0
    config = SolverConfig("DIRL2", alpha=ALPHA, beta=BETA, mu=MU)
    S = solution_map(config, bench)
    partials = []
    for t in (1e-2, 1e-3, 1e-4):
        point = np.array([t, 1.0, t, 0.0])
        col = finite_difference_jacobian(S, point, h=t / 100.0, columns=[0])
        partials.append(abs(col[0, 0]))
    assert partials[0] > partials[1] > partials[2]
    assert partials[2] < 1e-2


def test_jacobian_serialization(bench):
    jac = dirl1_jacobian(bench, [0.0, 1.0], ALPHA, BETA, MU)
    d = jac.to_dict()
    assert d["algorithm"] == "DIRL1"
    assert d["active"] == [1]
    assert d["block_II"] == [[0.9125]]
    assert all(pair["im"] == 0.0 for pair in d["spectrum"])
    res = [pair["re"] for pair in d["spectrum"]]
    assert res == sorted(res)
    json_text = json.dumps(d)
    assert json.loads(json_text) == d


def test_estimate_map_lipschitz(bench, rng):
    config = SolverConfig("DIRL2", alpha=ALPHA, beta=BETA, mu=MU)
    points = [np.concatenate([rng.uniform(0.5, 2.0, 2), rng.uniform(0.5, 1.0, 2)])
              for _ in range(5)]
    L_S = estimate_map_lipschitz(config, bench, points)
    assert 0.0 < L_S < 10.0
