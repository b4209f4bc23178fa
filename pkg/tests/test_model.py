"""Nonlinearity, energy, assumptions, and diagnostic functionals.

The dealiased kernels are checked against the dense 4N-grid oracles in
oracles.py; the closed-form example values carry their derivation in
comments.
"""

import math

import numpy as np
import pytest

from oracles import (
    exact_projection_of_square,
    oracle_pointwise_projection,
    oracle_poly_integral,
)

from sinech.errors import UnsupportedNonlinearityError
from sinech.integrator import State
from sinech.model import (
    DiagnosticParams,
    Nonlinearity,
    SourceTerm,
    acceleration_from_state,
    check_assumptions,
    computed_lambda_bound,
    computed_r0,
    default_diagnostic_params,
    diagnostic_F,
    energy,
    f_eval_dealiased,
    higher_functionals,
    pde_residual,
    potential_integral,
)
from sinech.analysis import random_pair_state
from sinech.spectral import (
    GridSpec,
    ModalField,
    eigenvalues,
    norm_Hs,
    norm_pair,
    random_band_limited,
    resample,
)

PI = math.pi
DOUBLE_WELL = Nonlinearity(1.0, 0.0, -1.0)


# ---------------------------------------------------------------------------
# pointwise kernels and derived bounds
# ---------------------------------------------------------------------------

def test_f_pointwise():
    nl = DOUBLE_WELL
    assert nl.f(0.0) == 0.0
    assert nl.f(2.0) == 6.0          # 8 - 2
    assert nl.f_prime(2.0) == 11.0   # 12 - 1
    assert nl.f_second(2.0) == 12.0
    assert nl.potential(2.0) == pytest.approx(2.0)  # 16/4 - 4/2
    assert nl.potential_min() == pytest.approx(-0.25)  # F(+-1) = 1/4 - 1/2


def test_lambda_bound_closed_form():
    assert computed_lambda_bound(1.0, 0.0, -1.0) == 1.0
    assert computed_lambda_bound(1.0, 0.0, 0.0) == 0.0
    assert computed_lambda_bound(1.0, 0.0, -3.0) == 3.0
    assert computed_lambda_bound(1.0, 1.0, 0.0) == pytest.approx(1.0 / 3.0)
    assert computed_lambda_bound(1.0, 0.0, 1.0) == 0.0  # f' >= 1 > 0
    # the bound is the sharp -min f' (sampled)
    for a3, a2, a1 in [(1.0, 0.0, -1.0), (2.0, 1.5, -0.3), (0.5, -1.0, 2.0)]:
        r = np.linspace(-50, 50, 200001)
        fp = (3 * a3 * r + 2 * a2) * r + a1
        assert computed_lambda_bound(a3, a2, a1) == pytest.approx(
            max(0.0, -fp.min()), abs=1e-6
        )


def test_r0_closed_form():
    assert computed_r0(1.0, 0.0, -1.0) == 1.0  # r^4 - r^2 >= 0 iff |r| >= 1
    assert computed_r0(1.0, 0.0, 0.0) == 0.0
    for a3, a2, a1 in [(1.0, 0.0, -1.0), (1.0, 2.0, -1.0), (0.7, -0.4, -2.0)]:
        r0 = computed_r0(a3, a2, a1)
        r = np.linspace(-100, 100, 100001)
        outside = np.abs(r) >= r0
        fr = (((a3 * r + a2) * r + a1) * r * r)[outside]
        assert fr.min() >= -1e-9


def test_nonlinearity_class_boundaries():
    with pytest.raises(UnsupportedNonlinearityError):
        Nonlinearity(-1.0, 0.0, 0.0)
    with pytest.raises(UnsupportedNonlinearityError):
        Nonlinearity(0.0, 1.0, 0.0)   # quadratic-only is outside the class
    with pytest.raises(UnsupportedNonlinearityError):
        Nonlinearity(0.0, 0.0, -1.0)  # degenerate case needs a1 >= 0
    # degenerate linear path for oracle problems
    lin = Nonlinearity(0.0, 0.0, 0.5)
    assert lin.lambda_bound == 0.0 and lin.r0 == 0.0
    assert Nonlinearity(0.0, 0.0, 0.0).is_zero


def test_check_assumptions_values():
    rep = check_assumptions(DOUBLE_WELL, GridSpec(8, PI))
    assert rep.lambda_bound == 1.0    # min f' = f'(0) = -1
    assert rep.m_bound == 6.0         # |f''| = 6|r| <= 6(1+|r|)
    assert rep.r0 == 1.0
    assert rep.all_valid
    assert rep.min_f_prime_sampled >= -rep.lambda_bound - 1e-6
    assert rep.liminf_f_over_r == math.inf
    assert rep.relaxed_condition_holds
    assert rep.lambda1 == pytest.approx(2.0, rel=1e-14)

    rep2 = check_assumptions(Nonlinearity(1.0, 0.0, 0.0))
    assert rep2.lambda_bound == 0.0 and rep2.r0 == 0.0 and rep2.all_valid
    assert rep2.lambda1 is None

    rep3 = check_assumptions(Nonlinearity(1.0, 0.0, -3.0), GridSpec(8, PI))
    assert rep3.lambda_bound == 3.0 and rep3.all_valid

    # overridden bounds are claims and get flagged when false
    lied = Nonlinearity(1.0, 0.0, -1.0, lambda_bound=0.0)
    assert not check_assumptions(lied).lambda_bound_valid
    with pytest.raises(UnsupportedNonlinearityError):
        check_assumptions(Nonlinearity(0.0, 0.0, 1.0))


# ---------------------------------------------------------------------------
# dealiased nonlinear term vs the 4N oracle
# ---------------------------------------------------------------------------

def test_f_eval_zero():
    grid = GridSpec(8, PI)
    out = f_eval_dealiased(ModalField.zeros(grid), DOUBLE_WELL)
    assert np.abs(out.coeff).max() == 0.0


def test_f_eval_single_mode_cube():
    # pure cube of c*e_11 against the brute-force projection
    grid = GridSpec(8, PI)
    nl = Nonlinearity(1.0, 0.0, 0.0)
    u = ModalField.single_mode(grid, 1, 1, 1.3)
    fast = f_eval_dealiased(u, nl)
    slow = oracle_pointwise_projection(u, nl.f)
    assert np.abs(fast.coeff - slow).max() <= 1e-12 * np.abs(slow).max()


@pytest.mark.parametrize("nl", [DOUBLE_WELL, Nonlinearity(1.0, 0.0, 0.5),
                                Nonlinearity(2.5, 0.0, 0.0)])
def test_f_eval_matches_oracle_sweep(nl):
    # 100 random band-limited fields, mixed bands and amplitudes.  For
    # a2 = 0 the odd product f(u) is a finite sine polynomial, so the
    # padded collocation product is the exact Galerkin projection and
    # must match the dense-matrix oracle to roundoff.
    grid = GridSpec(8, PI)
    rng = np.random.default_rng(2024)
    for i in range(100):
        band = int(rng.integers(1, 9))
        amp = float(rng.uniform(0.1, 3.0))
        u = random_band_limited(grid, band, amp, seed=1000 + i)
        fast = f_eval_dealiased(u, nl)
        slow = oracle_pointwise_projection(u, nl.f)
        scale = max(float(np.abs(slow).max()), 1e-30)
        assert np.abs(fast.coeff - slow).max() <= 1e-10 * scale


def test_f_eval_larger_grid_and_odd_side():
    nl = Nonlinearity(0.8, 0.0, 0.3)
    grid = GridSpec(24, 2.5)
    u = random_band_limited(grid, 24, 2.0, seed=5)
    fast = f_eval_dealiased(u, nl)
    slow = oracle_pointwise_projection(u, nl.f)
    assert np.abs(fast.coeff - slow).max() <= 1e-10 * np.abs(slow).max()


def test_f_eval_even_part_bias_shrinks():
    """The quadratic term u^2 is a cosine polynomial whose sine
    expansion is infinite, so collocation dealiasing only approximates
    its projection; the bias against the true (dense cosine-algebra)
    projection must shrink roughly like the inverse square of the
    resolution for a fixed underlying function."""
    base = random_band_limited(GridSpec(4, PI), 4, 1.0, seed=55)

    def even_part_error(n):
        grid = GridSpec(n, PI)
        u = resample(base, n)
        # isolate the a2 route: f = u^2 exactly, via (1, 2, 0) - (1, 0, 0)
        with_sq = f_eval_dealiased(u, Nonlinearity(1.0, 2.0, 0.0))
        cube = f_eval_dealiased(u, Nonlinearity(1.0, 0.0, 0.0))
        approx_sq = 0.5 * (with_sq.coeff - cube.coeff)
        exact_sq = exact_projection_of_square(u)
        return float(np.abs(approx_sq - exact_sq).max())

    e8, e16, e32 = even_part_error(8), even_part_error(16), even_part_error(32)
    assert e8 > 1e-8          # the bias is real, not roundoff
    assert e16 <= e8 / 2.5    # and decays at second order, give or take
    assert e32 <= e16 / 2.5


# ---------------------------------------------------------------------------
# potential integral
# ---------------------------------------------------------------------------

def test_potential_integral_values():
    grid = GridSpec(8, PI)
    assert potential_integral(ModalField.zeros(grid), DOUBLE_WELL) == 0.0
    # u = e_11 at side pi: int F(u) = (1/4) int u^4 - (1/2) int u^2
    #   int e_11^4 = (2/pi)^4 (3 pi/8)^2 = 9/(4 pi^2), int e_11^2 = 1
    u = ModalField.single_mode(grid, 1, 1)
    exact = 9.0 / (16.0 * PI**2) - 0.5
    val = potential_integral(u, DOUBLE_WELL)
    assert val == pytest.approx(exact, rel=1e-12)
    assert val == pytest.approx(-0.44301, abs=5e-6)


def test_potential_integral_oracle_sweep():
    # int F(u) splits into monomials; the oracle integrates each one by
    # its exact rule (trapezoid for even powers, basis contraction for
    # odd), so this holds to roundoff even with a quadratic term
    grid = GridSpec(8, PI)
    for nl in (DOUBLE_WELL, Nonlinearity(1.0, 1.0, -0.5)):
        poly = {2: nl.a1 / 2.0, 3: nl.a2 / 3.0, 4: nl.a3 / 4.0}
        for i in range(20):
            u = random_band_limited(grid, 8, 1.0 + 0.1 * i, seed=300 + i)
            ref = oracle_poly_integral(u, poly)
            assert potential_integral(u, nl) == pytest.approx(
                ref, rel=1e-10, abs=1e-12
            )
    # doubling the field, compared against the same oracle
    u = random_band_limited(grid, 6, 1.0, seed=9)
    poly = {2: -0.5, 4: 0.25}
    assert potential_integral(u * 2.0, DOUBLE_WELL) == pytest.approx(
        oracle_poly_integral(u * 2.0, poly), rel=1e-10
    )


# ---------------------------------------------------------------------------
# energy
# ---------------------------------------------------------------------------

def test_energy_values():
    grid = GridSpec(8, PI)
    zero = ModalField.zeros(grid)
    g0 = SourceTerm.zero(grid)
    e = energy(State(zero, zero), DOUBLE_WELL, g0)
    assert e.quad == 0.0 and e.potential == 0.0 and e.forcing == 0.0
    assert e.total == 0.0

    # (e_11, 0): quad = ||A^{1/2}u||^2 / 2 = 1, plus the potential
    u = ModalField.single_mode(grid, 1, 1)
    e = energy(State(u, zero), DOUBLE_WELL, g0)
    assert e.quad == pytest.approx(1.0, rel=1e-14)
    assert e.total == pytest.approx(1.0 + 9.0 / (16.0 * PI**2) - 0.5, rel=1e-12)
    assert e.total == pytest.approx(0.55699, abs=5e-6)

    # forcing <g, A^{-1}u> with g = u = e_11: 1/lambda_11 = 1/2
    g = SourceTerm(ModalField.single_mode(grid, 1, 1))
    e = energy(State(u, zero), DOUBLE_WELL, g)
    assert e.forcing == pytest.approx(0.5, rel=1e-14)
    assert e.total == pytest.approx(e.quad + e.potential - e.forcing, rel=1e-15)


def test_energy_grid_refinement_invariance():
    grid = GridSpec(8, PI)
    state = random_pair_state(grid, 8, 2.0, seed=17)
    g = SourceTerm(random_band_limited(grid, 4, 0.7, seed=18))
    e1 = energy(state, DOUBLE_WELL, g).total
    big = State(resample(state.u, 16), resample(state.v, 16), state.time)
    gbig = SourceTerm(resample(g.g_modal, 16))
    e2 = energy(big, DOUBLE_WELL, gbig).total
    assert abs(e1 - e2) <= 1e-10 * max(1.0, abs(e1))


def test_energy_sign_symmetry():
    # even potential (a2 = 0), g = 0: energy(-U) = energy(U) exactly
    grid = GridSpec(8, PI)
    g0 = SourceTerm.zero(grid)
    state = random_pair_state(grid, 8, 1.5, seed=23)
    flipped = State(-state.u, -state.v, state.time)
    a = energy(state, DOUBLE_WELL, g0)
    b = energy(flipped, DOUBLE_WELL, g0)
    assert a.total == b.total
    # with a2 != 0 the potential is not even; the flip must also send
    # a2 -> -a2 (and g -> -g) to leave the energy invariant
    nl = Nonlinearity(1.0, 0.7, -1.0)
    nl_flip = Nonlinearity(1.0, -0.7, -1.0)
    g = SourceTerm(random_band_limited(grid, 3, 0.4, seed=24))
    gm = SourceTerm(-g.g_modal)
    assert energy(state, nl, g).total == pytest.approx(
        energy(flipped, nl_flip, gm).total, rel=1e-12
    )


# ---------------------------------------------------------------------------
# acceleration and PDE residual
# ---------------------------------------------------------------------------

def test_acceleration_values():
    grid = GridSpec(8, PI)
    zero = ModalField.zeros(grid)
    g0 = SourceTerm.zero(grid)
    rest = State(zero, zero)
    assert np.abs(acceleration_from_state(rest, DOUBLE_WELL, g0).coeff).max() == 0.0
    # u_tt = g at the origin of phase space
    g = SourceTerm(ModalField.single_mode(grid, 1, 1))
    acc = acceleration_from_state(rest, DOUBLE_WELL, g)
    assert acc.coeff[0, 0] == pytest.approx(1.0, rel=1e-14)
    assert norm_Hs(acc - g.g_modal, 0.0) <= 1e-14


def test_pde_residual_definitional():
    grid = GridSpec(8, PI)
    g = SourceTerm(random_band_limited(grid, 4, 0.6, seed=31))
    state = random_pair_state(grid, 8, 1.0, seed=32)
    acc = acceleration_from_state(state, DOUBLE_WELL, g)
    assert pde_residual(state, acc, DOUBLE_WELL, g) <= 1e-12


def test_pde_residual_zero_state():
    grid = GridSpec(8, PI)
    zero = ModalField.zeros(grid)
    res = pde_residual(State(zero, zero), zero, DOUBLE_WELL, SourceTerm.zero(grid))
    assert res == 0.0


def test_pde_residual_linear_mode():
    # damped-oscillator derivatives satisfy the f=0 equation exactly
    from sinech.integrator import exact_linear_mode

    grid = GridSpec(8, PI)
    lam = 2.0
    nl0 = Nonlinearity(0.0, 0.0, 0.0)
    g0 = SourceTerm.zero(grid)
    for t in (0.0, 0.35, 1.7):
        u, v = exact_linear_mode(lam, 1.0, 0.0, t)
        state = State(
            ModalField.single_mode(grid, 1, 1, float(u)),
            ModalField.single_mode(grid, 1, 1, float(v)),
            t,
        )
        # u_tt = -v - lam^2 u for the mode
        acc = ModalField.single_mode(grid, 1, 1, float(-v - lam**2 * u))
        assert pde_residual(state, acc, nl0, g0) <= 1e-12


# ---------------------------------------------------------------------------
# diagnostic functional
# ---------------------------------------------------------------------------

def test_diagnostic_F_zero_velocity():
    # every term carries u_t or u_tt: a stationary state gives 0
    grid = GridSpec(8, PI)
    zero = ModalField.zeros(grid)
    val = diagnostic_F(State(zero, zero), DOUBLE_WELL, SourceTerm.zero(grid))
    assert val == 0.0


def test_diagnostic_F_closed_form():
    # beta -> 0, L = 0, f' constant c: state (0, e_11) forced so that
    # u_tt = 0 gives F = ||(e_11, 0)||_0^2 / 2 + c ||e_11||^2 / 2 = 1 + c/2
    grid = GridSpec(8, PI)
    c = 0.8
    nl = Nonlinearity(0.0, 0.0, c)
    g = SourceTerm(ModalField.single_mode(grid, 1, 1))  # cancels u_t in u_tt
    state = State(ModalField.zeros(grid), ModalField.single_mode(grid, 1, 1))
    acc = acceleration_from_state(state, nl, g)
    assert norm_Hs(acc, 0.0) <= 1e-14
    params = DiagnosticParams(beta=1e-12, big_l=0.0, sigma=1e-12)
    val = diagnostic_F(state, nl, g, params)
    assert val == pytest.approx(1.0 + c / 2.0, abs=1e-9)


def test_diagnostic_F_coercivity_sweep():
    # F >= sigma ||(u_t, u_tt)||_0^2 with the default recipe, on random
    # quasi-strong states of size up to 5
    grid = GridSpec(12, PI)
    g0 = SourceTerm.zero(grid)
    for nl in (DOUBLE_WELL, Nonlinearity(1.0, 0.0, 0.0), Nonlinearity(1.0, 1.0, -2.0)):
        params = default_diagnostic_params(nl)
        assert params.big_l >= nl.lambda_bound
        rng = np.random.default_rng(99)
        for i in range(100):
            amp = float(rng.uniform(0.05, 5.0))
            st = random_pair_state(grid, 6, amp, seed=7000 + i, s=2.0)
            assert norm_pair(st.u, st.v, 2.0) == pytest.approx(amp, rel=1e-10)
            vt = acceleration_from_state(st, nl, g0)
            val = diagnostic_F(st, nl, g0, params)
            floor = params.sigma * norm_pair(st.v, vt, 0.0) ** 2
            assert val >= floor - 1e-12 * max(1.0, abs(val))


def test_diagnostic_params_validation():
    with pytest.raises(ValueError):
        DiagnosticParams(beta=0.0, big_l=1.0, sigma=0.1)
    with pytest.raises(ValueError):
        DiagnosticParams(beta=1.5, big_l=1.0, sigma=0.1)
    with pytest.raises(ValueError):
        DiagnosticParams(beta=0.25, big_l=-1.0, sigma=0.1)
    with pytest.raises(ValueError):
        DiagnosticParams(beta=0.25, big_l=1.0, sigma=0.0)


# ---------------------------------------------------------------------------
# higher-order functionals
# ---------------------------------------------------------------------------

def test_higher_functionals_zero():
    grid = GridSpec(8, PI)
    zero = ModalField.zeros(grid)
    hf = higher_functionals(State(zero, zero), DOUBLE_WELL, SourceTerm.zero(grid))
    assert (hf.g0, hf.g, hf.h) == (0.0, 0.0, 0.0)


def test_higher_functionals_linear_modal_form():
    # f linear: G0 = ||U||_2^2/2 - <g, Au> + (a1/2)||lap u||^2, all modal
    grid = GridSpec(8, PI)
    nl = Nonlinearity(0.0, 0.0, 0.6)
    state = random_pair_state(grid, 8, 1.2, seed=41)
    g = SourceTerm(random_band_limited(grid, 5, 0.5, seed=42))
    lam = eigenvalues(grid)
    hf = higher_functionals(state, nl, g)
    u, v = state.u.coeff, state.v.coeff
    ghat = g.g_modal.coeff
    g0_exact = (
        0.5 * norm_pair(state.u, state.v, 2.0) ** 2
        - float(np.sum(ghat * lam * u))
        + 0.5 * 0.6 * float(np.sum(lam**2 * u**2))
    )
    assert hf.g0 == pytest.approx(g0_exact, rel=1e-12)
    ut_au = float(np.sum(v * lam * u))
    grad2 = float(np.sum(lam * u**2))
    assert hf.g == pytest.approx(hf.g0 + 0.5 * ut_au + 0.25 * grad2, rel=1e-12)
    # f'' = 0 kills H0: H = -<g,Au>/2 + (u_t,Au)/2 + ||grad u||^2/4
    h_exact = -0.5 * float(np.sum(ghat * lam * u)) + 0.5 * ut_au + 0.25 * grad2
    assert hf.h == pytest.approx(h_exact, rel=1e-12)


def test_higher_functionals_grid_invariance():
    # exact integrals: refining the representation changes nothing
    grid = GridSpec(8, PI)
    state = random_pair_state(grid, 8, 1.0, seed=43)
    g = SourceTerm(random_band_limited(grid, 4, 0.3, seed=44))
    nl = Nonlinearity(1.0, 0.5, -1.0)
    a = higher_functionals(state, nl, g)
    big = State(resample(state.u, 20), resample(state.v, 20), 0.0)
    b = higher_functionals(big, nl, SourceTerm(resample(g.g_modal, 20)))
    assert a.g0 == pytest.approx(b.g0, rel=1e-11)
    assert a.g == pytest.approx(b.g, rel=1e-11)
    assert a.h == pytest.approx(b.h, rel=1e-11)
