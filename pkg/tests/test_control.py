import itertools

import numpy as np
import pytest

from fishcoop import control, env
from fishcoop.env import catchability, spawner_recruit


def single_owner_params(s_eq=1.0, r=1.0, e_total=1.0, price=1.0, cost=0.0):
    return env.EnvParams(
        n_agents=1, s_eq=s_eq, growth_rate=r, e_max=e_total, price=price, cost=cost
    )


class TestHamiltonian:
    def test_terms_vanish(self):
        # lambda = 0, cost = 0 leaves only the revenue term
        value = control.hamiltonian(0.8, 1.0, 0.0, 1.0, 0.0, s_eq=1.0, growth_rate=1.0)
        grown = spawner_recruit(0.8, 1.0, 1.0)
        assert value == pytest.approx(catchability(grown, 1.0) * 1.0)

    def test_zero_effort(self):
        lam, cost = 0.7, 0.2
        value = control.hamiltonian(0.5, 0.0, lam, 1.0, cost, s_eq=1.0, growth_rate=1.0)
        assert value == pytest.approx(-cost + lam * spawner_recruit(0.5, 1.0, 1.0))

    def test_linear_in_effort(self):
        args = dict(price=1.3, cost=0.1, s_eq=2.0, growth_rate=1.5)
        h0 = control.hamiltonian(0.9, 0.0, 0.4, **args)
        h1 = control.hamiltonian(0.9, 1.0, 0.4, **args)
        h2 = control.hamiltonian(0.9, 2.0, 0.4, **args)
        assert h2 - h0 == pytest.approx(2 * (h1 - h0))


class TestBangBang:
    def test_zero_coefficient_harvests(self):
        assert control.bang_bang_action(0.0, 3.0) == 3.0

    def test_negative_rests(self):
        assert control.bang_bang_action(-1e-12, 3.0) == 0.0

    def test_positive_harvests(self):
        assert control.bang_bang_action(0.5, 3.0) == 3.0


class TestBruteForce:
    def test_single_step(self):
        params = single_owner_params(s_eq=1.0, e_total=1.0)
        schedule, objective = control.brute_force_optimal(params, 1)
        # q(s_eq) = 0.5 so one harvest step earns price * E / 2
        assert objective == pytest.approx(0.5)
        assert schedule[0] == 1.0

    def test_all_zero_objective_is_minus_costs(self):
        params = single_owner_params(cost=0.3)
        T = 4
        obj, _ = control.evaluate_schedule(
            np.zeros(T), 1.0, 1.0, np.ones(T), np.full(T, 0.3)
        )
        assert obj == pytest.approx(-T * 0.3)

    def test_longer_horizon_dominates(self):
        params = single_owner_params()
        _, obj1 = control.brute_force_optimal(params, 1)
        _, obj2 = control.brute_force_optimal(params, 2)
        assert obj2 >= obj1

    def test_dominance_over_enumeration(self):
        params = single_owner_params(s_eq=0.8, r=1.3)
        T = 8
        _, best = control.brute_force_optimal(params, T)
        prices, costs = np.ones(T), np.zeros(T)
        for schedule in itertools.product((1.0, 0.0), repeat=T):
            obj, _ = control.evaluate_schedule(
                np.array(schedule), 0.8, 1.3, prices, costs
            )
            assert obj <= best + 1e-12

    def test_horizon_cap(self):
        with pytest.raises(ValueError):
            control.brute_force_optimal(single_owner_params(), 17)

    def test_zero_price_tie_breaks_early(self):
        params = single_owner_params(price=0.0)
        schedule, objective = control.brute_force_optimal(params, 3)
        assert objective == 0.0
        # every schedule ties at 0; earliest-harvesting wins
        assert np.array_equal(schedule, [1.0, 1.0, 1.0])


class TestSweep:
    def test_single_step_transversality(self):
        sweep = control.forward_backward_sweep(single_owner_params(), 1)
        assert sweep.converged
        assert sweep.efforts[0] == 1.0
        assert sweep.lambdas[-1] == 0.0

    def test_matches_oracle_at_t10(self):
        params = single_owner_params()
        sweep = control.forward_backward_sweep(params, 10)
        _, oracle = control.brute_force_optimal(params, 10)
        assert sweep.converged
        assert abs(sweep.objective - oracle) <= 1e-9

    @pytest.mark.parametrize("horizon", range(1, 13))
    def test_soundness_up_to_t12(self, horizon):
        params = single_owner_params(s_eq=1.0, r=1.0)
        sweep = control.forward_backward_sweep(params, horizon)
        _, oracle = control.brute_force_optimal(params, horizon)
        if sweep.converged:
            assert sweep.objective >= (1.0 - 1e-6) * oracle

    def test_soundness_other_instances(self):
        for s_eq, r in [(0.7, 1.5), (1.4, 0.8), (2.0, 2.0)]:
            params = single_owner_params(s_eq=s_eq, r=r)
            sweep = control.forward_backward_sweep(params, 9)
            _, oracle = control.brute_force_optimal(params, 9)
            if sweep.converged:
                assert sweep.objective >= (1.0 - 1e-6) * oracle

    def test_transversality_always(self):
        for horizon in (1, 5, 12):
            sweep = control.forward_backward_sweep(single_owner_params(), horizon)
            assert sweep.lambdas[horizon] == 0.0
            assert len(sweep.lambdas) == horizon + 1
            assert len(sweep.efforts) == horizon

    def test_efforts_exactly_bang_bang(self):
        sweep = control.forward_backward_sweep(single_owner_params(), 12)
        e_total = 1.0
        assert all(e in (0.0, e_total) for e in sweep.efforts)

    def test_final_step_always_harvests(self):
        # lambda_T = 0 makes the last coefficient price * q >= 0
        for horizon in (1, 4, 10):
            sweep = control.forward_backward_sweep(single_owner_params(), horizon)
            assert sweep.efforts[-1] == 1.0

    def test_no_bang_suggested_flip_improves_after_convergence(self):
        # stationarity of converged schedules: each bang-rule proposal was
        # checked by a forward evaluation and rejected
        params = single_owner_params()
        sweep = control.forward_backward_sweep(params, 10)
        assert sweep.converged
        base, _ = control.evaluate_schedule(
            sweep.efforts, 1.0, 1.0, np.ones(10), np.zeros(10)
        )
        for k in range(10):
            trial = sweep.efforts.copy()
            trial[k] = 1.0 - trial[k]
            obj, _ = control.evaluate_schedule(trial, 1.0, 1.0, np.ones(10), np.zeros(10))
            assert obj <= base + 1e-12

    def test_short_horizon_full_consistency(self):
        # for short horizons the realized coefficients match the schedule
        params = single_owner_params()
        for horizon in (1, 2, 3, 4):
            sweep = control.forward_backward_sweep(params, horizon)
            assert sweep.converged
            for k in range(horizon):
                grown = spawner_recruit(sweep.post_harvest_stock[k], 1.0, 1.0)
                coeff = (1.0 - sweep.lambdas[k + 1]) * catchability(grown, 1.0)
                assert control.bang_bang_action(coeff, 1.0) == sweep.efforts[k]

    def test_zero_price(self):
        params = single_owner_params(price=0.0)
        sweep = control.forward_backward_sweep(params, 5)
        assert sweep.objective == pytest.approx(0.0)

    def test_per_step_price(self):
        # price zero except at the final step: harvesting early is wasted
        params = single_owner_params()
        T = 4
        price = np.array([0.0, 0.0, 0.0, 1.0])
        sweep = control.forward_backward_sweep(params, T, price=price)
        _, oracle = control.brute_force_optimal(params, T, price=price)
        assert sweep.objective == pytest.approx(oracle, abs=1e-9)
        # resting preserves the stock at s_eq, so the final harvest earns q * E = 0.5
        assert oracle == pytest.approx(0.5)

    def test_non_convergence_is_reported(self):
        params = single_owner_params()
        sweep = control.forward_backward_sweep(params, 10, max_iter=2)
        assert not sweep.converged
        assert sweep.iterations == 2
        assert sweep.objective > 0  # best-found schedule still returned
