"""
Metropolis-Hastings kernels: acceptance, primary-sample-space perturbation, chains and
the contribution-weight update applied by mutate_sample.
"""
import numpy as np
import pytest

from restirmcmc.core.reservoir import Reservoir
from restirmcmc.errors import ContractViolationError, InvalidValueError
from restirmcmc.mcmc import (
    DEFAULT_S1, DEFAULT_S2, MutationConfig, MutationStrategy, mh_acceptance, mutate_sample, pss_perturb, run_chain,
    wrap_unit,
)
from restirmcmc.mcmc.mutations import (
    di_contribution, di_direction_mutation, path_contribution, reconnection_mutation,
)
from restirmcmc.mcmc.pss import perturbation_scale
from restirmcmc.render.pipeline import light_candidates, trace_one_bounce
from restirmcmc.testbed.experiments import RandomWalkStrategy, ris_uniform
from restirmcmc.testbed.targets import mixture_target, uniform_target


class TestAcceptance:
    """min(1, p(z)/p(x) * kernel ratio)"""

    def test_values(self):
        a = mh_acceptance([1.0, 2.0, 1.0, 1.0], [2.0, 1.0, 0.0, 1.0], [1.0, 1.0, 1.0, 0.25])
        assert np.allclose(a, [1.0, 0.5, 0.0, 0.25])

    def test_infeasible_kernel_ratio(self):
        assert np.allclose(mh_acceptance([1.0, 1.0], [1.0, 1.0], [np.inf, np.nan]), 0.0)

    def test_off_support_state(self):
        with pytest.raises(ContractViolationError):
            mh_acceptance([0.0, 1.0], [1.0, 1.0], 1.0)


class TestPrimarySampleSpace:
    """Perturbation of uniform vectors"""

    def test_wrap(self):
        assert np.allclose(wrap_unit(np.array([-0.25, 1.25, 0.5])), [0.75, 0.25, 0.5])
        assert wrap_unit(np.array([-1e-20]))[0] < 1.0

    def test_scale_bounds(self):
        assert perturbation_scale(DEFAULT_S1, DEFAULT_S2, np.array(0.0)) == pytest.approx(DEFAULT_S2)
        assert perturbation_scale(DEFAULT_S1, DEFAULT_S2, np.array(1.0)) == pytest.approx(DEFAULT_S1)

    def test_perturb_stays_in_unit_cube(self, lane_source):
        u = np.tile([0.0, 0.999999], (1000, 1))
        out = pss_perturb(u, 0.1, 0.5, lane_source(1000, 4))
        assert out.shape == (1000, 2)
        assert np.all((out >= 0.0) & (out < 1.0))

    def test_perturb_is_small_for_default_scales(self, lane_source):
        u = np.full((5000, 2), 0.5)
        out = pss_perturb(u, DEFAULT_S1, DEFAULT_S2, lane_source(5000, 4))
        # the largest scale is 1/64; a 6-sigma excursion stays below 0.1
        assert np.all(np.abs(out - 0.5) < 0.1)

    def test_perturb_consumes_two_numbers_per_dimension(self, lane_source):
        source = lane_source(10, 7)
        pss_perturb(np.full((10, 3), 0.5), DEFAULT_S1, DEFAULT_S2, source)
        assert source.remaining == 1


class TestMutationConfig:
    """Validation of mutation settings"""

    def test_defaults(self):
        cfg = MutationConfig()
        assert cfg.iters == 1
        assert cfg.s1 == DEFAULT_S1 and cfg.s2 == DEFAULT_S2

    @pytest.mark.parametrize("kwargs,key", [
        ({"iters": -1}, "mutation.iters"),
        ({"s1": 0.5, "s2": 0.1}, "mutation.s1"),
        ({"s1": 0.0}, "mutation.s1"),
        ({"s2": 1.5}, "mutation.s2"),
        ({"strategy": "teleport"}, "mutation.strategy"),
    ])
    def test_invalid(self, kwargs, key):
        with pytest.raises(InvalidValueError) as exc:
            MutationConfig(**kwargs)
        assert exc.value.config_key == key


class TestChains:
    """run_chain and mutate_sample"""

    def test_accept_all_on_uniform_target(self, lane_source):
        n, steps = 200, 10
        strategy = RandomWalkStrategy(uniform_target().p_hat)
        start = np.full(n, 0.5)
        result = run_chain(strategy, start, np.arange(n), steps, lane_source(n, 2 * steps))
        assert result.stats.proposed == n * steps
        assert result.stats.accepted == n * steps
        assert result.stats.acceptance_rate == 1.0

    def test_inactive_lanes_do_not_move(self, lane_source):
        n, steps = 50, 5
        strategy = RandomWalkStrategy(mixture_target().p_hat)
        start = np.linspace(0.1, 0.9, n)
        active = np.arange(n) % 2 == 0
        result = run_chain(strategy, start, np.arange(n), steps, lane_source(n, 2 * steps), active=active)
        assert np.array_equal(result.samples[~active], start[~active])
        assert np.all(result.stats.accepted_per_lane[~active] == 0)

    def test_record_callback(self, lane_source):
        seen = []
        strategy = RandomWalkStrategy(mixture_target().p_hat)
        run_chain(strategy, np.full(4, 0.3), np.arange(4), 3, lane_source(4, 6),
                  record=lambda step, s: seen.append(step))
        assert seen == [0, 1, 2]

    def test_contribution_weight_conservation(self, lane_source):
        target = mixture_target()
        n, k = 2000, 16
        r = ris_uniform(target.p_hat, 4, lane_source(n, 8), n)
        before = r.W * target.p_hat(r.sample)
        mutated, stats = mutate_sample(np.arange(n), r, RandomWalkStrategy(target.p_hat), MutationConfig(iters=k),
                                       lane_source(n, 2 * k, seed=99))
        after = mutated.W * target.p_hat(mutated.sample)
        assert stats.accepted > 0
        assert np.max(np.abs(after - before) / before) < 1e-12
        assert np.array_equal(mutated.w_sum, r.w_sum)
        assert np.array_equal(mutated.M, r.M)

    def test_zero_iterations_is_identity(self, lane_source):
        target = mixture_target()
        r = ris_uniform(target.p_hat, 2, lane_source(10, 4), 10)
        out, stats = mutate_sample(np.arange(10), r, RandomWalkStrategy(target.p_hat), MutationConfig(iters=0),
                                   lane_source(10, 1))
        assert out is r
        assert stats.proposed == 0

    def test_empty_lanes_untouched(self, lane_source):
        target = mixture_target()
        n = 20
        r = Reservoir(np.full(n, 0.3), np.zeros(n), np.ones(n), np.zeros(n))
        out, stats = mutate_sample(np.arange(n), r, RandomWalkStrategy(target.p_hat), MutationConfig(iters=4),
                                   lane_source(n, 8))
        assert stats.proposed == 0
        assert np.array_equal(out.sample, r.sample)
        assert np.array_equal(out.W, r.W)


class TestSceneMutations:
    """Direction and reconnection-vertex proposals on the glossy box"""

    def test_direction_mutation(self, di_ctx, lane_source):
        pixels = np.arange(256)
        samples, _ = light_candidates(di_ctx, lane_source(256, 3, seed=5).random((256, 3)), pixels)
        C, _ = di_contribution(di_ctx, samples, pixels)
        prop = di_direction_mutation(samples, pixels, di_ctx, MutationConfig(), lane_source(256, 4, seed=6))
        assert np.all(prop.kernel_ratio == 1.0)
        assert np.all(np.isfinite(prop.contribution_ratio)) and np.all(prop.contribution_ratio >= 0)
        assert np.any(prop.contribution_ratio > 0)
        live = C > 0
        assert np.allclose(prop.contribution_ratio[live], prop.contribution[live] / C[live])
        assert np.all(prop.p_hat[prop.contribution > 0] > 0)
        assert np.array_equal(prop.candidate.ids, samples.ids)

    def test_reconnection_mutation_keeps_light_point(self, path_ctx, lane_source):
        pixels = np.arange(256)
        samples, _ = trace_one_bounce(path_ctx, pixels, lane_source(256, 5, seed=7))
        C, _ = path_contribution(path_ctx, samples, pixels)
        cfg = MutationConfig(strategy=MutationStrategy.RECONNECTION_VERTEX)
        prop = reconnection_mutation(samples, pixels, path_ctx, cfg, lane_source(256, 4, seed=8))
        assert np.array_equal(prop.candidate.light_pos, samples.light_pos)
        assert np.all(np.isfinite(prop.kernel_ratio)) and np.all(prop.kernel_ratio >= 0)
        assert np.all(prop.contribution_ratio[C == 0] == 0)
        assert np.any(prop.contribution_ratio > 0)

    def test_kernel_ratio_can_be_disabled(self, path_ctx, lane_source):
        pixels = np.arange(64)
        samples, _ = trace_one_bounce(path_ctx, pixels, lane_source(64, 5, seed=9))
        cfg = MutationConfig(strategy=MutationStrategy.RECONNECTION_VERTEX)
        with_ratio = reconnection_mutation(samples, pixels, path_ctx, cfg, lane_source(64, 4, seed=10))
        without = reconnection_mutation(samples, pixels, path_ctx, cfg, lane_source(64, 4, seed=10),
                                        use_kernel_ratio=False)
        assert np.all(without.kernel_ratio == 1.0)
        assert np.array_equal(with_ratio.candidate.rc_pos, without.candidate.rc_pos)
        assert np.array_equal(with_ratio.contribution_ratio, without.contribution_ratio)
