"""Tests for batch normalization, channel exchange and branch fusion."""

import json

import numpy as np
import pytest

from helmholtz import autodiff as ad
from helmholtz.autodiff import Tape
from helmholtz.data.png import read_indexed_png
from helmholtz.models import (
    MIXED,
    SELF,
    BnBranchParams,
    ExchangeConfig,
    FusionHead,
    bn_normalize,
    exchange,
    exchange_demo,
    fuse,
)

from conftest import numeric_gradient


def identity_params(channels, gamma=None):
    gamma = np.ones(channels) if gamma is None else np.asarray(gamma, dtype=np.float64)
    return BnBranchParams(gamma, np.zeros(channels), np.zeros(channels), np.ones(channels), eps=0.0)


def random_stack(rng, branches=3, shape=(4, 5, 6)):
    xs = [rng.normal(size=shape) for _ in range(branches)]
    params = [BnBranchParams.from_features(x, rng.uniform(0.5, 1.5, shape[0])) for x in xs]
    return xs, params


@pytest.fixture
def demo_images(rng):
    return {
        "disparity": rng.uniform(size=(6, 8)),
        "ir": rng.uniform(size=(6, 8)),
        "sparse": np.where(rng.uniform(size=(6, 8)) < 0.2, 0.5, 0.0),
    }


class TestBnNormalize:
    def test_identity(self, rng):
        x = rng.normal(size=(2, 3, 3))
        np.testing.assert_allclose(ad.value_of(bn_normalize(x, identity_params(2))), x)

    def test_formula(self):
        gamma, beta, mean, var = (np.array([v]) for v in (3.0, 1.0, 2.0, 4.0))
        params = BnBranchParams(gamma, beta, mean, var, eps=0.0)
        out = ad.value_of(bn_normalize(np.full((1, 1, 1), 4.0), params))
        assert out.item() == pytest.approx(4.0)

    def test_zero_gamma_gives_beta(self, rng):
        params = BnBranchParams(np.zeros(2), np.array([0.3, -0.7]), np.zeros(2), np.ones(2))
        out = ad.value_of(bn_normalize(rng.normal(size=(2, 4, 4)), params))
        np.testing.assert_allclose(out[0], 0.3)
        np.testing.assert_allclose(out[1], -0.7)

    def test_channel_mismatch(self):
        with pytest.raises(ValueError, match="channels"):
            bn_normalize(np.zeros((3, 2, 2)), identity_params(2))

    def test_negative_variance(self):
        with pytest.raises(ValueError, match="non-negative"):
            BnBranchParams(np.ones(1), np.zeros(1), np.zeros(1), np.array([-1.0]))


class TestExchange:
    def test_no_exchange_above_threshold(self, rng):
        xs, params = random_stack(rng)
        result = exchange(xs, params, ExchangeConfig(theta=0.01))
        for x, p, out in zip(xs, params, result.outputs):
            np.testing.assert_array_equal(ad.value_of(out), ad.value_of(bn_normalize(x, p)))
        assert (result.routing == SELF).all()
        assert result.exchanged_fraction == 0.0

    @pytest.mark.parametrize("mode, expected", [("max", 0.7), ("mean", 0.5)])
    def test_low_gamma_channel_is_replaced(self, mode, expected):
        xs = [np.full((1, 1, 1), v) for v in (0.1, 0.3, 0.7)]
        params = [identity_params(1, [0.001]), identity_params(1), identity_params(1)]
        result = exchange(xs, params, ExchangeConfig(theta=0.02, mode=mode))
        assert ad.value_of(result.outputs[0]).item() == pytest.approx(expected)
        assert result.routing[0].item() == (2 if mode == "max" else MIXED)
        assert ad.value_of(result.outputs[1]).item() == pytest.approx(0.3)

    def test_max_routing_matches_brute_force(self, rng):
        xs, params = random_stack(rng, branches=4)
        params[1] = BnBranchParams(
            np.array([0.5, 0.0, 0.01, 1.0]), params[1].beta, params[1].mean, params[1].var
        )
        result = exchange(xs, params, ExchangeConfig(theta=0.02, mode="max", branches=4))
        normalized = np.stack([ad.value_of(bn_normalize(x, p)) for x, p in zip(xs, params)])
        for c in (1, 2):
            for y, x in np.ndindex(*normalized.shape[2:]):
                values = {k: normalized[k, c, y, x] for k in (0, 2, 3)}
                best = max(values, key=values.get)
                assert result.routing[1, c, y, x] == best
                assert ad.value_of(result.outputs[1])[c, y, x] == values[best]
        assert (result.routing[1, [0, 3]] == SELF).all()

    def test_max_output_matches_formula_on_random_stacks(self, rng):
        theta = 0.02
        for _ in range(1000):
            branches = int(rng.integers(2, 5))
            channels = int(rng.integers(1, 4))
            xs = [rng.normal(size=(channels, 2, 3)) for _ in range(branches)]
            stats = []
            for _ in range(branches):
                weak = rng.uniform(size=channels) < 0.4
                gamma = np.where(
                    weak, rng.uniform(-theta, theta, channels), rng.uniform(0.5, 1.5, channels)
                )
                beta, mean = rng.normal(size=channels), rng.normal(size=channels)
                stats.append((gamma, beta, mean, rng.uniform(0.5, 2.0, channels)))
            params = [BnBranchParams(*s) for s in stats]
            config = ExchangeConfig(theta=theta, mode="max", branches=branches)
            result = exchange(xs, params, config)

            bn = []
            for x, (gamma, beta, mean, var) in zip(xs, stats):
                inv_std = 1.0 / np.sqrt(var + 1e-5)
                scaled = gamma[:, None, None] * ((x - mean[:, None, None]) * inv_std[:, None, None])
                bn.append(scaled + beta[:, None, None])
            bn = np.stack(bn)
            for m, (gamma, *_) in enumerate(stats):
                others = [k for k in range(branches) if k != m]
                kept = (np.abs(gamma) > theta)[:, None, None]
                expected = np.where(kept, bn[m], bn[others].max(axis=0))
                np.testing.assert_array_equal(ad.value_of(result.outputs[m]), expected)

    def test_max_dominates_mean(self, rng):
        xs, params = random_stack(rng)
        params[0] = BnBranchParams(np.full(4, 1e-3), params[0].beta, params[0].mean, params[0].var)
        by_max = exchange(xs, params, ExchangeConfig(mode="max"))
        by_mean = exchange(xs, params, ExchangeConfig(mode="mean"))
        assert np.all(ad.value_of(by_max.outputs[0]) >= ad.value_of(by_mean.outputs[0]) - 1e-12)

    def test_negative_gamma_compares_magnitude(self):
        xs = [np.full((1, 1, 1), v) for v in (0.1, 0.3, 0.7)]
        params = [identity_params(1, [-0.5]), identity_params(1), identity_params(1)]
        result = exchange(xs, params, ExchangeConfig(theta=0.02))
        assert result.routing[0].item() == SELF

    def test_permuting_branches(self, rng):
        xs, params = random_stack(rng)
        weak = np.array([0.0, 1.0, 0.0, 1.0])
        params[2] = BnBranchParams(weak, params[2].beta, params[2].mean, params[2].var)
        order = [2, 0, 1]
        config = ExchangeConfig(mode="max")
        direct = exchange(xs, params, config)
        permuted = exchange([xs[i] for i in order], [params[i] for i in order], config)
        for position, original in enumerate(order):
            np.testing.assert_array_equal(
                ad.value_of(permuted.outputs[position]), ad.value_of(direct.outputs[original])
            )

    def test_gamma_gradients(self, rng):
        xs, params = random_stack(rng, shape=(2, 3, 3))
        gamma0 = np.array([0.005, 0.8])
        head = FusionHead(np.array([0.2, -0.1, 0.4]))
        config = ExchangeConfig(theta=0.02)

        def fused_sum(gamma):
            branch = BnBranchParams(gamma, params[0].beta, params[0].mean, params[0].var)
            result = exchange(xs, [branch, *params[1:]], config)
            return ad.sum_(fuse(result.outputs, head))

        tape = Tape()
        leaf = tape.leaf(gamma0, "gamma")
        grad = tape.backward(fused_sum(leaf))[leaf]
        numeric = numeric_gradient(lambda g: ad.value_of(fused_sum(g)).item(), gamma0, h=1e-4)
        assert grad[0] == 0.0
        assert grad[1] == pytest.approx(numeric[1], rel=1e-6)

    def test_needs_two_branches(self):
        with pytest.raises(ValueError, match="at least 2"):
            exchange([np.zeros((1, 1, 1))], [identity_params(1)], ExchangeConfig(branches=2))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="differ in shape"):
            exchange(
                [np.zeros((1, 2, 2)), np.zeros((1, 3, 3))],
                [identity_params(1), identity_params(1)],
                ExchangeConfig(branches=2),
            )


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError, match="theta"):
            ExchangeConfig(theta=0.0)
        with pytest.raises(ValueError, match="mode"):
            ExchangeConfig(mode="median")
        with pytest.raises(ValueError, match="at least 2"):
            ExchangeConfig(branches=1)

    def test_from_config(self):
        config = ExchangeConfig.from_config({"theta": 0.05, "mode": "mean"})
        assert (config.theta, config.mode, config.branches) == (0.05, "mean", 3)


class TestFuse:
    def test_equal_logits_average(self):
        outputs = [np.full((2, 2), v) for v in (0.0, 3.0, 6.0)]
        np.testing.assert_allclose(ad.value_of(fuse(outputs, FusionHead.uniform(3))), 3.0)

    def test_saturated_logit(self, rng):
        outputs = [rng.normal(size=(3, 3)) for _ in range(3)]
        fused = fuse(outputs, FusionHead(np.array([0.0, 50.0, 0.0])))
        np.testing.assert_allclose(ad.value_of(fused), outputs[1], atol=1e-6)

    def test_alpha_is_convex(self, rng):
        alpha = FusionHead(rng.normal(size=5)).alpha
        assert alpha.sum() == pytest.approx(1.0)
        assert np.all((alpha > 0) & (alpha < 1))

    def test_count_mismatch(self):
        with pytest.raises(ValueError, match="fusion logits"):
            fuse([np.zeros(2)], FusionHead.uniform(2))


class TestExchangeDemo:
    def test_all_self(self, demo_images):
        routing, result = exchange_demo(demo_images)
        assert routing.raster.shape == (3 * 6, 4 * 8)
        assert (routing.raster == 0).all()
        assert routing.legend["exchanged_channels"] == {"disparity": [], "ir": [], "sparse": []}

    def test_weak_ir_routes_from_other_branches(self, demo_images):
        overrides = {"ir": np.full(4, 1e-3), "sparse": np.full(4, 5.0)}
        config = ExchangeConfig(mode="max")
        routing, _ = exchange_demo(demo_images, config, gamma_overrides=overrides)
        ir_row = routing.raster[6:12]
        assert set(np.unique(ir_row)) <= {1, 3}
        assert (routing.raster[:6] == 0).all()
        assert (routing.raster[12:] == 0).all()

    def test_mean_mode_marks_mixed(self, demo_images):
        overrides = {"ir": np.full(4, 1e-3)}
        config = ExchangeConfig(mode="mean")
        routing, _ = exchange_demo(demo_images, config, gamma_overrides=overrides)
        assert (routing.raster[6:12] == 4).all()

    def test_unknown_branch_override(self, demo_images):
        with pytest.raises(ValueError, match="unknown branches"):
            exchange_demo(demo_images, gamma_overrides={"rgb": np.ones(4)})

    def test_save(self, demo_images, tmp_path):
        routing, _ = exchange_demo(demo_images, gamma_overrides={"ir": np.full(4, 1e-3)})
        routing.save(tmp_path / "routing.png")
        np.testing.assert_array_equal(read_indexed_png(tmp_path / "routing.png"), routing.raster)
        with open(tmp_path / "routing.json") as f:
            legend = json.load(f)
        assert legend["labels"]["4"] == "mixed"
        assert legend["exchanged_channels"]["ir"] == [0, 1, 2, 3]
