"""Transformer architecture: shapes, masking, determinism, gradients.

The reverse-mode gradients of the full model are validated against central
finite differences (64-bit) on sampled parameter components; the causal mask
is validated by a perturbation probe that requires bit-identical prefixes.
"""

import numpy as np
import pytest

from trajlang.autodiff import Tape, Tensor, backward
from trajlang.geometry import Scene, SceneObject, Trajectory
from trajlang.model import (ModelConfig, TrajectoryTransformer,
                            build_geometry_tokens)

N, MOBJ = 12, 3     # waypoints and object slots used throughout this file


def make_inputs(rng, batch=2, dtype=np.float32, n_objects=2, lf=False,
                d_sem=16):
    trajs = [Trajectory(rng.uniform(-0.9, 0.9, size=(N, 4)))
             for _ in range(batch)]
    scenes = [Scene(tuple(SceneObject(f"obj {i}{b}", rng.uniform(-1, 1, 3))
                          for i in range(n_objects)))
              for b in range(batch)]
    geo, present = build_geometry_tokens(trajs, scenes, MOBJ)
    fdim = MOBJ + d_sem + (1 if lf else 0)
    features = Tensor(rng.normal(size=(batch, fdim)).astype(dtype))
    target = rng.uniform(-0.9, 0.9, size=(batch, N, 4))
    return geo, present, features, target


class TestConfig:
    def test_depth_heads_divisibility(self):
        with pytest.raises(ValueError):
            ModelConfig(depth=50, heads=8)

    def test_token_budget(self):
        with pytest.raises(ValueError):
            ModelConfig(n_waypoints=98, max_objects=6)

    def test_positive_fields(self):
        with pytest.raises(ValueError):
            ModelConfig(decoder_blocks=0)

    def test_feature_dim(self):
        assert ModelConfig(d_sem=64, max_objects=6).feature_dim == 70
        assert ModelConfig(d_sem=64, max_objects=6,
                           lf_enabled=True).feature_dim == 71

    def test_full_scale_preset(self):
        cfg = ModelConfig.full_scale()
        assert cfg.depth == 400
        assert cfg.heads == 8
        assert cfg.decoder_blocks == 5
        assert cfg.block_hidden == 512
        assert cfg.output_hidden == 512
        assert cfg.output_layers == 3
        assert cfg.d_sem == 768

    def test_dict_round_trip(self, tiny_config):
        assert ModelConfig.from_dict(tiny_config.to_dict()) == tiny_config

    def test_defaults_are_toy_scale(self):
        cfg = ModelConfig()
        assert cfg.depth == 64 and cfg.n_waypoints == 40


class TestGeometryTokens:
    def test_layout_waypoints_then_objects(self, rng):
        traj = Trajectory(rng.uniform(-1, 1, size=(N, 4)))
        scene = Scene((SceneObject("cup", [0.1, 0.2, 0.3]),))
        geo, present = build_geometry_tokens([traj], [scene], MOBJ)
        assert geo.shape == (1, N + MOBJ, 4)
        np.testing.assert_array_equal(geo[0, :N], traj.points)
        np.testing.assert_allclose(geo[0, N, :3], [0.1, 0.2, 0.3])
        assert geo[0, N, 3] == 0.0          # object pose has no speed
        np.testing.assert_array_equal(present[0],
                                      [1.0] * (N + 1) + [0.0] * (MOBJ - 1))

    def test_oversize_scene_rejected(self, rng):
        traj = Trajectory(rng.uniform(-1, 1, size=(N, 4)))
        scene = Scene(tuple(SceneObject(f"o{i}", np.zeros(3))
                            for i in range(4)))
        with pytest.raises(ValueError):
            build_geometry_tokens([traj], [scene], MOBJ)


class TestForwardShapes:
    def test_teacher_forced_shapes(self, tiny_config, rng):
        model = TrajectoryTransformer(tiny_config, seed=0)
        geo, present, features, target = make_inputs(rng)
        pred, loss, attn = model.forward_teacher_forced(geo, present,
                                                        features, target)
        assert pred.shape == (2, N, 4)
        assert loss.size == 1
        assert attn is None

    def test_outputs_strictly_inside_unit_range(self, tiny_config, rng):
        model = TrajectoryTransformer(tiny_config, seed=0)
        geo, present, features, target = make_inputs(rng)
        pred, _, _ = model.forward_teacher_forced(geo, present, features,
                                                  target)
        assert np.all(pred.data > -1.0) and np.all(pred.data < 1.0)

    def test_memory_shape(self, tiny_config, rng):
        model = TrajectoryTransformer(tiny_config, seed=0)
        geo, present, _, _ = make_inputs(rng)
        memory = model.encode_geometry(geo, present)
        assert memory.shape == (2, N + MOBJ, tiny_config.depth)

    def test_wrong_target_length_rejected(self, tiny_config, rng):
        model = TrajectoryTransformer(tiny_config, seed=0)
        geo, present, features, target = make_inputs(rng)
        with pytest.raises(ValueError):
            model.forward_teacher_forced(geo, present, features,
                                         target[:, :-1])

    def test_untrained_model_generates_in_range(self, tiny_config, rng):
        model = TrajectoryTransformer(tiny_config, seed=0)
        geo, present, features, _ = make_inputs(rng)
        out, _ = model.generate(geo, present, features)
        assert out.shape == (2, N, 4)
        assert np.all(np.abs(out) < 1.0)


class TestNullToken:
    def test_absent_slot_values_ignored(self, tiny_config, rng):
        """Garbage in a non-present slot must not leak into the memory."""
        model = TrajectoryTransformer(tiny_config, seed=0)
        geo, present, _, _ = make_inputs(rng)
        clean = model.encode_geometry(geo, present).data
        dirty_geo = geo.copy()
        dirty_geo[:, -1] = 99.0             # last slot is absent (2 objects)
        assert present[0, -1] == 0.0
        dirty = model.encode_geometry(dirty_geo, present).data
        np.testing.assert_array_equal(clean, dirty)

    def test_null_token_used_for_absent_slots(self, tiny_config, rng):
        """With positions zeroed, two absent slots encode identically."""
        model = TrajectoryTransformer(tiny_config, seed=0)
        model.params["enc.pos"].data[:] = 0.0
        geo, present, _, _ = make_inputs(rng, n_objects=1)
        memory = model.encode_geometry(geo, present).data
        np.testing.assert_allclose(memory[0, N + 1], memory[0, N + 2],
                                   atol=1e-6)

    def test_object_permutation_equivariance_without_positions(self, rng):
        config = ModelConfig(depth=32, heads=4, decoder_blocks=2,
                             block_hidden=48, output_hidden=48,
                             n_waypoints=N, max_objects=MOBJ, d_sem=16)
        model = TrajectoryTransformer(config, seed=3, dtype=np.float64)
        model.params["enc.pos"].data[:] = 0.0
        traj = Trajectory(rng.uniform(-0.9, 0.9, size=(N, 4)))
        a = Scene((SceneObject("one", [0.5, 0, 0]),
                   SceneObject("two", [0, 0.5, 0])))
        b = Scene((a.objects[1], a.objects[0]))
        geo_a, pres_a = build_geometry_tokens([traj], [a], MOBJ)
        geo_b, pres_b = build_geometry_tokens([traj], [b], MOBJ)
        mem_a = model.encode_geometry(geo_a, pres_a).data
        mem_b = model.encode_geometry(geo_b, pres_b).data
        np.testing.assert_allclose(mem_a[0, :N], mem_b[0, :N], atol=1e-10)
        np.testing.assert_allclose(mem_a[0, N], mem_b[0, N + 1], atol=1e-10)
        np.testing.assert_allclose(mem_a[0, N + 1], mem_b[0, N], atol=1e-10)


class TestCausalMask:
    def test_perturbing_step_k_keeps_prefix_bit_identical(self, tiny_config,
                                                          rng):
        model = TrajectoryTransformer(tiny_config, seed=1)
        geo, present, features, target = make_inputs(rng)
        base, _, _ = model.forward_teacher_forced(geo, present, features,
                                                  target)
        for k in (3, 7, N - 1):
            bumped = target.copy()
            bumped[:, k] += 0.05
            pred, _, _ = model.forward_teacher_forced(geo, present, features,
                                                      bumped)
            # decoder input row k is target waypoint k-1, so predictions at
            # steps <= k must be untouched, later steps must change
            np.testing.assert_array_equal(pred.data[:, :k + 1],
                                          base.data[:, :k + 1])
            if k < N - 1:
                assert not np.array_equal(pred.data[:, k + 1:],
                                          base.data[:, k + 1:])

    def test_attention_upper_triangle_exactly_zero(self, tiny_config, rng):
        model = TrajectoryTransformer(tiny_config, seed=1)
        geo, present, features, target = make_inputs(rng)
        _, _, attn = model.forward_teacher_forced(geo, present, features,
                                                  target,
                                                  collect_attention=True)
        for mat in attn["decoder_self"]:
            b, h, t, s = mat.shape
            assert t == s == N
            upper = np.triu(np.ones((t, s)), k=1).astype(bool)
            assert np.all(mat[:, :, upper] == 0.0)

    def test_attention_rows_sum_to_one(self, tiny_config, rng):
        model = TrajectoryTransformer(tiny_config, seed=1)
        geo, present, features, target = make_inputs(rng)
        _, _, attn = model.forward_teacher_forced(geo, present, features,
                                                  target,
                                                  collect_attention=True)
        for group in attn.values():
            for mat in group:
                np.testing.assert_allclose(mat.sum(axis=-1), 1.0, atol=1e-5)

    def test_attention_shapes(self, tiny_config, rng):
        model = TrajectoryTransformer(tiny_config, seed=1)
        geo, present, features, target = make_inputs(rng)
        _, _, attn = model.forward_teacher_forced(geo, present, features,
                                                  target,
                                                  collect_attention=True)
        assert len(attn["encoder"]) == tiny_config.encoder_blocks
        assert attn["encoder"][0].shape == (2, 4, N + MOBJ, N + MOBJ)
        assert len(attn["decoder_self"]) == tiny_config.decoder_blocks
        assert attn["decoder_self"][0].shape == (2, 4, N, N)
        # cross memory = geometry tokens + one feature token
        assert attn["decoder_cross"][0].shape == (2, 4, N, N + MOBJ + 1)


class TestAutoregression:
    def test_two_runs_bit_identical(self, tiny_config, rng):
        model = TrajectoryTransformer(tiny_config, seed=2)
        geo, present, features, _ = make_inputs(rng)
        one, _ = model.generate(geo, present, features)
        two, _ = model.generate(geo, present, features)
        np.testing.assert_array_equal(one, two)

    def test_teacher_forcing_own_outputs_reproduces_them(self, rng):
        """Feeding the autoregressive result back as the target must predict
        that same result (float64 to keep roundoff far below tolerance)."""
        config = ModelConfig(depth=32, heads=4, decoder_blocks=2,
                             block_hidden=48, output_hidden=48,
                             n_waypoints=N, max_objects=MOBJ, d_sem=16)
        model = TrajectoryTransformer(config, seed=4, dtype=np.float64)
        geo, present, features, _ = make_inputs(rng, dtype=np.float64)
        out, _ = model.generate(geo, present, features)
        pred, _, _ = model.forward_teacher_forced(geo, present, features, out)
        np.testing.assert_allclose(pred.data, out, atol=1e-10)

    def test_feature_vector_changes_output(self, tiny_config, rng):
        model = TrajectoryTransformer(tiny_config, seed=2)
        geo, present, features, _ = make_inputs(rng)
        one, _ = model.generate(geo, present, features)
        other = Tensor(features.data + 0.5)
        two, _ = model.generate(geo, present, other)
        assert not np.array_equal(one, two)

    def test_generate_collects_attention(self, tiny_config, rng):
        model = TrajectoryTransformer(tiny_config, seed=2)
        geo, present, features, _ = make_inputs(rng)
        _, attn = model.generate(geo, present, features,
                                 collect_attention=True)
        assert attn["decoder_self"][0].shape == (2, 4, N, N)


class TestParameters:
    def test_deterministic_construction(self, tiny_config):
        a = TrajectoryTransformer(tiny_config, seed=7)
        b = TrajectoryTransformer(tiny_config, seed=7)
        assert list(a.params) == list(b.params)
        for k in a.params:
            np.testing.assert_array_equal(a.params[k].data, b.params[k].data)

    def test_residual_variant_adds_head_width(self, tiny_config):
        base = TrajectoryTransformer(tiny_config, seed=0)
        res_cfg = ModelConfig.from_dict({**tiny_config.to_dict(),
                                         "feature_residual": True})
        res = TrajectoryTransformer(res_cfg, seed=0)
        # concatenating the feature vector before the head widens only the
        # first head layer: + feature_dim * output_hidden parameters
        expect = tiny_config.feature_dim * tiny_config.output_hidden
        assert res.count_params() - base.count_params() == expect
        assert res.count_params() > base.count_params()

    def test_both_variants_train_one_step(self, tiny_config, rng):
        from trajlang.optim import AdamState, adam_step
        for residual in (False, True):
            cfg = ModelConfig.from_dict({**tiny_config.to_dict(),
                                         "feature_residual": residual})
            model = TrajectoryTransformer(cfg, seed=0)
            geo, present, features, target = make_inputs(rng)
            state = AdamState(model.params, lr=1e-3, warmup_epochs=0)
            with Tape():
                _, loss, _ = model.forward_teacher_forced(geo, present,
                                                          features, target)
                backward(loss)
            before = float(loss.data)
            adam_step(state)
            _, loss2, _ = model.forward_teacher_forced(geo, present,
                                                       features, target)
            assert float(loss2.data) != before

    def test_state_dict_round_trip(self, tiny_config, rng):
        a = TrajectoryTransformer(tiny_config, seed=0)
        b = TrajectoryTransformer(tiny_config, seed=99)
        b.load_state_dict(a.state_dict())
        geo, present, features, _ = make_inputs(rng)
        np.testing.assert_array_equal(a.generate(geo, present, features)[0],
                                      b.generate(geo, present, features)[0])

    def test_load_rejects_missing_and_extra(self, tiny_config):
        model = TrajectoryTransformer(tiny_config, seed=0)
        state = model.state_dict()
        state.pop("enc.proj")
        with pytest.raises(ValueError, match="enc.proj"):
            model.load_state_dict(state)
        state = model.state_dict()
        state["bogus"] = np.zeros(3)
        with pytest.raises(ValueError, match="bogus"):
            model.load_state_dict(state)

    def test_load_rejects_shape_mismatch(self, tiny_config):
        model = TrajectoryTransformer(tiny_config, seed=0)
        state = model.state_dict()
        state["enc.proj"] = np.zeros((4, 3))
        with pytest.raises(ValueError, match="enc.proj"):
            model.load_state_dict(state)


class TestModelGradients:
    """Finite-difference checks of the assembled network, 64-bit."""

    SAMPLED = ["enc.proj", "enc.null_object", "enc.b0.attn.wq", "dec.start",
               "dec.b0.cross.wk", "dec.b1.mlp.w1", "feat.proj.w",
               "head.out_w", "dec.pos"]

    def test_sampled_parameter_components_match_fd(self, rng):
        config = ModelConfig(depth=16, heads=2, decoder_blocks=2,
                             block_hidden=24, output_hidden=24,
                             n_waypoints=6, max_objects=2, d_sem=8)
        model = TrajectoryTransformer(config, seed=5, dtype=np.float64)
        trajs = [Trajectory(rng.uniform(-0.9, 0.9, size=(6, 4)))]
        scenes = [Scene((SceneObject("cup", [0.2, 0.1, 0.0]),))]
        geo, present = build_geometry_tokens(trajs, scenes, 2)
        feat = rng.normal(size=(1, config.feature_dim))
        target = rng.uniform(-0.9, 0.9, size=(1, 6, 4))

        def loss_value() -> float:
            _, loss, _ = model.forward_teacher_forced(
                geo, present, Tensor(feat), target)
            return float(loss.data)

        with Tape():
            _, loss, _ = model.forward_teacher_forced(
                geo, present, Tensor(feat), target)
            backward(loss)
        grads = {k: p.grad.copy() for k, p in model.params.items()
                 if p.grad is not None}

        h = 1e-6
        for name in self.SAMPLED:
            data = model.params[name].data
            flat_idx = rng.choice(data.size, size=min(4, data.size),
                                  replace=False)
            for idx in flat_idx:
                orig = data.flat[idx]
                data.flat[idx] = orig + h
                hi = loss_value()
                data.flat[idx] = orig - h
                lo = loss_value()
                data.flat[idx] = orig
                fd = (hi - lo) / (2 * h)
                got = grads[name].flat[idx]
                denom = max(abs(fd), abs(got), 1e-8)
                assert abs(fd - got) / denom < 1e-4, (name, idx, fd, got)

    def test_every_parameter_receives_gradient(self, tiny_config, rng):
        model = TrajectoryTransformer(tiny_config, seed=6)
        geo, present, features, target = make_inputs(rng)
        with Tape():
            _, loss, _ = model.forward_teacher_forced(geo, present, features,
                                                      target)
            backward(loss)
        # positional rows beyond the used length legitimately get no signal,
        # so check presence per tensor, not per component
        for name, p in model.params.items():
            assert p.grad is not None, name
