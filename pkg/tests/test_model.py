"""Encoder forward passes, parameter initialization, checkpoints."""

import numpy as np
import pytest

from specnet import autodiff as ad
from specnet.errors import ContractViolation, DataError
from specnet.graphs import make_graph
from specnet.model import (
    ModelConfig,
    classify,
    config_hash,
    dual_encode,
    dual_encode_features,
    init_params,
    load_params,
    param_names,
    save_params,
    wrap_params,
)
from specnet.spectral import graph_band_features
from specnet.synth import make_synthetic_graphs

CFG = ModelConfig(feature_dim=3, hidden_dim=8, embed_dim=6, layers=2)


class TestParameters:
    def test_names_cover_both_streams(self):
        names = param_names(CFG)
        assert "low.gin0.w1" in names and "high.gin1.w2" in names
        assert names[-2:] == ("clf.w", "clf.b")
        # 2 streams x (2 layers x 4 + 2 proj) + 2 classifier tensors
        assert len(names) == 2 * (2 * 4 + 2) + 2

    def test_shared_streams_use_one_prefix(self):
        cfg = ModelConfig(feature_dim=3, hidden_dim=8, embed_dim=6, layers=2,
                          share_streams=True)
        names = param_names(cfg)
        assert all(n.startswith(("both.", "clf.")) for n in names)
        assert len(names) == (2 * 4 + 2) + 2

    def test_shapes(self):
        params = init_params(CFG, seed=0)
        assert params["low.gin0.w1"].shape == (3, 8)
        assert params["low.gin1.w1"].shape == (8, 8)
        assert params["high.proj.w"].shape == (8, 6)
        assert params["clf.w"].shape == (12, 2)
        assert params["clf.b"].shape == (2,)

    def test_init_deterministic(self):
        a = init_params(CFG, seed=5)
        b = init_params(CFG, seed=5)
        assert all(np.array_equal(a[k], b[k]) for k in a)

    def test_init_seed_sensitivity(self):
        a = init_params(CFG, seed=5)
        b = init_params(CFG, seed=6)
        assert any(not np.array_equal(a[k], b[k]) for k in a)

    def test_biases_nonzero(self):
        params = init_params(CFG, seed=1)
        assert np.any(params["low.proj.b"] != 0.0)

    def test_config_validation(self):
        with pytest.raises(ContractViolation):
            ModelConfig(feature_dim=0)
        with pytest.raises(ContractViolation):
            ModelConfig(feature_dim=3, layers=0)
        with pytest.raises(ContractViolation):
            ModelConfig(feature_dim=3, dropout=1.0)


class TestForward:
    def test_embeddings_are_unit_norm(self):
        params = wrap_params(init_params(CFG, seed=0))
        for g in make_synthetic_graphs(6, seed=50):
            emb = dual_encode(params, CFG, g, rho=0.5)
            assert float(emb.low.data @ emb.low.data) == pytest.approx(1.0)
            assert float(emb.high.data @ emb.high.data) == pytest.approx(1.0)

    def test_feature_path_matches_graph_path(self):
        params = wrap_params(init_params(CFG, seed=0))
        g = make_synthetic_graphs(2, seed=51)[0]
        via_graph = dual_encode(params, CFG, g, rho=0.5)
        via_feats = dual_encode_features(params, CFG,
                                         graph_band_features(g, 0.5, 3))
        assert np.array_equal(via_graph.low.data, via_feats.low.data)
        assert np.array_equal(via_graph.high.data, via_feats.high.data)

    def test_classify_shape_and_determinism(self):
        params = wrap_params(init_params(CFG, seed=2))
        g = make_synthetic_graphs(2, seed=52)[1]
        emb = dual_encode(params, CFG, g, rho=0.5)
        a = classify(params, CFG, emb).data
        b = classify(params, CFG, dual_encode(params, CFG, g, rho=0.5)).data
        assert a.shape == (2,)
        assert np.array_equal(a, b)

    def test_single_node_graph(self):
        # one mode only: the high band is empty and its features vanish;
        # nonzero biases keep the embedding normalizable
        g = make_graph(1, [], node_labels=(1,))
        params = wrap_params(init_params(CFG, seed=3))
        emb = dual_encode(params, CFG, g, rho=0.5)
        assert np.isfinite(emb.high.data).all()

    def test_dropout_masks_change_output(self):
        params = wrap_params(init_params(CFG, seed=4))
        g = make_synthetic_graphs(2, seed=53)[0]
        feats = graph_band_features(g, 0.5, 3)
        rng = np.random.Generator(np.random.PCG64(0))
        masks = {
            s: [(rng.random((g.node_count, 8)) >= 0.3).astype(float)
                for _ in range(2)]
            for s in ("low", "high")
        }
        dropped = dual_encode_features(params, CFG, feats, masks)
        clean = dual_encode_features(params, CFG, feats)
        assert not np.array_equal(dropped.low.data, clean.low.data)

    def test_gradients_flow_to_all_used_parameters(self):
        raw = init_params(CFG, seed=5)
        tape = ad.Tape()
        wrapped = wrap_params(raw, tape)
        g = make_synthetic_graphs(2, seed=54)[0]
        emb = dual_encode(wrapped, CFG, g, rho=0.5)
        logits = classify(wrapped, CFG, emb)
        loss = ad.softmax_cross_entropy(
            ad.reshape(logits, (1, 2)), np.array([0]))
        grads = tape.backward(loss)
        for name in param_names(CFG):
            assert wrapped[name].node_id in grads, name

    def test_shared_streams_forward(self):
        cfg = ModelConfig(feature_dim=3, hidden_dim=8, embed_dim=6, layers=2,
                          share_streams=True)
        params = wrap_params(init_params(cfg, seed=0))
        g = make_synthetic_graphs(2, seed=55)[0]
        emb = dual_encode(params, cfg, g, rho=0.5)
        assert emb.low.data.shape == (6,)


class TestCheckpoints:
    def test_roundtrip_exact(self, tmp_path):
        params = init_params(CFG, seed=7)
        path = str(tmp_path / "ckpt.bin")
        save_params(path, CFG, params)
        back = load_params(path, CFG)
        assert set(back) == set(params)
        assert all(np.array_equal(back[k], params[k]) for k in params)

    def test_config_hash_guard(self, tmp_path):
        params = init_params(CFG, seed=7)
        path = str(tmp_path / "ckpt.bin")
        save_params(path, CFG, params)
        other = ModelConfig(feature_dim=3, hidden_dim=8, embed_dim=6, layers=3)
        with pytest.raises(DataError, match="different config"):
            load_params(path, other)

    def test_truncation_detected(self, tmp_path):
        params = init_params(CFG, seed=7)
        path = str(tmp_path / "ckpt.bin")
        save_params(path, CFG, params)
        with open(path, "rb") as fh:
            raw = fh.read()
        with open(path, "wb") as fh:
            fh.write(raw[:-16])
        with pytest.raises(DataError, match="truncated"):
            load_params(path, CFG)

    def test_trailing_bytes_detected(self, tmp_path):
        params = init_params(CFG, seed=7)
        path = str(tmp_path / "ckpt.bin")
        save_params(path, CFG, params)
        with open(path, "ab") as fh:
            fh.write(b"\x00" * 8)
        with pytest.raises(DataError, match="trailing"):
            load_params(path, CFG)

    def test_not_a_checkpoint(self, tmp_path):
        path = str(tmp_path / "junk.bin")
        with open(path, "wb") as fh:
            fh.write(b"garbage")
        with pytest.raises(DataError, match="not a checkpoint"):
            load_params(path, CFG)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="missing checkpoint"):
            load_params(str(tmp_path / "none.bin"), CFG)

    def test_hash_tracks_config(self):
        other = ModelConfig(feature_dim=3, hidden_dim=8, embed_dim=6,
                            layers=2, dropout=0.4)
        assert config_hash(CFG) != config_hash(other)
        assert config_hash(CFG) == config_hash(
            ModelConfig(feature_dim=3, hidden_dim=8, embed_dim=6, layers=2))
