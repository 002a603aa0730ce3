from __future__ import annotations

import io

import numpy as np
import pytest

from gaitpipe import autograd as ag
from gaitpipe import model as mdl
from gaitpipe.errors import InvalidGraph, ShapeMismatch
from gaitpipe.supcon import loss_and_grad

CFG = mdl.ModelConfig()
GRAPH = CFG.graph()


def batch(n=4, seed=0, cfg=CFG):
    return np.random.default_rng(seed).normal(size=(n, cfg.channels[0], cfg.window_len, cfg.num_nodes))


# ---- graph ---------------------------------------------------------------------------------

def test_partitions_sum_to_adjacency_plus_identity():
    g = mdl.build_graph()
    assert np.array_equal(g.partitions.sum(axis=0), g.adjacency + np.eye(17))
    assert np.array_equal(g.adjacency, g.adjacency.T)
    assert g.num_partitions == 3
    assert set(np.unique(g.partitions)) <= {0.0, 1.0}


def test_two_node_normalized_entry():
    g = mdl.build_graph(mdl.GraphConfig(num_nodes=2, edges=((0, 1),), center=(0,), strategy="uniform"))
    assert np.allclose(g.normalized[0], [[0.5, 0.5], [0.5, 0.5]])


def test_center_nodes_are_self_partition():
    g = mdl.build_graph()
    # both hips are at distance 0, so the hip-hip bone stays in the self partition
    assert g.partitions[0, 11, 12] == 1.0 and g.partitions[0, 12, 11] == 1.0
    assert g.partitions[1, 13, 11] == 1.0   # knee -> hip is centripetal
    assert g.partitions[2, 11, 13] == 1.0   # hip -> knee is centrifugal


def test_normalized_spectral_radius_at_most_one():
    parts = GRAPH.partitions
    assert np.array_equal(parts[0], parts[0].T)
    assert np.array_equal(parts[2], parts[1].T)  # centrifugal edges are centripetal ones reversed
    assert np.max(np.abs(np.linalg.eigvalsh(mdl.build_graph(mdl.GraphConfig(strategy="uniform")).normalized[0]))) <= 1 + 1e-12


def test_invalid_graphs():
    with pytest.raises(InvalidGraph):
        mdl.build_graph(mdl.GraphConfig(edges=((0, 17),)))
    with pytest.raises(InvalidGraph):
        mdl.build_graph(mdl.GraphConfig(center=(40,)))
    with pytest.raises(InvalidGraph):
        mdl.build_graph(mdl.GraphConfig(strategy="distance"))


# ---- forward -------------------------------------------------------------------------------

def test_forward_unit_norm_and_dtype():
    p = mdl.init_params(CFG, 0)
    z = mdl.forward(p, GRAPH, batch(5))
    assert z.shape == (5, 128) and z.dtype == np.float32
    assert np.all(np.abs(np.linalg.norm(z, axis=1) - 1) < 1e-5)


def test_zero_projection_gives_fallback_unit_vector():
    p = mdl.init_params(CFG, 0)
    p["proj"] = np.zeros_like(p["proj"])
    z = mdl.forward(p, GRAPH, batch(2))
    assert np.all(np.isfinite(z))
    assert np.allclose(np.linalg.norm(z, axis=1), 1.0)


def test_batch_items_are_independent():
    p = mdl.init_params(CFG, 1)
    x = batch(6, seed=3)
    perm = np.array([3, 0, 5, 1, 4, 2])
    a = mdl.forward(p, GRAPH, x, dtype=np.float64)
    b = mdl.forward(p, GRAPH, x[perm], dtype=np.float64)
    assert np.max(np.abs(a[perm] - b)) < 1e-12
    single = mdl.forward(p, GRAPH, x[2:3], dtype=np.float64)
    assert np.max(np.abs(single[0] - a[2])) < 1e-12


def test_float32_and_float64_agree():
    p = mdl.init_params(CFG, 2)
    x = batch(3, seed=2)
    a = mdl.forward(p, GRAPH, x).astype(np.float64)
    b = mdl.forward(p, GRAPH, x, dtype=np.float64)
    assert np.max(np.abs(a - b)) < 1e-4


@pytest.mark.parametrize("shape", [(2, 3, 54, 17), (2, 2, 53, 17), (2, 2, 54, 16), (2, 54, 17)])
def test_shape_mismatch(shape):
    with pytest.raises(ShapeMismatch):
        mdl.forward(mdl.init_params(CFG), GRAPH, np.zeros(shape))


def test_non_finite_batch_rejected():
    x = batch(2)
    x[0, 0, 0, 0] = np.nan
    with pytest.raises(ShapeMismatch):
        mdl.forward(mdl.init_params(CFG), GRAPH, x)


def test_missing_parameter_rejected():
    p = mdl.init_params(CFG)
    del p["proj"]
    with pytest.raises(ShapeMismatch):
        mdl.forward(p, GRAPH, batch(2))


# ---- gradients -----------------------------------------------------------------------------

def test_gradients_match_finite_differences_small_model():
    cfg = mdl.ModelConfig(channels=(2, 4, 6), embedding_dim=5, window_len=12)
    g = cfg.graph()
    labels = np.repeat(np.arange(3), 2)
    x = batch(6, seed=4, cfg=cfg)
    errs = mdl.check_gradients(mdl.init_params(cfg, 4), g, x, lambda z: loss_and_grad(z, labels, 0.1), cfg,
                               h=1e-5, coords_per_group=40)
    assert set(errs) == set(mdl.param_shapes(cfg))
    assert max(errs.values()) < 1e-6


def test_unfrozen_check_agrees_where_no_relu_flips():
    cfg = mdl.ModelConfig(channels=(2, 4), embedding_dim=3, window_len=8)
    labels = np.array([0, 0, 1, 1])
    errs = mdl.check_gradients(mdl.init_params(cfg, 0), cfg.graph(), batch(4, seed=1, cfg=cfg),
                               lambda z: loss_and_grad(z, labels, 0.5), cfg, h=1e-6, freeze_masks=False)
    finite = [e for e in errs.values() if np.isfinite(e)]
    assert finite and max(finite) < 1e-5


def test_zero_upstream_gives_zero_gradients():
    p = mdl.init_params(CFG, 0)
    grads = mdl.backward(p, GRAPH, batch(2), np.zeros((2, 128)))
    assert set(grads) == set(p)
    assert all(np.all(g == 0) for g in grads.values())
    assert all(grads[k].shape == p[k].shape for k in p)


def test_l2_normalize_gradient_is_tangent():
    rng = np.random.default_rng(0)
    v = ag.leaf(rng.normal(size=(4, 7)))
    out = ag.l2_normalize(v)
    ag.backward(out, rng.normal(size=(4, 7)))
    assert np.max(np.abs(np.sum(v.grad * v.value, axis=1))) < 1e-12


# ---- init and checkpoints ------------------------------------------------------------------

def test_init_deterministic_and_seeded():
    a, b, c = mdl.init_params(CFG, 5), mdl.init_params(CFG, 5), mdl.init_params(CFG, 6)
    assert all(np.array_equal(a[k], b[k]) for k in a)
    assert not np.array_equal(a["proj"], c["proj"])
    assert all(v.dtype == np.float32 for v in a.values())


def test_init_keeps_activation_scale():
    p = mdl.init_params(CFG, 0)
    x = batch(8, seed=9)
    tr = mdl.trace(p, GRAPH, x, CFG, dtype=np.float64)
    for name in ("block0.temporal", "block1.temporal"):
        var = tr.layers[name].value.var()
        assert 0.05 < var < 20.0


def test_checkpoint_round_trip(tmp_path):
    p = mdl.init_params(CFG, 3)
    path = tmp_path / "m.bin"
    mdl.save_checkpoint(path, p, CFG, {"steps": 10})
    q, cfg, extra = mdl.load_checkpoint(path)
    assert cfg == CFG and extra == {"steps": 10}
    assert all(np.array_equal(p[k], q[k]) and q[k].dtype == np.float32 for k in p)
    raw = path.read_bytes()
    assert raw.startswith(mdl.CHECKPOINT_MAGIC)
    buf = io.BytesIO()
    mdl.save_checkpoint(buf, q, cfg, extra)
    assert buf.getvalue() == raw


def test_checkpoint_rejects_garbage():
    with pytest.raises(ValueError):
        mdl.load_checkpoint(io.BytesIO(b"NOTAMODEL"))
    buf = io.BytesIO()
    mdl.save_checkpoint(buf, mdl.init_params(CFG), CFG)
    with pytest.raises(ValueError):
        mdl.load_checkpoint(io.BytesIO(buf.getvalue() + b"\0"))
