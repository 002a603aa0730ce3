"""Spatio-temporal graph convolutional embedding network over COCO-17 skeletons.

Each block computes ``h = relu(sum_k A_k X W_k)``, then ``y = tconv(h) + h``
(same-padded temporal convolution with a residual), then a learnable
per-channel scale and shift. The last block is mean-pooled over time and
joints, projected to the embedding size and L2-normalized.

Parameters are float32; pass ``dtype=np.float64`` to run the same
computation in double precision for gradient checking.
"""
from __future__ import annotations

import io
import json
import struct
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autograd as ag
from .augment import make_rng
from .errors import InvalidGraph, ShapeMismatch
from .skeleton import L_HIP, NUM_JOINTS, R_HIP

COCO_EDGES = (
    (0, 1), (0, 2), (1, 3), (2, 4),            # face
    (5, 7), (7, 9), (6, 8), (8, 10),           # arms
    (11, 13), (13, 15), (12, 14), (14, 16),    # legs
    (5, 6), (11, 12), (5, 11), (6, 12),        # torso
    (0, 5), (0, 6),                            # head to shoulders
)
CENTER_JOINTS = (L_HIP, R_HIP)

CHECKPOINT_MAGIC = b"GAITPRM\x01"


@dataclass
class GraphConfig:
    num_nodes: int = NUM_JOINTS
    edges: tuple = COCO_EDGES
    center: tuple = CENTER_JOINTS
    strategy: str = "spatial"  # "spatial" (self/centripetal/centrifugal) or "uniform"


@dataclass
class GraphSpec:
    num_nodes: int
    edges: tuple
    adjacency: np.ndarray   # (V, V) symmetric bone adjacency, no self loops
    partitions: np.ndarray  # (K, V, V) unnormalized, sums to A + I
    normalized: np.ndarray  # (K, V, V) degree-normalized

    @property
    def num_partitions(self) -> int:
        return self.partitions.shape[0]


def _hop_distance(adj: np.ndarray, sources) -> np.ndarray:
    dist = np.full(adj.shape[0], np.inf)
    queue = deque()
    for s in sources:
        dist[s] = 0
        queue.append(s)
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero(adj[u]):
            if dist[v] == np.inf:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def normalize_partition(a: np.ndarray) -> np.ndarray:
    """``D^-1/2 A D^-1/2`` with row-sum degrees floored at 1."""
    deg = np.maximum(a.sum(axis=1), 1.0)
    inv = 1.0 / np.sqrt(deg)
    return inv[:, None] * a * inv[None, :]


def build_graph(config: GraphConfig | None = None) -> GraphSpec:
    cfg = config or GraphConfig()
    V = cfg.num_nodes
    adj = np.zeros((V, V))
    for i, j in cfg.edges:
        if not (0 <= i < V and 0 <= j < V):
            raise InvalidGraph(f"edge ({i}, {j}) references a node outside [0, {V})")
        if i != j:
            adj[i, j] = adj[j, i] = 1.0
    with_self = adj + np.eye(V)
    if cfg.strategy == "uniform":
        parts = with_self[None]
    elif cfg.strategy == "spatial":
        for c in cfg.center:
            if not 0 <= c < V:
                raise InvalidGraph(f"center node {c} outside [0, {V})")
        dist = _hop_distance(adj, cfg.center)
        # equal distances (including both unreachable) go to the self partition
        same = np.zeros((V, V))
        closer = np.zeros((V, V))
        farther = np.zeros((V, V))
        for i in range(V):
            for j in np.flatnonzero(with_self[i]):
                if dist[j] == dist[i]:
                    same[i, j] = 1.0
                elif dist[j] < dist[i]:
                    closer[i, j] = 1.0
                else:
                    farther[i, j] = 1.0
        parts = np.stack([same, closer, farther])
    else:
        raise InvalidGraph(f"unknown partition strategy {cfg.strategy!r}")
    normalized = np.stack([normalize_partition(p) for p in parts])
    return GraphSpec(V, tuple(cfg.edges), adj, parts, normalized)


@dataclass
class ModelConfig:
    channels: tuple[int, ...] = (2, 32, 64)
    temporal_kernel: int = 5
    embedding_dim: int = 128
    window_len: int = 54
    num_nodes: int = NUM_JOINTS
    strategy: str = "spatial"

    def __post_init__(self):
        self.channels = tuple(int(c) for c in self.channels)
        if len(self.channels) < 2 or any(c < 1 for c in self.channels):
            raise ValueError("channels needs an input width and at least one block width")
        if self.temporal_kernel < 1:
            raise ValueError("temporal_kernel must be >= 1")

    @property
    def num_partitions(self) -> int:
        return 1 if self.strategy == "uniform" else 3

    def graph(self) -> GraphSpec:
        return build_graph(GraphConfig(num_nodes=self.num_nodes, strategy=self.strategy))


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    shapes = {}
    K, tau = cfg.num_partitions, cfg.temporal_kernel
    for b, (cin, cout) in enumerate(zip(cfg.channels[:-1], cfg.channels[1:])):
        shapes[f"block{b}.spatial"] = (K, cin, cout)
        shapes[f"block{b}.temporal"] = (tau, cout, cout)
        shapes[f"block{b}.scale"] = (cout,)
        shapes[f"block{b}.shift"] = (cout,)
    shapes["proj"] = (cfg.channels[-1], cfg.embedding_dim)
    return shapes


def init_params(cfg: ModelConfig, seed: int = 0) -> dict[str, np.ndarray]:
    """Fan-in scaled uniform weights; scale 1 and shift 0."""
    rng = make_rng(seed, 0x1A17)
    params = {}
    for name, shape in param_shapes(cfg).items():
        kind = name.rsplit(".", 1)[-1]
        if kind == "scale":
            params[name] = np.ones(shape, np.float32)
        elif kind == "shift":
            params[name] = np.zeros(shape, np.float32)
        else:
            if kind == "spatial":
                fan_in, gain = shape[0] * shape[1], 6.0  # followed by relu
            elif kind == "temporal":
                fan_in, gain = shape[0] * shape[1], 1.0  # residual adds the input back
            else:
                fan_in, gain = shape[0], 3.0
            bound = np.sqrt(gain / fan_in)
            params[name] = rng.uniform(-bound, bound, size=shape).astype(np.float32)
    return params


@dataclass
class Trace:
    """Result of one forward pass with the graph kept for differentiation."""

    output: ag.Tensor
    leaves: dict[str, ag.Tensor]
    pre_norm: ag.Tensor
    layers: dict[str, ag.Tensor] = field(default_factory=dict)

    @property
    def embeddings(self) -> np.ndarray:
        return self.output.value

    def relu_masks(self) -> dict[str, np.ndarray]:
        return {name.split(".")[0]: t.value > 0 for name, t in self.layers.items()
                if name.endswith(".spatial")}

    def backward(self, upstream_grad) -> dict[str, np.ndarray]:
        ag.backward(self.output, upstream_grad)
        return {
            name: (t.grad if t.grad is not None else np.zeros_like(t.value))
            for name, t in self.leaves.items()
        }


def _check_batch(batch: np.ndarray, cfg: ModelConfig) -> None:
    if batch.ndim != 4:
        raise ShapeMismatch(f"batch must be N x C x T x V, got {batch.shape}")
    n, c, t, v = batch.shape
    if c != cfg.channels[0] or t != cfg.window_len or v != cfg.num_nodes or n < 1:
        raise ShapeMismatch(
            f"batch shape {batch.shape} does not match (N, {cfg.channels[0]}, "
            f"{cfg.window_len}, {cfg.num_nodes})"
        )
    if not np.all(np.isfinite(batch)):
        raise ShapeMismatch("batch contains non-finite values")


def trace(params, graph: GraphSpec, batch, cfg: ModelConfig | None = None, dtype=np.float32,
          relu_masks: dict | None = None) -> Trace:
    """Forward pass that keeps the computation graph.

    ``relu_masks`` maps block names to boolean activity masks; when given, those
    units are held on/off regardless of their input (finite-difference checks
    use this to stay on one linear piece of the network).
    """
    cfg = cfg or ModelConfig()
    batch = np.asarray(batch)
    _check_batch(batch, cfg)
    expected = param_shapes(cfg)
    for name, shape in expected.items():
        if name not in params or tuple(params[name].shape) != shape:
            got = None if name not in params else params[name].shape
            raise ShapeMismatch(f"parameter {name}: expected {shape}, got {got}")

    leaves = {name: ag.leaf(np.asarray(params[name], dtype=dtype)) for name in expected}
    adjacency = graph.normalized.astype(dtype)
    x = ag.leaf(np.ascontiguousarray(batch.transpose(2, 0, 3, 1), dtype=dtype), requires_grad=False)
    layers = {}
    for b in range(len(cfg.channels) - 1):
        mask = None if relu_masks is None else relu_masks[f"block{b}"]
        h = ag.relu(ag.graph_conv(x, adjacency, leaves[f"block{b}.spatial"]), mask)
        layers[f"block{b}.spatial"] = h
        y = ag.add(ag.temporal_conv(h, leaves[f"block{b}.temporal"]), h)
        layers[f"block{b}.temporal"] = y
        x = ag.channel_affine(y, leaves[f"block{b}.scale"], leaves[f"block{b}.shift"])
    pooled = ag.mean_pool(x, batch_axis=1)
    pre_norm = ag.matmul(pooled, leaves["proj"])
    layers["proj"] = pre_norm
    out = ag.l2_normalize(pre_norm)
    return Trace(out, leaves, pre_norm, layers)


def forward(params, graph: GraphSpec, batch, cfg: ModelConfig | None = None, dtype=np.float32) -> np.ndarray:
    """Unit-norm embeddings ``(N, embedding_dim)`` for an ``(N, C, T, V)`` batch."""
    return trace(params, graph, batch, cfg, dtype).embeddings


def backward(params, graph: GraphSpec, batch, upstream_grad, cfg: ModelConfig | None = None,
             dtype=np.float32) -> dict[str, np.ndarray]:
    """Gradients of ``sum(upstream_grad * forward(...))`` with respect to every parameter."""
    tr = trace(params, graph, batch, cfg, dtype)
    return tr.backward(np.asarray(upstream_grad, dtype=dtype))


def check_gradients(params, graph: GraphSpec, batch, loss_fn, cfg: ModelConfig | None = None,
                    h: float = 1e-4, coords_per_group: int = 12, seed: int = 0,
                    freeze_masks: bool = True) -> dict[str, float]:
    """Compare reverse-mode gradients of ``loss_fn(forward(...))`` with central differences.

    Runs in float64. ``loss_fn`` maps embeddings to ``(loss, d_loss/d_embeddings)``.
    Per parameter group, the largest-magnitude entries plus random ones are
    perturbed by ``+-h``; the group error is ``max |analytic - numeric|``
    divided by the group's largest analytic magnitude.

    With ``freeze_masks`` the ReLU activity pattern at the base point is held
    fixed during the perturbed passes, so the difference quotient stays on
    the same linear piece as the analytic gradient. Without it, coordinates
    whose perturbation flips any unit are skipped (reported as NaN if none
    survive).
    """
    cfg = cfg or ModelConfig()
    p64 = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}
    x = np.asarray(batch, dtype=np.float64)
    base = trace(p64, graph, x, cfg, dtype=np.float64)
    _, g_emb = loss_fn(base.embeddings)
    analytic = base.backward(g_emb)
    masks = base.relu_masks()
    rng = make_rng(seed, 0x6C)

    def evaluate(pp):
        tr = trace(pp, graph, x, cfg, dtype=np.float64, relu_masks=masks if freeze_masks else None)
        return loss_fn(tr.embeddings)[0], tr.relu_masks()

    errors = {}
    for name in param_shapes(cfg):
        a = analytic[name].ravel()
        n_top = min(coords_per_group // 2, a.size)
        top = np.argsort(-np.abs(a), kind="stable")[:n_top]
        rest = np.setdiff1d(np.arange(a.size), top)
        extra = rng.choice(rest, size=min(coords_per_group - n_top, rest.size), replace=False)
        worst = 0.0
        checked = 0
        for i in np.concatenate([top, extra]).astype(int):
            flat = p64[name].ravel().copy()
            flat[i] += h
            lp, mp = evaluate({**p64, name: flat.reshape(p64[name].shape)})
            flat[i] -= 2 * h
            lm, mm = evaluate({**p64, name: flat.reshape(p64[name].shape)})
            if not freeze_masks and any((mp[k] != mm[k]).any() for k in mp):
                continue
            checked += 1
            worst = max(worst, abs((lp - lm) / (2 * h) - a[i]))
        scale = max(np.abs(a).max(), 1e-300)
        errors[name] = worst / scale if checked else float("nan")
    return errors


def sequences_to_batch(frames) -> np.ndarray:
    """Stack ``(T, V, 2)`` coordinate arrays into an ``(N, 2, T, V)`` float32 batch."""
    arr = np.stack([np.asarray(getattr(f, "frames", f)) for f in frames])
    return np.ascontiguousarray(arr.transpose(0, 3, 1, 2), dtype=np.float32)


# ----------------------------------------------------------------------------
# checkpoints: magic, u32 header length, JSON header, then little-endian
# float32 arrays in header order, row-major


def save_checkpoint(path_or_file, params: dict, cfg: ModelConfig, extra: dict | None = None) -> None:
    names = list(param_shapes(cfg))
    header = {
        "version": 1,
        "config": asdict(cfg),
        "params": [{"name": n, "shape": list(params[n].shape)} for n in names],
        "extra": extra or {},
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<I", len(blob)))
    buf.write(blob)
    for n in names:
        buf.write(np.ascontiguousarray(params[n], dtype="<f4").tobytes())
    data = buf.getvalue()
    if hasattr(path_or_file, "write"):
        path_or_file.write(data)
    else:
        with open(path_or_file, "wb") as fh:
            fh.write(data)


def load_checkpoint(path_or_file):
    """Returns ``(params, config, extra)``."""
    if hasattr(path_or_file, "read"):
        data = path_or_file.read()
    else:
        with open(path_or_file, "rb") as fh:
            data = fh.read()
    if data[:len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise ValueError("not a gaitpipe checkpoint (bad magic)")
    pos = len(CHECKPOINT_MAGIC)
    (hlen,) = struct.unpack_from("<I", data, pos)
    pos += 4
    header = json.loads(data[pos:pos + hlen].decode())
    pos += hlen
    if header.get("version") != 1:
        raise ValueError(f"unsupported checkpoint version {header.get('version')}")
    cfg = ModelConfig(**header["config"])
    params = {}
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape))
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=pos).reshape(shape)
        params[entry["name"]] = arr.astype(np.float32)
        pos += 4 * count
    if pos != len(data):
        raise ValueError("trailing bytes in checkpoint")
    return params, cfg, header.get("extra", {})
