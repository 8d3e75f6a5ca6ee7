"""Classifier assembly: VGG-style backbone, optional attention gate, dense head.

Layers are enumerated sequentially with the input as 0; every convolution
(with its ReLU) and every pooling layer increments the index. The gate taps
the feature map at ``tap_x`` and the gating signal at ``tap_g``. The head
global-average-pools the gated map and the gating signal, concatenates them,
and finishes with dense(10) + ReLU, dropout, dense(1) + sigmoid.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .attention import AttentionGateParams, attention_backward, attention_forward, init_attention_params
from .errors import ShapeError, TrainingError, WeightFileError
from .layers import (
    Parameter,
    conv2d_backward,
    conv2d_forward,
    dense_backward,
    dense_forward,
    dropout_backward,
    dropout_forward,
    global_avg_pool_backward,
    global_avg_pool_forward,
    maxpool2_backward,
    maxpool2_forward,
    relu_backward,
    relu_forward,
    sigmoid_backward,
    sigmoid_forward,
)

VGG16_BLOCKS = ((2, 64), (2, 128), (3, 256), (3, 512), (3, 512))
VGG_TINY_BLOCKS = ((1, 8), (1, 16))

WEIGHT_MAGIC = b"AGW1"


@dataclass(frozen=True)
class ArchitectureSpec:
    name: str
    input_shape: tuple[int, int, int]
    conv_plan: tuple[tuple[int, int], ...]
    attention_enabled: bool
    tap_x: int
    tap_g: int
    head_hidden: int = 10
    head_out: int = 1
    dropout_rate: float = 0.5
    head_init_mean: float = 0.0  # compatibility switch; 1.0 reproduces the mean-one variant


@dataclass(frozen=True)
class LayerDef:
    kind: str  # "conv" or "pool"
    name: str
    in_channels: int
    out_channels: int


def vgg16_spec(attention: bool = True, input_hw: tuple[int, int] = (128, 128), in_channels: int = 3,
               dropout_rate: float = 0.5, head_init_mean: float = 0.0) -> ArchitectureSpec:
    return ArchitectureSpec(
        name="vgg16",
        input_shape=(input_hw[0], input_hw[1], in_channels),
        conv_plan=VGG16_BLOCKS,
        attention_enabled=attention,
        tap_x=13,
        tap_g=18,
        dropout_rate=dropout_rate,
        head_init_mean=head_init_mean,
    )


def vgg_tiny_spec(attention: bool = True, input_hw: tuple[int, int] = (32, 32), in_channels: int = 1,
                  dropout_rate: float = 0.5, head_init_mean: float = 0.0) -> ArchitectureSpec:
    # taps mirror the full network: the conv feeding the last pool, and the last pool
    n_layers = sum(n + 1 for n, _ in VGG_TINY_BLOCKS)
    return ArchitectureSpec(
        name="vgg_tiny",
        input_shape=(input_hw[0], input_hw[1], in_channels),
        conv_plan=VGG_TINY_BLOCKS,
        attention_enabled=attention,
        tap_x=n_layers - 1,
        tap_g=n_layers,
        dropout_rate=dropout_rate,
        head_init_mean=head_init_mean,
    )


def layer_table(spec: ArchitectureSpec) -> list[LayerDef]:
    """Flat layer list; the layer at list position i has sequential index i + 1."""
    layers = []
    channels = spec.input_shape[2]
    for bi, (n_convs, out_ch) in enumerate(spec.conv_plan, start=1):
        for ci in range(1, n_convs + 1):
            layers.append(LayerDef("conv", f"block{bi}_conv{ci}", channels, out_ch))
            channels = out_ch
        layers.append(LayerDef("pool", f"block{bi}_pool", channels, channels))
    return layers


def _validate_spec(spec: ArchitectureSpec) -> list[LayerDef]:
    h, w, c = spec.input_shape
    if h < 1 or w < 1 or c < 1:
        raise ValueError(f"spec {spec.name!r}: input shape {spec.input_shape} must be positive")
    if not spec.conv_plan or any(n < 1 or ch < 1 for n, ch in spec.conv_plan):
        raise ValueError(f"spec {spec.name!r}: malformed conv plan {spec.conv_plan}")
    if spec.name == "vgg16" and (spec.conv_plan != VGG16_BLOCKS or spec.tap_x != 13 or spec.tap_g != 18):
        raise ValueError("spec 'vgg16': conv plan or tap indices deviate from the canonical layout")
    layers = layer_table(spec)
    n = len(layers)
    if not (1 <= spec.tap_x < spec.tap_g <= n):
        raise ValueError(f"spec {spec.name!r}: taps ({spec.tap_x}, {spec.tap_g}) must address layers 1..{n} in order")
    for i, layer in enumerate(layers, start=1):
        if layer.kind == "pool":
            if h % 2 or w % 2:
                raise ValueError(f"spec {spec.name!r}: layer {i} pools an odd {h} x {w} grid")
            h, w = h // 2, w // 2
    if not 0.0 <= spec.dropout_rate < 1.0:
        raise ValueError(f"spec {spec.name!r}: dropout rate {spec.dropout_rate} out of range")
    if spec.head_hidden < 1 or spec.head_out != 1:
        raise ValueError(f"spec {spec.name!r}: head ({spec.head_hidden}, {spec.head_out}) unsupported")
    return layers


def activation_shapes(spec: ArchitectureSpec) -> list[tuple[int, int, int]]:
    """Output shape of every layer, indexed 0 (input) through the last pool."""
    h, w, _ = spec.input_shape
    shapes = [spec.input_shape]
    for layer in layer_table(spec):
        if layer.kind == "pool":
            h, w = h // 2, w // 2
        shapes.append((h, w, layer.out_channels))
    return shapes


@dataclass
class Model:
    spec: ArchitectureSpec
    params: dict[str, Parameter]
    seed: int
    layers: list[LayerDef] = field(repr=False)
    gate: AttentionGateParams | None = field(repr=False)

    def zero_grads(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def backbone_param_names(self) -> list[str]:
        return [n for n in self.params if n.startswith("block")]

    def param_values(self) -> dict[str, np.ndarray]:
        return {n: p.value.copy() for n, p in self.params.items()}

    def set_param_values(self, values: dict[str, np.ndarray]) -> None:
        for name, arr in values.items():
            p = self.params[name]
            if p.value.shape != arr.shape:
                raise ShapeError(f"parameter {name!r}: cannot assign shape {arr.shape} to {p.value.shape}")
            p.value = np.array(arr, dtype=np.float64)


def build(spec: ArchitectureSpec, seed: int) -> Model:
    """Allocate and initialize all parameters; deterministic for a given seed."""
    layers = _validate_spec(spec)
    rng = np.random.default_rng(seed)
    params: dict[str, Parameter] = {}

    def add(p: Parameter) -> Parameter:
        params[p.name] = p
        return p

    for layer in layers:
        if layer.kind != "conv":
            continue
        fan_in = 9 * layer.in_channels
        add(Parameter(f"{layer.name}_w",
                      rng.normal(0.0, np.sqrt(2.0 / fan_in), (3, 3, layer.in_channels, layer.out_channels))))
        add(Parameter(f"{layer.name}_b", np.zeros(layer.out_channels)))

    gate = None
    shapes = activation_shapes(spec)
    if spec.attention_enabled:
        f_x = shapes[spec.tap_x][2]
        f_g = shapes[spec.tap_g][2]
        gate = init_attention_params(f_x, f_g, max(1, f_x // 2), rng)
        for p in gate.as_list():
            add(p)

    # replaced head layers: normal with variance 0.01 (sigma 0.1), zero biases
    feat = (shapes[spec.tap_x][2] + shapes[spec.tap_g][2]) if spec.attention_enabled else shapes[spec.tap_g][2]
    add(Parameter("head_fc1_w", rng.normal(spec.head_init_mean, 0.1, (feat, spec.head_hidden))))
    add(Parameter("head_fc1_b", np.zeros(spec.head_hidden)))
    add(Parameter("head_fc2_w", rng.normal(spec.head_init_mean, 0.1, (spec.head_hidden, spec.head_out))))
    add(Parameter("head_fc2_b", np.zeros(spec.head_out)))

    return Model(spec=spec, params=params, seed=seed, layers=layers, gate=gate)


@dataclass
class ModelCache:
    layer_caches: list
    final_shape: tuple
    gate_cache: object
    gap_gated: tuple | None
    gap_g: tuple
    fc1: tuple
    relu1: np.ndarray
    drop: tuple
    fc2: tuple
    sig: np.ndarray
    consumed: bool = False


def forward(model: Model, image: np.ndarray, training: bool = False, rng=None,
            dropout_mask: np.ndarray | None = None, need_cache: bool | None = None):
    """Run the classifier on one image; returns (prediction in (0, 1), cache).

    The cache (kept only when training, or when ``need_cache`` forces it) is
    required by :func:`backward` and is valid for exactly one backward call.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.shape != model.spec.input_shape:
        raise ShapeError(f"input: expected shape {model.spec.input_shape}, got {image.shape}")
    if need_cache is None:
        need_cache = training

    spec = model.spec
    caches = []
    cur = image
    x_tap = g_tap = None
    for i, layer in enumerate(model.layers, start=1):
        try:
            if layer.kind == "conv":
                z, conv_cache = conv2d_forward(cur, model.params[f"{layer.name}_w"].value,
                                               model.params[f"{layer.name}_b"].value)
                cur, relu_cache = relu_forward(z)
                if need_cache:
                    caches.append((layer.name, conv_cache, relu_cache))
            else:
                cur, pool_cache = maxpool2_forward(cur)
                if need_cache:
                    caches.append((layer.name, pool_cache))
        except ShapeError as exc:
            raise ShapeError(f"layer {i} ({layer.name}): {exc}") from None
        if i == spec.tap_x:
            x_tap = cur
        if i == spec.tap_g:
            g_tap = cur

    gate_out = gate_cache = None
    gap_gated_cache = None
    if spec.attention_enabled:
        gate_out, gate_cache = attention_forward(x_tap, g_tap, model.gate)
        feat_gated, gap_gated_cache = global_avg_pool_forward(gate_out.gated)
        feat_g, gap_g_cache = global_avg_pool_forward(g_tap)
        feature = np.concatenate([feat_gated, feat_g])
    else:
        feature, gap_g_cache = global_avg_pool_forward(g_tap)

    z1, fc1_cache = dense_forward(feature, model.params["head_fc1_w"].value, model.params["head_fc1_b"].value)
    a1, relu1_cache = relu_forward(z1)
    dropped, drop_cache = dropout_forward(a1, spec.dropout_rate, training, rng, dropout_mask)
    z2, fc2_cache = dense_forward(dropped, model.params["head_fc2_w"].value, model.params["head_fc2_b"].value)
    yhat, sig_cache = sigmoid_forward(z2)

    cache = None
    if need_cache:
        cache = ModelCache(
            layer_caches=caches,
            final_shape=cur.shape,
            gate_cache=gate_cache,
            gap_gated=gap_gated_cache,
            gap_g=gap_g_cache,
            fc1=fc1_cache,
            relu1=relu1_cache,
            drop=drop_cache,
            fc2=fc2_cache,
            sig=sig_cache,
        )
    return float(yhat[0]), cache


def backward(model: Model, cache: ModelCache, d_prediction: float) -> np.ndarray:
    """Accumulate gradients of a scalar loss into every parameter; returns d(input)."""
    if cache is None:
        raise TrainingError("backward needs the cache of a training-mode forward call")
    if cache.consumed:
        raise TrainingError("forward cache already consumed by a previous backward call")
    cache.consumed = True
    spec = model.spec

    d = sigmoid_backward(cache.sig, np.array([float(d_prediction)]))
    d_dropped, d_w2, d_b2 = dense_backward(cache.fc2, d)
    model.params["head_fc2_w"].grad += d_w2
    model.params["head_fc2_b"].grad += d_b2
    d_a1 = dropout_backward(cache.drop, d_dropped)
    d_z1 = relu_backward(cache.relu1, d_a1)
    d_feature, d_w1, d_b1 = dense_backward(cache.fc1, d_z1)
    model.params["head_fc1_w"].grad += d_w1
    model.params["head_fc1_b"].grad += d_b1

    d_x_tap = None
    if spec.attention_enabled:
        f_x = model.gate.f_x
        d_gated = global_avg_pool_backward(cache.gap_gated, d_feature[:f_x])
        gate_grads = attention_backward(cache.gate_cache, d_gated)
        model.gate.w_x.grad += gate_grads.d_w_x
        model.gate.w_g.grad += gate_grads.d_w_g
        model.gate.b_g.grad += gate_grads.d_b_g
        model.gate.psi.grad += gate_grads.d_psi
        model.gate.b_psi.grad += gate_grads.d_b_psi
        d_g_total = global_avg_pool_backward(cache.gap_g, d_feature[f_x:]) + gate_grads.d_g
        d_x_tap = gate_grads.d_x
    else:
        d_g_total = global_avg_pool_backward(cache.gap_g, d_feature)

    running = np.zeros(cache.final_shape)
    for i in range(len(model.layers), 0, -1):
        if i == spec.tap_g:
            running = running + d_g_total
        if i == spec.tap_x and d_x_tap is not None:
            running = running + d_x_tap
        entry = cache.layer_caches[i - 1]
        layer = model.layers[i - 1]
        if layer.kind == "conv":
            _, conv_cache, relu_cache = entry
            d_z = relu_backward(relu_cache, running)
            running, d_w, d_b = conv2d_backward(conv_cache, d_z)
            model.params[f"{layer.name}_w"].grad += d_w
            model.params[f"{layer.name}_b"].grad += d_b
        else:
            running = maxpool2_backward(entry[1], running)
    return running


# ---------------------------------------------------------------------------
# Weight files: magic "AGW1", little-endian, 32-bit float payloads
# ---------------------------------------------------------------------------

def write_weight_file(path, tensors: dict[str, np.ndarray]) -> None:
    """Write name/shape/data records; values are narrowed to 32-bit floats."""
    blob = bytearray()
    blob += WEIGHT_MAGIC
    blob += struct.pack("<I", len(tensors))
    for name, arr in tensors.items():
        encoded = name.encode("utf-8")
        arr = np.asarray(arr)
        blob += struct.pack("<H", len(encoded))
        blob += encoded
        blob += struct.pack("<B", arr.ndim)
        blob += struct.pack(f"<{arr.ndim}I", *arr.shape)
        blob += np.ascontiguousarray(arr, dtype="<f4").tobytes()
    Path(path).write_bytes(bytes(blob))


def read_weight_file(path) -> dict[str, np.ndarray]:
    """Parse a weight file; payloads come back widened to 64-bit floats."""
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != WEIGHT_MAGIC:
        raise WeightFileError(f"{path}: bad magic, not a weight file")
    pos = 4

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise WeightFileError(f"{path}: truncated file while reading {what}")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    (count,) = struct.unpack("<I", take(4, "tensor count"))
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2, "name length"))
        name = take(name_len, "tensor name").decode("utf-8")
        (rank,) = struct.unpack("<B", take(1, f"rank of {name!r}"))
        shape = struct.unpack(f"<{rank}I", take(4 * rank, f"extents of {name!r}"))
        n_values = int(np.prod(shape, dtype=np.int64)) if rank else 1
        raw = take(4 * n_values, f"data of {name!r}")
        tensors[name] = np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(shape)
    if pos != len(data):
        raise WeightFileError(f"{path}: {len(data) - pos} trailing bytes after the last tensor")
    return tensors


def save_weights(model: Model, path, names: list[str] | None = None) -> None:
    """Save all parameters, or the named subset, in parameter order."""
    if names is None:
        tensors = {n: p.value for n, p in model.params.items()}
    else:
        unknown = [n for n in names if n not in model.params]
        if unknown:
            raise WeightFileError(f"cannot save unknown parameters {unknown}")
        tensors = {n: model.params[n].value for n in model.params if n in set(names)}
    write_weight_file(path, tensors)


def load_weights(model: Model, path) -> list[str]:
    """Load matching tensors into the model; absent parameters keep their values.

    Every tensor in the file must name a model parameter and match its shape,
    so a backbone-only file realizes transfer: the head (and gate) stay at
    their fresh initialization.
    """
    tensors = read_weight_file(path)
    for name, arr in tensors.items():
        if name not in model.params:
            raise WeightFileError(f"{path}: tensor {name!r} does not exist in the model")
        expected = model.params[name].value.shape
        if arr.shape != expected:
            raise WeightFileError(f"{path}: tensor {name!r} has shape {arr.shape}, model expects {expected}")
    for name, arr in tensors.items():
        model.params[name].value = arr
    return sorted(tensors)
