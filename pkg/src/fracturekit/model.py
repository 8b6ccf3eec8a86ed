"""Architecture construction, parameter counting, inference with activation
capture, class-score gradients, and model-file persistence.

Label semantics everywhere: class 0 = "fractured", class 1 = "not fractured"
(lexicographic directory order).

Model file layout (little-endian):
    magic "FDXM" | version u32 | input C,H,W u32 x3 | layer count u32 |
    per layer: type u8 + arg u32 | payload f32[count_parameters] | crc32 u32
Payload order follows the layer list; per parameterized layer the weight
tensor precedes the bias. Conv weights are (out_ch, in_ch, krow, kcol),
dense weights (out_unit, in_unit).
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .errors import InvalidArgumentError, ModelFormatError

CLASS_NAMES = ("fractured", "not fractured")

# layer kind -> model-file type code
_KIND_CODES = {"conv": 1, "relu": 2, "pool": 3, "flatten": 4, "gap": 5, "dense": 6}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}

VGG19_CHANNELS = (64, 64, "P", 128, 128, "P", 256, 256, 256, 256, "P",
                  512, 512, 512, 512, "P", 512, 512, 512, 512, "P")


@dataclass(frozen=True)
class LayerSpec:
    kind: str            # conv | relu | pool | flatten | gap | dense
    arg: int = 0         # conv: out channels; dense: units

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise InvalidArgumentError(f"unknown layer kind {self.kind!r}")


@dataclass(frozen=True)
class ArchitectureSpec:
    input_shape: tuple[int, int, int]      # (C, H, W)
    layers: tuple[LayerSpec, ...]          # ends with Dense(2); softmax applied at the head

    def __post_init__(self):
        shapes = self.shape_chain()        # validates consistency
        if shapes[-1] != (2,):
            raise InvalidArgumentError(f"final output must be 2 logits, got {shapes[-1]}")

    def shape_chain(self) -> list[tuple]:
        """Shape after the input and after every layer; raises on mismatch."""
        shape: tuple = self.input_shape
        chain = [shape]
        for ls in self.layers:
            if ls.kind == "conv":
                if len(shape) != 3:
                    raise InvalidArgumentError("conv needs a (C,H,W) input")
                shape = (ls.arg, shape[1], shape[2])
            elif ls.kind == "pool":
                c, h, w = shape
                if h % 2 or w % 2:
                    raise InvalidArgumentError(f"pool needs even dims, got {h}x{w}")
                shape = (c, h // 2, w // 2)
            elif ls.kind == "flatten":
                shape = (int(np.prod(shape)),)
            elif ls.kind == "gap":
                shape = (shape[0],)
            elif ls.kind == "dense":
                if len(shape) != 1:
                    raise InvalidArgumentError("dense needs a flat input")
                shape = (ls.arg,)
            chain.append(shape)
        return chain

    def conv_indices(self) -> list[int]:
        return [i for i, ls in enumerate(self.layers) if ls.kind == "conv"]


def build_vgg19_modified(head: list[int]) -> ArchitectureSpec:
    """Modified VGG-19: the stock 16-conv base, Flatten, then Dense+ReLU per
    head entry, then Dense(2)."""
    if not head or any(u < 1 for u in head):
        raise InvalidArgumentError("head must be a non-empty list of positive unit counts")
    layers = []
    for c in VGG19_CHANNELS:
        layers.append(LayerSpec("pool") if c == "P" else LayerSpec("conv", c))
        if c != "P":
            layers.append(LayerSpec("relu"))
    layers.append(LayerSpec("flatten"))
    for units in head:
        layers += [LayerSpec("dense", units), LayerSpec("relu")]
    layers.append(LayerSpec("dense", 2))
    return ArchitectureSpec((3, 224, 224), tuple(layers))


def build_toy(channels: list[int], head: list[int], input_size: int = 64) -> ArchitectureSpec:
    """Small conv-pool blocks for desk-scale runs; input (3, size, size)."""
    if not channels or any(c < 1 for c in channels):
        raise InvalidArgumentError("channels must be a non-empty list of positive counts")
    if any(u < 1 for u in head):
        raise InvalidArgumentError("head units must be positive")
    layers = []
    for c in channels:
        layers += [LayerSpec("conv", c), LayerSpec("relu"), LayerSpec("pool")]
    layers.append(LayerSpec("flatten"))
    for units in head:
        layers += [LayerSpec("dense", units), LayerSpec("relu")]
    layers.append(LayerSpec("dense", 2))
    return ArchitectureSpec((3, input_size, input_size), tuple(layers))


def _param_shapes(spec: ArchitectureSpec) -> list[tuple[tuple, tuple] | None]:
    """Per layer: (weight shape, bias shape) or None."""
    chain = spec.shape_chain()
    out = []
    for ls, in_shape in zip(spec.layers, chain[:-1]):
        if ls.kind == "conv":
            out.append(((ls.arg, in_shape[0], 3, 3), (ls.arg,)))
        elif ls.kind == "dense":
            out.append(((ls.arg, in_shape[0]), (ls.arg,)))
        else:
            out.append(None)
    return out


def count_parameters(spec: ArchitectureSpec) -> int:
    total = 0
    for shapes in _param_shapes(spec):
        if shapes is not None:
            w, b = shapes
            total += int(np.prod(w)) + int(np.prod(b))
    return total


def layer_parameter_counts(spec: ArchitectureSpec) -> list[tuple[str, int]]:
    """(description, parameter count) per layer, for `inspect`."""
    rows = []
    for ls, shapes in zip(spec.layers, _param_shapes(spec)):
        n = 0 if shapes is None else int(np.prod(shapes[0])) + int(np.prod(shapes[1]))
        desc = ls.kind if ls.kind not in ("conv", "dense") else f"{ls.kind}({ls.arg})"
        rows.append((desc, n))
    return rows


@dataclass
class ModelParams:
    """Weight/bias tensors aligned with the spec's parameterized layers."""
    spec: ArchitectureSpec
    tensors: list[np.ndarray]  # flat list: w, b per parameterized layer in order
    seed: int | None = None
    init_scheme: str = "he-normal"

    def copy(self) -> "ModelParams":
        return ModelParams(self.spec, [t.copy() for t in self.tensors],
                           self.seed, self.init_scheme)


def init_params(spec: ArchitectureSpec, seed: int = 0) -> ModelParams:
    """He-normal weights (std = sqrt(2 / fan_in)), zero biases."""
    rng = np.random.default_rng(seed)
    tensors = []
    for shapes in _param_shapes(spec):
        if shapes is None:
            continue
        wshape, bshape = shapes
        fan_in = int(np.prod(wshape[1:]))
        std = np.sqrt(2.0 / fan_in)
        tensors.append((rng.standard_normal(wshape) * std).astype(nn.F32))
        tensors.append(np.zeros(bshape, nn.F32))
    return ModelParams(spec, tensors, seed=seed)


def build_layers(params: ModelParams) -> list[nn.Layer]:
    """Instantiate runtime layers sharing the parameter arrays (no copy)."""
    spec = params.spec
    layers: list[nn.Layer] = []
    ti = 0
    for ls, shapes in zip(spec.layers, _param_shapes(spec)):
        if ls.kind == "conv":
            w, b = params.tensors[ti], params.tensors[ti + 1]
            ti += 2
            layers.append(nn.Conv3x3(shapes[0][1], ls.arg, w, b))
        elif ls.kind == "dense":
            w, b = params.tensors[ti], params.tensors[ti + 1]
            ti += 2
            layers.append(nn.Dense(shapes[0][1], ls.arg, w, b))
        elif ls.kind == "relu":
            layers.append(nn.ReLU())
        elif ls.kind == "pool":
            layers.append(nn.MaxPool2x2())
        elif ls.kind == "flatten":
            layers.append(nn.Flatten())
        elif ls.kind == "gap":
            layers.append(nn.GlobalAvgPool())
    return layers


def _capture_position(spec: ArchitectureSpec, conv_layer: int) -> int:
    """Layer-list position after which the post-ReLU conv activation lives."""
    convs = spec.conv_indices()
    if conv_layer < 0 or conv_layer >= len(convs):
        raise InvalidArgumentError(f"conv layer index {conv_layer} out of range "
                                   f"(model has {len(convs)} conv layers)")
    pos = convs[conv_layer]
    if pos + 1 < len(spec.layers) and spec.layers[pos + 1].kind == "relu":
        pos += 1
    return pos


def forward_batch(params: ModelParams, x: np.ndarray,
                  capture_conv: int | None = None):
    """Batched forward pass.

    x: (N, C, H, W). Returns (logits (N,2), probabilities (N,2), captured
    activation or None). The captured activation is the post-ReLU output of
    the requested conv layer (index among conv layers).
    """
    if x.shape[1:] != params.spec.input_shape:
        raise InvalidArgumentError(f"input shape {x.shape[1:]} != model input "
                                   f"{params.spec.input_shape}")
    cap_pos = None if capture_conv is None else _capture_position(params.spec, capture_conv)
    captured = None
    out = np.asarray(x, nn.F32)
    for i, layer in enumerate(build_layers(params)):
        out = layer.forward(out)
        if cap_pos == i:
            captured = out
    return out, nn.softmax(out.astype(np.float64)), captured


def forward(params: ModelParams, x: np.ndarray, capture_conv: int | None = None):
    """Single-sample forward: x (C, H, W) -> (logits (2,), probs (2,), capture)."""
    logits, probs, cap = forward_batch(params, x[None], capture_conv)
    return logits[0], probs[0], None if cap is None else cap[0]


def class_score_gradient(params: ModelParams, x: np.ndarray, class_idx: int,
                         conv_layer: int):
    """Gradient of the pre-softmax logit for `class_idx` w.r.t. the captured
    conv activation, computed by backprop through the head only.

    Returns (activation (K,h,w), gradient with the same shape, probs (2,)).
    """
    if class_idx not in (0, 1):
        raise InvalidArgumentError("class_idx must be 0 or 1")
    cap_pos = _capture_position(params.spec, conv_layer)
    layers = build_layers(params)
    out = np.asarray(x[None], nn.F32)
    if out.shape[1:] != params.spec.input_shape:
        raise InvalidArgumentError(f"input shape {out.shape[1:]} != model input "
                                   f"{params.spec.input_shape}")
    captured = None
    for i, layer in enumerate(layers):
        out = layer.forward(out)
        if i == cap_pos:
            captured = out
    probs = nn.softmax(out[0].astype(np.float64))
    grad = np.zeros_like(out)
    grad[0, class_idx] = 1.0
    for i in range(len(layers) - 1, cap_pos, -1):
        grad = layers[i].backward(grad)
    return captured[0], grad[0], probs


MAGIC = b"FDXM"
FORMAT_VERSION = 1


def save_model(params: ModelParams, path: str):
    spec = params.spec
    header = bytearray()
    header += MAGIC
    header += struct.pack("<I", FORMAT_VERSION)
    header += struct.pack("<III", *spec.input_shape)
    header += struct.pack("<I", len(spec.layers))
    for ls in spec.layers:
        header += struct.pack("<BI", _KIND_CODES[ls.kind], ls.arg)
    payload = b"".join(np.ascontiguousarray(t, nn.F32).tobytes() for t in params.tensors)
    with open(path, "wb") as f:
        f.write(bytes(header) + payload + struct.pack("<I", zlib.crc32(payload)))


def load_model(path: str) -> ModelParams:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != MAGIC:
        raise ModelFormatError(f"bad magic {data[:4]!r}")
    if len(data) < 24:
        raise ModelFormatError("truncated header")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format version {version}")
    c, h, w = struct.unpack_from("<III", data, 8)
    (n_layers,) = struct.unpack_from("<I", data, 20)
    off = 24
    layers = []
    for _ in range(n_layers):
        if off + 5 > len(data):
            raise ModelFormatError("truncated layer table")
        code, arg = struct.unpack_from("<BI", data, off)
        off += 5
        if code not in _CODE_KINDS:
            raise ModelFormatError(f"unknown layer type code {code}")
        layers.append(LayerSpec(_CODE_KINDS[code], arg))
    try:
        spec = ArchitectureSpec((c, h, w), tuple(layers))
    except InvalidArgumentError as exc:
        raise ModelFormatError(f"inconsistent layer table: {exc}") from exc
    n_params = count_parameters(spec)
    expected = off + 4 * n_params + 4
    if len(data) != expected:
        raise ModelFormatError(f"payload length mismatch: file has {len(data)} bytes, "
                               f"expected {expected}")
    payload = data[off:off + 4 * n_params]
    (crc,) = struct.unpack_from("<I", data, off + 4 * n_params)
    if zlib.crc32(payload) != crc:
        raise ModelFormatError("payload CRC mismatch")
    flat = np.frombuffer(payload, dtype="<f4")
    tensors = []
    pos = 0
    for shapes in _param_shapes(spec):
        if shapes is None:
            continue
        for shape in shapes:
            n = int(np.prod(shape))
            tensors.append(flat[pos:pos + n].reshape(shape).astype(nn.F32))
            pos += n
    return ModelParams(spec, tensors)
