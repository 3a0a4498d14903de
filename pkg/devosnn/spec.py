"""Network architecture description: layer specs, parser and validator."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

WEIGHTED_KINDS = ("conv", "fc")
POOL_KINDS = ("avgpool", "maxpool")

_CONV_RE = re.compile(r"^(\d+)C(\d+)$", re.IGNORECASE)
_FC_RE = re.compile(r"^(\d+)FC$", re.IGNORECASE)
_POOL_RE = re.compile(r"^(Avg|Max)Pool(\d+)$", re.IGNORECASE)


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # "conv" | "avgpool" | "maxpool" | "fc"
    out_channels: int = 0
    kernel_size: int = 0
    stride: int = 1
    padding: int = 0
    window: int = 0
    out_units: int = 0

    @property
    def weighted(self) -> bool:
        return self.kind in WEIGHTED_KINDS

    @property
    def unit_count(self) -> int:
        """Channels for conv layers, neurons for fc layers, 0 for pools."""
        if self.kind == "conv":
            return self.out_channels
        if self.kind == "fc":
            return self.out_units
        return 0

    def token(self) -> str:
        if self.kind == "conv":
            return f"{self.out_channels}C{self.kernel_size}"
        if self.kind == "fc":
            return f"{self.out_units}FC"
        prefix = "AvgPool" if self.kind == "avgpool" else "MaxPool"
        return f"{prefix}{self.window}"


def conv(out_channels: int, kernel_size: int, stride: int = 1, padding: int | None = None) -> LayerSpec:
    if padding is None:
        padding = kernel_size // 2
    return LayerSpec("conv", out_channels=out_channels, kernel_size=kernel_size,
                     stride=stride, padding=padding)


def pool(kind: str, window: int, stride: int | None = None) -> LayerSpec:
    return LayerSpec(kind, window=window, stride=window if stride is None else stride)


def fc(out_units: int) -> LayerSpec:
    return LayerSpec("fc", out_units=out_units)


@dataclass
class NetworkSpec:
    layers: list[LayerSpec]
    input_shape: tuple[int, int, int]
    time_steps: int = 8
    tau: float = 0.2
    v_th: float = 0.5
    a: float = 1.0
    _shapes: list[tuple[int, ...]] = field(default_factory=list, init=False, repr=False, compare=False)

    @property
    def weighted_indices(self) -> list[int]:
        """Positions in ``layers`` of the conv/fc layers, in order."""
        return [i for i, layer in enumerate(self.layers) if layer.weighted]

    @property
    def weighted_layers(self) -> list[LayerSpec]:
        return [layer for layer in self.layers if layer.weighted]

    @property
    def kinds(self) -> list[str]:
        """Kind of every weighted layer, in order."""
        return [layer.kind for layer in self.weighted_layers]

    @property
    def class_count(self) -> int:
        return self.layers[-1].out_units

    @property
    def architecture(self) -> str:
        return format_architecture(self.layers)

    def output_shapes(self) -> list[tuple[int, ...]]:
        """Per-layer activation shape (without batch and time axes)."""
        if not self._shapes:
            self._shapes = _infer_shapes(self.layers, self.input_shape)
        return list(self._shapes)

    def input_shapes(self) -> list[tuple[int, ...]]:
        return [tuple(self.input_shape)] + self.output_shapes()[:-1]

    def weight_shapes(self) -> list[tuple[int, ...]]:
        shapes: list[tuple[int, ...]] = []
        for layer, in_shape in zip(self.layers, self.input_shapes()):
            if layer.kind == "conv":
                shapes.append((layer.out_channels, in_shape[0], layer.kernel_size, layer.kernel_size))
            elif layer.kind == "fc":
                shapes.append((layer.out_units, math.prod(in_shape)))
        return shapes


def _infer_shapes(layers: list[LayerSpec], input_shape: tuple[int, ...]) -> list[tuple[int, ...]]:
    shapes: list[tuple[int, ...]] = []
    shape = tuple(input_shape)
    for layer in layers:
        if layer.kind == "conv":
            _, h, w = shape
            k, s, p = layer.kernel_size, layer.stride, layer.padding
            shape = (layer.out_channels, (h + 2 * p - k) // s + 1, (w + 2 * p - k) // s + 1)
        elif layer.kind in POOL_KINDS:
            c, h, w = shape
            k, s = layer.window, layer.stride
            shape = (c, (h - k) // s + 1, (w - k) // s + 1)
        else:
            shape = (layer.out_units,)
        shapes.append(shape)
    return shapes


def parse_architecture(text: str) -> list[LayerSpec]:
    """Parse ``Input-15C3-AvgPool2-40C3-AvgPool2-Flatten-300FC-10FC``.

    ``Input`` and ``Flatten`` are markers and produce no layer; fc layers
    flatten their input implicitly. Raises ValueError listing every bad token.
    """
    layers: list[LayerSpec] = []
    errors: list[str] = []
    tokens = [t.strip() for t in text.strip().split("-") if t.strip()]
    for i, token in enumerate(tokens):
        if token.lower() in ("input", "flatten"):
            continue
        m = _CONV_RE.match(token)
        if m:
            layers.append(conv(int(m.group(1)), int(m.group(2))))
            continue
        m = _FC_RE.match(token)
        if m:
            layers.append(fc(int(m.group(1))))
            continue
        m = _POOL_RE.match(token)
        if m:
            layers.append(pool(f"{m.group(1).lower()}pool", int(m.group(2))))
            continue
        errors.append(f"token {i} ({token!r}) is not a layer")
    if errors:
        raise ValueError("Architecture parse failed:\n" + "\n".join(f"  - {e}" for e in errors))
    return layers


def format_architecture(layers: list[LayerSpec]) -> str:
    tokens = ["Input"]
    flattened = False
    for layer in layers:
        if layer.kind == "fc" and not flattened:
            if len(tokens) > 1:
                tokens.append("Flatten")
            flattened = True
        tokens.append(layer.token())
    return "-".join(tokens)


def validate_network(spec: NetworkSpec) -> None:
    """Check every structural invariant. Raises ValueError on problems."""
    errors: list[str] = []

    if not spec.layers:
        raise ValueError("Network validation failed:\n  - network has no layers")
    if len(spec.input_shape) != 3 or any(int(d) < 1 for d in spec.input_shape):
        errors.append(f"input_shape must be (channels, height, width) >= 1, got {spec.input_shape}")
    if spec.time_steps < 1:
        errors.append(f"time_steps must be >= 1, got {spec.time_steps}")
    if not 0 <= spec.tau < 1:
        errors.append(f"tau must satisfy 0 <= tau < 1, got {spec.tau}")
    if spec.a <= 0:
        errors.append(f"a must be > 0, got {spec.a}")
    if spec.v_th <= 0:
        errors.append(f"v_th must be > 0, got {spec.v_th}")

    last = spec.layers[-1]
    if last.kind != "fc":
        errors.append("final layer must be fc (the class readout)")

    seen_fc = False
    for i, layer in enumerate(spec.layers):
        label = f"layer {i} ({layer.token()})"
        if layer.kind == "conv":
            if seen_fc:
                errors.append(f"{label}: conv layer after fc layer")
            if layer.out_channels < 1 or layer.kernel_size < 1 or layer.stride < 1:
                errors.append(f"{label}: out_channels, kernel_size and stride must be >= 1")
            if layer.padding < 0:
                errors.append(f"{label}: padding must be >= 0")
        elif layer.kind in POOL_KINDS:
            if layer.window < 1 or layer.stride < 1:
                errors.append(f"{label}: window and stride must be >= 1")
            if seen_fc:
                errors.append(f"{label}: pool layer after fc layer")
            prev = spec.layers[i - 1] if i > 0 else None
            if prev is None or prev.kind != "conv":
                errors.append(f"{label}: pool layers must follow a spiking conv layer")
        elif layer.kind == "fc":
            seen_fc = True
            if layer.out_units < 1:
                errors.append(f"{label}: out_units must be >= 1")
        else:
            errors.append(f"{label}: unknown layer kind {layer.kind!r}")

    if errors:
        raise ValueError("Network validation failed:\n" + "\n".join(f"  - {e}" for e in errors))

    for i, shape in enumerate(_infer_shapes(spec.layers, spec.input_shape)):
        if any(d < 1 for d in shape):
            errors.append(f"layer {i} ({spec.layers[i].token()}): output shape {shape} is empty")
    if errors:
        raise ValueError("Network validation failed:\n" + "\n".join(f"  - {e}" for e in errors))


def build_network_spec(
    architecture: str,
    input_shape: tuple[int, int, int] | list[int],
    time_steps: int = 8,
    tau: float = 0.2,
    v_th: float = 0.5,
    a: float = 1.0,
) -> NetworkSpec:
    """Parse an architecture string and return a validated NetworkSpec."""
    spec = NetworkSpec(
        layers=parse_architecture(architecture),
        input_shape=tuple(int(d) for d in input_shape),
        time_steps=int(time_steps),
        tau=float(tau),
        v_th=float(v_th),
        a=float(a),
    )
    validate_network(spec)
    return spec
