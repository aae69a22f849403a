"""Keras functional graph -> ONNX node list (NHWC to NCHW).

Walks ``model.get_config()`` connectivity (Keras 3 format) together with
the live layers' weights. Supports the layer classes appearing in the five
exported architectures: Conv2D, DepthwiseConv2D, SeparableConv2D,
BatchNormalization, Activation(relu), ReLU(max_value), ZeroPadding2D,
Cropping2D, MaxPooling2D, AveragePooling2D, GlobalAveragePooling2D, Add,
Concatenate, Dropout (identity) and InputLayer.

Keras SAME padding resolves to explicit asymmetric pads (TensorFlow puts
the odd pixel at the end), which requires tracking spatial shapes through
the graph; shapes also provide the final output check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .onnx_writer import Node, build_model


class UnsupportedLayer(ValueError):
    pass


def _same_pads(size: int, stride: int, effective_kernel: int) -> tuple[int, int]:
    out = math.ceil(size / stride)
    total = max((out - 1) * stride + effective_kernel - size, 0)
    return total // 2, total - total // 2


def _pool_out(size: int, pad: tuple[int, int], kernel: int, stride: int) -> int:
    return (size + pad[0] + pad[1] - kernel) // stride + 1


@dataclass
class _State:
    nodes: list[Node] = field(default_factory=list)
    initializers: dict[str, np.ndarray] = field(default_factory=dict)
    # tensor name -> (channels, height, width), batch dim implied
    shapes: dict[str, tuple[int, int, int]] = field(default_factory=dict)

    def emit(self, op: str, inputs: list[str], output: str, name: str = "", **attrs):
        self.nodes.append(Node(op, inputs, [output], attrs, name or output))
        return output

    def weight(self, name: str, array: np.ndarray) -> str:
        self.initializers[name] = np.ascontiguousarray(array)
        return name


def _history(entry) -> list[tuple[str, int, int]]:
    """Flatten one inbound argument into (layer, node, tensor) triples."""
    if isinstance(entry, dict) and entry.get("class_name") == "__keras_tensor__":
        return [tuple(entry["config"]["keras_history"])]
    if isinstance(entry, (list, tuple)):
        out = []
        for item in entry:
            out.extend(_history(item))
        return out
    return []


def _inbound_layers(layer_cfg: dict) -> list[str]:
    names = []
    for node in layer_cfg.get("inbound_nodes", []):
        if not isinstance(node, dict) or "args" not in node:
            raise UnsupportedLayer(
                "unrecognized inbound_nodes format (Keras 3 get_config expected)")
        for arg in node["args"]:
            for layer_name, node_index, _ in _history(arg):
                if node_index != 0:
                    raise UnsupportedLayer("shared layers are not supported")
                names.append(layer_name)
    return names


def _conv_attrs(state: _State, src: str, config: dict,
                kernel: tuple[int, int]) -> tuple[dict, tuple[int, int]]:
    """ONNX Conv/pool attrs from a keras config, resolving SAME padding."""
    strides = tuple(config.get("strides") or kernel)
    dilation = tuple(config.get("dilation_rate", (1, 1)))
    _, h, w = state.shapes[src]
    eff = ((kernel[0] - 1) * dilation[0] + 1, (kernel[1] - 1) * dilation[1] + 1)
    if config.get("padding", "valid") == "same":
        ph = _same_pads(h, strides[0], eff[0])
        pw = _same_pads(w, strides[1], eff[1])
    else:
        ph = pw = (0, 0)
    attrs = {
        "kernel_shape": list(kernel),
        "strides": list(strides),
        "dilations": list(dilation),
        "pads": [ph[0], pw[0], ph[1], pw[1]],
    }
    out_hw = (_pool_out(h, ph, eff[0], strides[0]), _pool_out(w, pw, eff[1], strides[1]))
    return attrs, out_hw


def _fused_activation(state: _State, config: dict, name: str, tensor: str) -> str:
    activation = config.get("activation", "linear")
    if activation in (None, "linear"):
        return tensor
    if activation == "relu":
        return state.emit("Relu", [tensor], f"{name}_act")
    raise UnsupportedLayer(f"fused activation {activation!r} in {name}")


def _convert_conv(state: _State, name: str, config: dict, weights, src: str) -> str:
    groups = int(config.get("groups", 1))
    kernel = tuple(config["kernel_size"])
    attrs, out_hw = _conv_attrs(state, src, config, kernel)
    attrs["group"] = groups
    # keras kernel (kh, kw, cin/groups, filters) -> (filters, cin/groups, kh, kw)
    w = state.weight(f"{name}_w", weights[0].transpose(3, 2, 0, 1))
    inputs = [src, w]
    if config.get("use_bias", True):
        inputs.append(state.weight(f"{name}_b", weights[1]))
    out = state.emit("Conv", inputs, name, **attrs)
    state.shapes[out] = (int(config["filters"]),) + out_hw
    return _fused_activation(state, config, name, out)


def _convert_depthwise(state: _State, name: str, config: dict, weights,
                       src: str) -> str:
    channels = state.shapes[src][0]
    multiplier = int(config.get("depth_multiplier", 1))
    kernel = tuple(config["kernel_size"])
    attrs, out_hw = _conv_attrs(state, src, config, kernel)
    attrs["group"] = channels
    # keras (kh, kw, cin, mult) -> (cin*mult, 1, kh, kw); keras orders the
    # output channels channel-major, matching grouped-conv output order
    dw = weights[0].transpose(2, 3, 0, 1).reshape(channels * multiplier, 1, *kernel)
    inputs = [src, state.weight(f"{name}_w", dw)]
    if config.get("use_bias", True):
        inputs.append(state.weight(f"{name}_b", weights[1]))
    out = state.emit("Conv", inputs, name, **attrs)
    state.shapes[out] = (channels * multiplier,) + out_hw
    return _fused_activation(state, config, name, out)


def _convert_separable(state: _State, name: str, config: dict, weights,
                       src: str) -> str:
    channels = state.shapes[src][0]
    multiplier = int(config.get("depth_multiplier", 1))
    filters = int(config["filters"])
    kernel = tuple(config["kernel_size"])
    attrs, out_hw = _conv_attrs(state, src, config, kernel)
    attrs["group"] = channels

    dw = weights[0].transpose(2, 3, 0, 1).reshape(channels * multiplier, 1, *kernel)
    depth_out = state.emit(
        "Conv", [src, state.weight(f"{name}_dw", dw)], f"{name}_depthwise", **attrs)
    state.shapes[depth_out] = (channels * multiplier,) + out_hw

    pw = weights[1].transpose(3, 2, 0, 1)  # (1,1,cin*mult,filters) -> OIHW
    inputs = [depth_out, state.weight(f"{name}_pw", pw)]
    if config.get("use_bias", True):
        inputs.append(state.weight(f"{name}_b", weights[2]))
    out = state.emit("Conv", inputs, name, kernel_shape=[1, 1], strides=[1, 1],
                     dilations=[1, 1], pads=[0, 0, 0, 0], group=1)
    state.shapes[out] = (filters,) + out_hw
    return _fused_activation(state, config, name, out)


def _convert_batchnorm(state: _State, name: str, config: dict, layer, src: str) -> str:
    axis = config.get("axis", -1)
    if isinstance(axis, (list, tuple)):
        axis = axis[0]
    if axis not in (-1, 3):
        raise UnsupportedLayer(f"BatchNormalization over axis {axis}")
    channels = state.shapes[src][0]
    gamma = layer.gamma.numpy() if layer.gamma is not None else np.ones(channels, np.float32)
    beta = layer.beta.numpy() if layer.beta is not None else np.zeros(channels, np.float32)
    mean = layer.moving_mean.numpy()
    var = layer.moving_variance.numpy()
    out = state.emit(
        "BatchNormalization",
        [src,
         state.weight(f"{name}_gamma", gamma),
         state.weight(f"{name}_beta", beta),
         state.weight(f"{name}_mean", mean),
         state.weight(f"{name}_var", var)],
        name, epsilon=float(config.get("epsilon", 1e-3)))
    state.shapes[out] = state.shapes[src]
    return out


def _convert_pool(state: _State, name: str, config: dict, src: str,
                  kind: str) -> str:
    kernel = tuple(config["pool_size"])
    attrs, out_hw = _conv_attrs(state, src, config, kernel)
    attrs.pop("dilations")
    attrs.pop("group", None)
    if kind == "AveragePool":
        attrs["count_include_pad"] = 0  # TF averages over in-bounds pixels only
    out = state.emit(kind, [src], name, **attrs)
    state.shapes[out] = (state.shapes[src][0],) + out_hw
    return out


def _convert_zero_padding(state: _State, name: str, config: dict, src: str) -> str:
    (top, bottom), (left, right) = config["padding"]
    pads = np.array([0, 0, top, left, 0, 0, bottom, right], dtype=np.int64)
    out = state.emit("Pad", [src, state.weight(f"{name}_pads", pads)], name,
                     mode="constant")
    c, h, w = state.shapes[src]
    state.shapes[out] = (c, h + top + bottom, w + left + right)
    return out


def _convert_cropping(state: _State, name: str, config: dict, src: str) -> str:
    (top, bottom), (left, right) = config["cropping"]
    c, h, w = state.shapes[src]
    out = state.emit(
        "Slice",
        [src,
         state.weight(f"{name}_starts", np.array([top, left], dtype=np.int64)),
         state.weight(f"{name}_ends", np.array([h - bottom, w - right], dtype=np.int64)),
         state.weight(f"{name}_axes", np.array([2, 3], dtype=np.int64))],
        name)
    state.shapes[out] = (c, h - top - bottom, w - left - right)
    return out


def _convert_relu_layer(state: _State, name: str, config: dict, src: str) -> str:
    if config.get("negative_slope") or config.get("threshold"):
        raise UnsupportedLayer(f"ReLU variants in {name}")
    max_value = config.get("max_value")
    if max_value is None:
        out = state.emit("Relu", [src], name)
    else:
        out = state.emit(
            "Clip",
            [src,
             state.weight(f"{name}_min", np.float32(0.0).reshape(())),
             state.weight(f"{name}_max", np.float32(max_value).reshape(()))],
            name)
    state.shapes[out] = state.shapes[src]
    return out


def convert_functional(model, batch: int = 1):
    """Returns (nodes, initializers, (input name, shape), (output name, shape))."""
    config = model.get_config()
    outputs_of: dict[str, str] = {}
    state = _State()
    input_name = None
    input_shape = None

    for layer_cfg in config["layers"]:
        kind = layer_cfg["class_name"]
        cfg = layer_cfg["config"]
        name = cfg["name"]
        sources = [outputs_of[n] for n in _inbound_layers(layer_cfg)]

        if kind == "InputLayer":
            shape = cfg.get("batch_shape") or cfg.get("batch_input_shape")
            if shape is None or len(shape) != 4:
                raise UnsupportedLayer(f"input layer {name} has shape {shape}")
            _, h, w, c = shape
            input_name = name
            input_shape = (batch, c, h, w)
            state.shapes[name] = (c, h, w)
            outputs_of[name] = name
            continue

        layer = model.get_layer(name)
        src = sources[0] if sources else None
        if kind == "Conv2D":
            out = _convert_conv(state, name, cfg, layer.get_weights(), src)
        elif kind == "DepthwiseConv2D":
            out = _convert_depthwise(state, name, cfg, layer.get_weights(), src)
        elif kind == "SeparableConv2D":
            out = _convert_separable(state, name, cfg, layer.get_weights(), src)
        elif kind == "BatchNormalization":
            out = _convert_batchnorm(state, name, cfg, layer, src)
        elif kind == "Activation":
            activation = cfg.get("activation")
            if activation == "relu":
                out = state.emit("Relu", [src], name)
                state.shapes[out] = state.shapes[src]
            elif activation == "linear":
                out = src
            else:
                raise UnsupportedLayer(f"activation {activation!r} in {name}")
        elif kind == "ReLU":
            out = _convert_relu_layer(state, name, cfg, src)
        elif kind == "ZeroPadding2D":
            out = _convert_zero_padding(state, name, cfg, src)
        elif kind == "Cropping2D":
            out = _convert_cropping(state, name, cfg, src)
        elif kind == "MaxPooling2D":
            out = _convert_pool(state, name, cfg, src, "MaxPool")
        elif kind == "AveragePooling2D":
            out = _convert_pool(state, name, cfg, src, "AveragePool")
        elif kind == "GlobalAveragePooling2D":
            pooled = state.emit("GlobalAveragePool", [src], f"{name}_pooled")
            out = state.emit("Flatten", [pooled], name, axis=1)
            state.shapes[out] = (state.shapes[src][0], 1, 1)
        elif kind == "Add":
            out = sources[0]
            for index, other in enumerate(sources[1:]):
                merged = name if index == len(sources) - 2 else f"{name}_{index}"
                out = state.emit("Add", [out, other], merged)
            state.shapes[out] = state.shapes[sources[0]]
        elif kind == "Concatenate":
            axis = cfg.get("axis", -1)
            if axis not in (-1, 3):
                raise UnsupportedLayer(f"Concatenate over axis {axis}")
            out = state.emit("Concat", sources, name, axis=1)
            c = sum(state.shapes[s][0] for s in sources)
            state.shapes[out] = (c,) + state.shapes[sources[0]][1:]
        elif kind == "Dropout":
            out = src
        else:
            raise UnsupportedLayer(f"layer class {kind} ({name})")
        outputs_of[name] = out

    if input_name is None:
        raise UnsupportedLayer("model has no input layer")
    # single-output models use a flat [name, node, tensor] triple
    outputs_cfg = config["output_layers"]
    if isinstance(outputs_cfg[0], str):
        output_layer = outputs_cfg[0]
    elif len(outputs_cfg) == 1:
        output_layer = outputs_cfg[0][0]
    else:
        raise UnsupportedLayer("multi-output models are not supported")
    output_name = outputs_of[output_layer]
    channels = state.shapes[output_name][0]
    return state.nodes, state.initializers, (input_name, input_shape), \
        (output_name, (batch, channels))


def model_to_onnx_bytes(model, graph_name: str, batch: int = 1) -> tuple[bytes, int]:
    """Serialize a functional model; returns (onnx bytes, output dimension)."""
    nodes, initializers, (in_name, in_shape), (out_name, out_shape) = \
        convert_functional(model, batch)
    blob = build_model(nodes, initializers, in_name, in_shape, out_name, out_shape,
                       graph_name=graph_name)
    return blob, out_shape[1]
