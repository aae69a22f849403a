"""NumPy execution of ONNX inference graphs.

Covers the op subset produced for convolutional feature extractors:
Conv (grouped, dilated, asymmetric pads), BatchNormalization, Relu, Clip,
Add, Mul, Concat, MaxPool, AveragePool, GlobalAveragePool, Pad, Slice,
Flatten, Reshape, Gemm, Identity. Tensors are NCHW float32.

Nodes must appear in topological order (the ONNX graph contract);
intermediate tensors are freed as soon as their last consumer ran, which
keeps peak memory bounded on deep graphs.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .proto import Model, load_model


def _pair(value, default) -> tuple[int, int]:
    if value is None:
        return default
    if len(value) == 1:
        return int(value[0]), int(value[0])
    return int(value[0]), int(value[1])


def _pads4(attrs) -> tuple[int, int, int, int]:
    pads = attrs.get("pads")
    if pads is None:
        return 0, 0, 0, 0
    # ONNX order: [h_begin, w_begin, h_end, w_end]
    return int(pads[0]), int(pads[1]), int(pads[2]), int(pads[3])


def _windows(x: np.ndarray, kh: int, kw: int, sh: int, sw: int,
             dh: int = 1, dw: int = 1) -> np.ndarray:
    """View of sliding windows: (N, C, OH, OW, KH, KW)."""
    kh_span = (kh - 1) * dh + 1
    kw_span = (kw - 1) * dw + 1
    win = sliding_window_view(x, (kh_span, kw_span), axis=(2, 3))
    win = win[:, :, ::sh, ::sw, ::dh, ::dw]
    return win


def _conv(x, weight, bias, attrs):
    group = int(attrs.get("group", 1))
    sh, sw = _pair(attrs.get("strides"), (1, 1))
    dh, dw = _pair(attrs.get("dilations"), (1, 1))
    pt, pl, pb, pr = _pads4(attrs)
    m, cg, kh, kw = weight.shape

    if pt or pl or pb or pr:
        x = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    n, c, _, _ = x.shape
    if c != cg * group:
        raise ValueError(f"Conv channel mismatch: input {c}, weight expects {cg * group}")

    win = _windows(x, kh, kw, sh, sw, dh, dw)
    oh, ow = win.shape[2], win.shape[3]
    mg = m // group
    # (N, g, OH*OW, cg*KH*KW) @ (g, cg*KH*KW, mg) batched over (N, g)
    win = win.reshape(n, group, cg, oh, ow, kh, kw)
    win = win.transpose(0, 1, 3, 4, 2, 5, 6).reshape(n, group, oh * ow, cg * kh * kw)
    wmat = weight.reshape(group, mg, cg * kh * kw).transpose(0, 2, 1)
    out = win @ wmat
    out = out.transpose(0, 1, 3, 2).reshape(n, m, oh, ow)
    if bias is not None:
        out = out + bias.reshape(1, -1, 1, 1)
    return out


def _batchnorm(x, scale, offset, mean, var, attrs):
    eps = attrs.get("epsilon", 1e-5)
    alpha = scale / np.sqrt(var + eps)
    beta = offset - mean * alpha
    return x * alpha.reshape(1, -1, 1, 1) + beta.reshape(1, -1, 1, 1)


def _maxpool(x, attrs):
    kh, kw = _pair(attrs.get("kernel_shape"), (1, 1))
    sh, sw = _pair(attrs.get("strides"), (1, 1))
    pt, pl, pb, pr = _pads4(attrs)
    if pt or pl or pb or pr:
        x = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)),
                   constant_values=-np.inf)
    win = _windows(x, kh, kw, sh, sw)
    return win.max(axis=(4, 5))


def _avgpool(x, attrs):
    kh, kw = _pair(attrs.get("kernel_shape"), (1, 1))
    sh, sw = _pair(attrs.get("strides"), (1, 1))
    pt, pl, pb, pr = _pads4(attrs)
    include_pad = int(attrs.get("count_include_pad", 0))
    padded = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    win = _windows(padded, kh, kw, sh, sw)
    total = win.sum(axis=(4, 5))
    if include_pad or not (pt or pl or pb or pr):
        return total / float(kh * kw)
    ones = np.ones((1, 1) + x.shape[2:], dtype=x.dtype)
    ones = np.pad(ones, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    counts = _windows(ones, kh, kw, sh, sw).sum(axis=(4, 5))
    return total / counts


def _pad_op(x, pads, value=0.0):
    pads = np.asarray(pads).ravel()
    rank = x.ndim
    begin, end = pads[:rank], pads[rank:]
    spec = tuple((int(b), int(e)) for b, e in zip(begin, end))
    return np.pad(x, spec, constant_values=value)


def _slice_op(x, starts, ends, axes=None, steps=None):
    rank = x.ndim
    axes = list(range(len(starts))) if axes is None else [int(a) % rank for a in axes]
    steps = [1] * len(starts) if steps is None else [int(s) for s in steps]
    spec = [slice(None)] * rank
    for start, stop, axis, step in zip(starts, ends, axes, steps):
        start, stop = int(start), int(stop)
        bound = x.shape[axis]
        # ONNX clamps out-of-range bounds (INT64_MAX means "to the end")
        if start < 0:
            start += bound
        if stop < 0:
            stop += bound
        stop = min(stop, bound)
        spec[axis] = slice(start, stop, step)
    return x[tuple(spec)]


def _gemm(a, b, c, attrs):
    alpha = attrs.get("alpha", 1.0)
    beta = attrs.get("beta", 1.0)
    if int(attrs.get("transA", 0)):
        a = a.T
    if int(attrs.get("transB", 0)):
        b = b.T
    out = alpha * (a @ b)
    if c is not None:
        out = out + beta * c
    return out


class GraphRunner:
    """Executes a parsed model on NumPy arrays."""

    def __init__(self, model: Model):
        self.graph = model.graph
        self._check_ops()

    @classmethod
    def from_path(cls, path) -> "GraphRunner":
        return cls(load_model(path))

    SUPPORTED = {
        "Conv", "BatchNormalization", "Relu", "Clip", "Add", "Mul", "Concat",
        "MaxPool", "AveragePool", "GlobalAveragePool", "Pad", "Slice",
        "Flatten", "Reshape", "Gemm", "Identity",
    }

    def _check_ops(self) -> None:
        unknown = {n.op_type for n in self.graph.nodes} - self.SUPPORTED
        if unknown:
            raise ValueError(f"graph uses unsupported ops: {sorted(unknown)}")

    def output_shape(self) -> tuple | None:
        """Declared static shape of the sole graph output, if available."""
        if len(self.graph.outputs) != 1:
            return None
        shape = self.graph.outputs[0].shape
        if shape and all(isinstance(d, int) and d > 0 for d in shape):
            return tuple(shape)
        return None

    def run(self, feeds: dict[str, np.ndarray]) -> list[np.ndarray]:
        values: dict[str, np.ndarray] = dict(self.graph.initializers)
        values.update(feeds)

        remaining: dict[str, int] = {}
        for node in self.graph.nodes:
            for name in node.inputs:
                if name:
                    remaining[name] = remaining.get(name, 0) + 1
        for info in self.graph.outputs:
            remaining[info.name] = remaining.get(info.name, 0) + 1

        for missing in (i.name for i in self.graph.inputs if i.name not in values):
            raise ValueError(f"missing graph input {missing!r}")

        for node in self.graph.nodes:
            args = [values[n] if n else None for n in node.inputs]
            try:
                out = self._run_node(node, args)
            except Exception as exc:
                raise RuntimeError(f"node {node.name or node.op_type} failed: {exc}") from exc
            outs = out if isinstance(out, (list, tuple)) else [out]
            for name, value in zip(node.outputs, outs):
                values[name] = value
            for name in node.inputs:
                if name and name not in self.graph.initializers:
                    remaining[name] -= 1
                    if remaining[name] == 0:
                        values.pop(name, None)
        try:
            return [values[o.name] for o in self.graph.outputs]
        except KeyError as exc:
            raise ValueError(f"graph output {exc} was never produced") from exc

    def _run_node(self, node, args):
        op = node.op_type
        attrs = node.attrs
        if op == "Conv":
            bias = args[2] if len(args) > 2 else None
            return _conv(args[0], args[1], bias, attrs)
        if op == "BatchNormalization":
            return _batchnorm(*args[:5], attrs)
        if op == "Relu":
            return np.maximum(args[0], 0)
        if op == "Clip":
            lo = args[1] if len(args) > 1 and args[1] is not None else attrs.get("min")
            hi = args[2] if len(args) > 2 and args[2] is not None else attrs.get("max")
            return np.clip(args[0],
                           None if lo is None else np.asarray(lo).item(),
                           None if hi is None else np.asarray(hi).item())
        if op == "Add":
            return args[0] + args[1]
        if op == "Mul":
            return args[0] * args[1]
        if op == "Concat":
            return np.concatenate(args, axis=int(attrs["axis"]))
        if op == "MaxPool":
            return _maxpool(args[0], attrs)
        if op == "AveragePool":
            return _avgpool(args[0], attrs)
        if op == "GlobalAveragePool":
            return args[0].mean(axis=(2, 3), keepdims=True)
        if op == "Pad":
            pads = args[1] if len(args) > 1 else attrs["pads"]
            value = 0.0
            if len(args) > 2 and args[2] is not None:
                value = np.asarray(args[2]).item()
            return _pad_op(args[0], pads, value)
        if op == "Slice":
            if len(args) > 1:
                return _slice_op(args[0], args[1], args[2],
                                 args[3] if len(args) > 3 else None,
                                 args[4] if len(args) > 4 else None)
            return _slice_op(args[0], attrs["starts"], attrs["ends"], attrs.get("axes"))
        if op == "Flatten":
            axis = int(attrs.get("axis", 1))
            lead = int(np.prod(args[0].shape[:axis])) if axis else 1
            return args[0].reshape(lead, -1)
        if op == "Reshape":
            return args[0].reshape([int(d) for d in args[1]])
        if op == "Gemm":
            return _gemm(args[0], args[1], args[2] if len(args) > 2 else None, attrs)
        if op == "Identity":
            return args[0]
        raise ValueError(f"unsupported op {op}")
