"""Minimal ONNX serializer (encode only).

Writes the protobuf wire format directly, covering the message subset an
inference graph needs. Field numbers follow the public ONNX IR schema;
consumers parse the files with their own ONNX tooling, so this module
deliberately shares no code with them.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

_DTYPE_CODES = {
    np.dtype("float32"): 1,
    np.dtype("uint8"): 2,
    np.dtype("int8"): 3,
    np.dtype("int32"): 6,
    np.dtype("int64"): 7,
    np.dtype("bool"): 9,
    np.dtype("float64"): 11,
}

_ATTR_FLOAT, _ATTR_INT, _ATTR_STRING = 1, 2, 3
_ATTR_FLOATS, _ATTR_INTS = 6, 7


@dataclass
class Node:
    op_type: str
    inputs: list[str]
    outputs: list[str]
    attrs: dict = field(default_factory=dict)
    name: str = ""


def _varint(value: int) -> bytes:
    if value < 0:
        value += 1 << 64
    out = bytearray()
    while True:
        bits = value & 0x7F
        value >>= 7
        if value:
            out.append(bits | 0x80)
        else:
            out.append(bits)
            return bytes(out)


def _key(field_number: int, wire_type: int) -> bytes:
    return _varint((field_number << 3) | wire_type)


def _chunk(field_number: int, payload: bytes) -> bytes:
    return _key(field_number, 2) + _varint(len(payload)) + payload


def _text(field_number: int, value: str) -> bytes:
    return _chunk(field_number, value.encode("utf-8"))


def _int(field_number: int, value: int) -> bytes:
    return _key(field_number, 0) + _varint(value)


def _f32(field_number: int, value: float) -> bytes:
    return _key(field_number, 5) + struct.pack("<f", value)


def _tensor(name: str, array: np.ndarray) -> bytes:
    array = np.ascontiguousarray(array)
    out = bytearray()
    for dim in array.shape:
        out += _int(1, dim)
    out += _int(2, _DTYPE_CODES[array.dtype])
    out += _text(8, name)
    out += _chunk(9, array.astype(array.dtype.newbyteorder("<"), copy=False).tobytes())
    return bytes(out)


def _attribute(name: str, value) -> bytes:
    out = bytearray(_text(1, name))
    if isinstance(value, bool):
        value = int(value)
    if isinstance(value, (int, np.integer)):
        out += _int(3, int(value)) + _int(20, _ATTR_INT)
    elif isinstance(value, float):
        out += _f32(2, value) + _int(20, _ATTR_FLOAT)
    elif isinstance(value, str):
        out += _chunk(4, value.encode("utf-8")) + _int(20, _ATTR_STRING)
    elif isinstance(value, (list, tuple)) and value and isinstance(value[0], float):
        for v in value:
            out += _f32(7, v)
        out += _int(20, _ATTR_FLOATS)
    elif isinstance(value, (list, tuple)):
        for v in value:
            out += _int(8, int(v))
        out += _int(20, _ATTR_INTS)
    else:
        raise TypeError(f"unsupported attribute {name}={value!r}")
    return bytes(out)


def _node(node: Node) -> bytes:
    out = bytearray()
    for name in node.inputs:
        out += _text(1, name)
    for name in node.outputs:
        out += _text(2, name)
    if node.name:
        out += _text(3, node.name)
    out += _text(4, node.op_type)
    for attr_name in sorted(node.attrs):
        out += _chunk(5, _attribute(attr_name, node.attrs[attr_name]))
    return bytes(out)


def _value_info(name: str, shape: tuple[int, ...]) -> bytes:
    dims = bytearray()
    for dim in shape:
        dims += _chunk(1, _int(1, int(dim)))
    tensor_type = _int(1, 1) + _chunk(2, bytes(dims))  # elem_type float32
    return _text(1, name) + _chunk(2, _chunk(1, tensor_type))


def build_model(nodes: list[Node], initializers: dict[str, np.ndarray],
                input_name: str, input_shape: tuple[int, ...],
                output_name: str, output_shape: tuple[int, ...],
                graph_name: str, producer: str = "backbone-export",
                opset: int = 13, ir_version: int = 8) -> bytes:
    graph = bytearray()
    for node in nodes:
        graph += _chunk(1, _node(node))
    graph += _text(2, graph_name)
    for name, array in initializers.items():
        graph += _chunk(5, _tensor(name, array))
    graph += _chunk(11, _value_info(input_name, input_shape))
    graph += _chunk(12, _value_info(output_name, output_shape))

    model = bytearray()
    model += _int(1, ir_version)
    model += _text(2, producer)
    model += _chunk(7, bytes(graph))
    model += _chunk(8, _text(1, "") + _int(2, opset))
    return bytes(model)
