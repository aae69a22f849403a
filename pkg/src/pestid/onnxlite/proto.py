"""ONNX protobuf container, read and written directly.

Implements just enough of the protobuf wire format (varint, 32/64-bit,
length-delimited fields) to serialize and parse inference graphs. Field
numbers follow the public ONNX IR schema:

    ModelProto:    1 ir_version, 2 producer_name, 3 producer_version,
                   7 graph, 8 opset_import
    GraphProto:    1 node, 2 name, 5 initializer, 11 input, 12 output,
                   13 value_info
    NodeProto:     1 input, 2 output, 3 name, 4 op_type, 5 attribute
    AttributeProto: 1 name, 2 f, 3 i, 4 s, 5 t, 7 floats, 8 ints,
                   9 strings, 20 type
    TensorProto:   1 dims, 2 data_type, 4 float_data, 5 int32_data,
                   7 int64_data, 8 name, 9 raw_data, 10 double_data
    ValueInfoProto: 1 name, 2 type; TypeProto.tensor_type = 1;
                   Tensor: 1 elem_type, 2 shape; Dimension: 1 dim_value,
                   2 dim_param
    OperatorSetIdProto: 1 domain, 2 version

Unknown fields are skipped on read, so files produced by other exporters
parse as long as they stick to this core.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# TensorProto.DataType values <-> numpy dtypes.
_DTYPES = {
    1: np.dtype("float32"),
    2: np.dtype("uint8"),
    3: np.dtype("int8"),
    6: np.dtype("int32"),
    7: np.dtype("int64"),
    9: np.dtype("bool"),
    11: np.dtype("float64"),
}
_DTYPE_CODES = {v: k for k, v in _DTYPES.items()}

_WIRE_VARINT = 0
_WIRE_64BIT = 1
_WIRE_LEN = 2
_WIRE_32BIT = 5

# AttributeProto.AttributeType
_ATTR_FLOAT, _ATTR_INT, _ATTR_STRING, _ATTR_TENSOR = 1, 2, 3, 4
_ATTR_FLOATS, _ATTR_INTS, _ATTR_STRINGS = 6, 7, 8


@dataclass
class Node:
    op_type: str
    inputs: list[str]
    outputs: list[str]
    attrs: dict = field(default_factory=dict)
    name: str = ""


@dataclass
class ValueInfo:
    name: str
    elem_type: int = 1
    shape: tuple = ()  # ints, or strings for symbolic dims


@dataclass
class Graph:
    name: str
    nodes: list[Node]
    initializers: dict[str, np.ndarray]
    inputs: list[ValueInfo]
    outputs: list[ValueInfo]


@dataclass
class Model:
    graph: Graph
    opset: int = 13
    ir_version: int = 8
    producer_name: str = "pestid"
    producer_version: str = ""


def dtype_code(dtype: np.dtype) -> int:
    try:
        return _DTYPE_CODES[np.dtype(dtype)]
    except KeyError:
        raise ValueError(f"unsupported tensor dtype {dtype}") from None


# ---------------------------------------------------------------- encoding

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


def _field(num: int, wire: int) -> bytes:
    return _varint((num << 3) | wire)


def _len_field(num: int, payload: bytes) -> bytes:
    return _field(num, _WIRE_LEN) + _varint(len(payload)) + payload


def _str_field(num: int, text: str | bytes) -> bytes:
    data = text.encode("utf-8") if isinstance(text, str) else text
    return _len_field(num, data)


def _int_field(num: int, value: int) -> bytes:
    return _field(num, _WIRE_VARINT) + _varint(value)


def _float_field(num: int, value: float) -> bytes:
    return _field(num, _WIRE_32BIT) + struct.pack("<f", value)


def _encode_tensor(name: str, array: np.ndarray) -> bytes:
    array = np.asarray(array)
    if array.ndim > 0:  # ascontiguousarray would promote 0-d to 1-d
        array = np.ascontiguousarray(array)
    out = bytearray()
    for d in array.shape:
        out += _int_field(1, d)
    out += _int_field(2, dtype_code(array.dtype))
    out += _str_field(8, name)
    le = array.astype(array.dtype.newbyteorder("<"), copy=False)
    out += _len_field(9, le.tobytes())
    return bytes(out)


def _encode_attr(name: str, value) -> bytes:
    out = bytearray(_str_field(1, name))
    if isinstance(value, bool):
        value = int(value)
    if isinstance(value, (int, np.integer)):
        out += _int_field(3, int(value)) + _int_field(20, _ATTR_INT)
    elif isinstance(value, float):
        out += _float_field(2, value) + _int_field(20, _ATTR_FLOAT)
    elif isinstance(value, (str, bytes)):
        out += _str_field(4, value) + _int_field(20, _ATTR_STRING)
    elif isinstance(value, np.ndarray):
        out += _len_field(5, _encode_tensor("", value)) + _int_field(20, _ATTR_TENSOR)
    elif isinstance(value, (list, tuple)):
        if value and all(isinstance(v, float) for v in value):
            for v in value:
                out += _float_field(7, v)
            out += _int_field(20, _ATTR_FLOATS)
        elif all(isinstance(v, (str, bytes)) for v in value) and value:
            for v in value:
                out += _str_field(9, v)
            out += _int_field(20, _ATTR_STRINGS)
        else:
            for v in value:
                out += _int_field(8, int(v))
            out += _int_field(20, _ATTR_INTS)
    else:
        raise ValueError(f"unsupported attribute value {value!r} for {name!r}")
    return bytes(out)


def _encode_node(node: Node) -> bytes:
    out = bytearray()
    for inp in node.inputs:
        out += _str_field(1, inp)
    for outp in node.outputs:
        out += _str_field(2, outp)
    if node.name:
        out += _str_field(3, node.name)
    out += _str_field(4, node.op_type)
    for attr_name in sorted(node.attrs):
        out += _len_field(5, _encode_attr(attr_name, node.attrs[attr_name]))
    return bytes(out)


def _encode_value_info(info: ValueInfo) -> bytes:
    shape = bytearray()
    for d in info.shape:
        if isinstance(d, str):
            dim = _str_field(2, d)
        else:
            dim = _int_field(1, int(d))
        shape += _len_field(1, dim)
    tensor = _int_field(1, info.elem_type) + _len_field(2, bytes(shape))
    type_proto = _len_field(1, tensor)
    return _str_field(1, info.name) + _len_field(2, type_proto)


def _encode_graph(graph: Graph) -> bytes:
    out = bytearray()
    for node in graph.nodes:
        out += _len_field(1, _encode_node(node))
    out += _str_field(2, graph.name)
    for name, array in graph.initializers.items():
        out += _len_field(5, _encode_tensor(name, array))
    for info in graph.inputs:
        out += _len_field(11, _encode_value_info(info))
    for info in graph.outputs:
        out += _len_field(12, _encode_value_info(info))
    return bytes(out)


def write_model(model: Model) -> bytes:
    out = bytearray()
    out += _int_field(1, model.ir_version)
    out += _str_field(2, model.producer_name)
    if model.producer_version:
        out += _str_field(3, model.producer_version)
    out += _len_field(7, _encode_graph(model.graph))
    opset = _str_field(1, "") + _int_field(2, model.opset)
    out += _len_field(8, opset)
    return bytes(out)


def save_model(model: Model, path: str | Path) -> None:
    Path(path).write_bytes(write_model(model))


# ---------------------------------------------------------------- decoding

class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def done(self) -> bool:
        return self.pos >= len(self.data)

    def varint(self) -> int:
        result = 0
        shift = 0
        while True:
            if self.pos >= len(self.data):
                raise ValueError("truncated varint")
            byte = self.data[self.pos]
            self.pos += 1
            result |= (byte & 0x7F) << shift
            if not byte & 0x80:
                return result
            shift += 7
            if shift > 70:
                raise ValueError("varint too long")

    def signed_varint(self) -> int:
        v = self.varint()
        return v - (1 << 64) if v >= (1 << 63) else v

    def bytes_(self) -> bytes:
        n = self.varint()
        if self.pos + n > len(self.data):
            raise ValueError("truncated length-delimited field")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def fields(self):
        """Yield (field_number, wire_type, value) triples, skipping nothing."""
        while not self.done():
            tag = self.varint()
            num, wire = tag >> 3, tag & 7
            if wire == _WIRE_VARINT:
                yield num, wire, self.varint()
            elif wire == _WIRE_LEN:
                yield num, wire, self.bytes_()
            elif wire == _WIRE_32BIT:
                raw = self.data[self.pos:self.pos + 4]
                self.pos += 4
                yield num, wire, raw
            elif wire == _WIRE_64BIT:
                raw = self.data[self.pos:self.pos + 8]
                self.pos += 8
                yield num, wire, raw
            else:
                raise ValueError(f"unsupported wire type {wire}")


def _to_signed64(value: int) -> int:
    return value - (1 << 64) if value >= (1 << 63) else value


def _decode_packed_varints(data: bytes) -> list[int]:
    r = _Reader(data)
    out = []
    while not r.done():
        out.append(_to_signed64(r.varint()))
    return out


def _decode_tensor(data: bytes) -> tuple[str, np.ndarray]:
    dims: list[int] = []
    data_type = 1
    name = ""
    raw = None
    float_data: list[float] = []
    double_data: list[float] = []
    int32_data: list[int] = []
    int64_data: list[int] = []
    for num, wire, value in _Reader(data).fields():
        if num == 1:
            if wire == _WIRE_LEN:
                dims.extend(_decode_packed_varints(value))
            else:
                dims.append(_to_signed64(value))
        elif num == 2 and wire == _WIRE_VARINT:
            data_type = value
        elif num == 4:
            if wire == _WIRE_LEN:
                float_data.extend(struct.unpack(f"<{len(value) // 4}f", value))
            else:
                raise ValueError("unpacked float_data not supported")
        elif num == 5:
            if wire == _WIRE_LEN:
                int32_data.extend(_decode_packed_varints(value))
            else:
                int32_data.append(_to_signed64(value))
        elif num == 7:
            if wire == _WIRE_LEN:
                int64_data.extend(_decode_packed_varints(value))
            else:
                int64_data.append(_to_signed64(value))
        elif num == 8 and wire == _WIRE_LEN:
            name = value.decode("utf-8")
        elif num == 9 and wire == _WIRE_LEN:
            raw = value
        elif num == 10 and wire == _WIRE_LEN:
            double_data.extend(struct.unpack(f"<{len(value) // 8}d", value))
    if data_type not in _DTYPES:
        raise ValueError(f"tensor {name!r} has unsupported data type {data_type}")
    dtype = _DTYPES[data_type]
    if raw is not None:
        array = np.frombuffer(raw, dtype=dtype.newbyteorder("<")).astype(dtype)
    elif float_data:
        array = np.array(float_data, dtype=dtype)
    elif double_data:
        array = np.array(double_data, dtype=dtype)
    elif int64_data:
        array = np.array(int64_data, dtype=dtype)
    elif int32_data:
        array = np.array(int32_data, dtype=dtype)
    else:
        array = np.zeros(0, dtype=dtype)
    return name, array.reshape(dims)


def _decode_attr(data: bytes) -> tuple[str, object]:
    name = ""
    attr_type = 0
    f_val = 0.0
    i_val = 0
    s_val = b""
    t_val: np.ndarray | None = None
    floats: list[float] = []
    ints: list[int] = []
    strings: list[bytes] = []
    for num, wire, value in _Reader(data).fields():
        if num == 1 and wire == _WIRE_LEN:
            name = value.decode("utf-8")
        elif num == 2 and wire == _WIRE_32BIT:
            f_val = struct.unpack("<f", value)[0]
        elif num == 3 and wire == _WIRE_VARINT:
            i_val = _to_signed64(value)
        elif num == 4 and wire == _WIRE_LEN:
            s_val = value
        elif num == 5 and wire == _WIRE_LEN:
            t_val = _decode_tensor(value)[1]
        elif num == 7:
            if wire == _WIRE_32BIT:
                floats.append(struct.unpack("<f", value)[0])
            elif wire == _WIRE_LEN:
                floats.extend(struct.unpack(f"<{len(value) // 4}f", value))
        elif num == 8:
            if wire == _WIRE_LEN:
                ints.extend(_decode_packed_varints(value))
            else:
                ints.append(_to_signed64(value))
        elif num == 9 and wire == _WIRE_LEN:
            strings.append(value)
        elif num == 20 and wire == _WIRE_VARINT:
            attr_type = value
    if attr_type == _ATTR_FLOAT:
        return name, f_val
    if attr_type == _ATTR_INT:
        return name, i_val
    if attr_type == _ATTR_STRING:
        return name, s_val.decode("utf-8")
    if attr_type == _ATTR_TENSOR:
        return name, t_val
    if attr_type == _ATTR_FLOATS:
        return name, floats
    if attr_type == _ATTR_INTS:
        return name, ints
    if attr_type == _ATTR_STRINGS:
        return name, [s.decode("utf-8") for s in strings]
    # untyped attributes from minimal writers: fall back on whichever field is set
    if ints:
        return name, ints
    if floats:
        return name, floats
    return name, i_val


def _decode_node(data: bytes) -> Node:
    node = Node(op_type="", inputs=[], outputs=[])
    for num, wire, value in _Reader(data).fields():
        if num == 1 and wire == _WIRE_LEN:
            node.inputs.append(value.decode("utf-8"))
        elif num == 2 and wire == _WIRE_LEN:
            node.outputs.append(value.decode("utf-8"))
        elif num == 3 and wire == _WIRE_LEN:
            node.name = value.decode("utf-8")
        elif num == 4 and wire == _WIRE_LEN:
            node.op_type = value.decode("utf-8")
        elif num == 5 and wire == _WIRE_LEN:
            attr_name, attr_value = _decode_attr(value)
            node.attrs[attr_name] = attr_value
    return node


def _decode_dim(data: bytes):
    for num, wire, value in _Reader(data).fields():
        if num == 1 and wire == _WIRE_VARINT:
            return _to_signed64(value)
        if num == 2 and wire == _WIRE_LEN:
            return value.decode("utf-8")
    return None


def _decode_value_info(data: bytes) -> ValueInfo:
    info = ValueInfo(name="")
    for num, wire, value in _Reader(data).fields():
        if num == 1 and wire == _WIRE_LEN:
            info.name = value.decode("utf-8")
        elif num == 2 and wire == _WIRE_LEN:
            for tnum, twire, tvalue in _Reader(value).fields():
                if tnum == 1 and twire == _WIRE_LEN:  # tensor_type
                    for fnum, fwire, fvalue in _Reader(tvalue).fields():
                        if fnum == 1 and fwire == _WIRE_VARINT:
                            info.elem_type = fvalue
                        elif fnum == 2 and fwire == _WIRE_LEN:
                            dims = []
                            for snum, swire, svalue in _Reader(fvalue).fields():
                                if snum == 1 and swire == _WIRE_LEN:
                                    dims.append(_decode_dim(svalue))
                            info.shape = tuple(dims)
    return info


def _decode_graph(data: bytes) -> Graph:
    graph = Graph(name="", nodes=[], initializers={}, inputs=[], outputs=[])
    for num, wire, value in _Reader(data).fields():
        if num == 1 and wire == _WIRE_LEN:
            graph.nodes.append(_decode_node(value))
        elif num == 2 and wire == _WIRE_LEN:
            graph.name = value.decode("utf-8")
        elif num == 5 and wire == _WIRE_LEN:
            name, array = _decode_tensor(value)
            graph.initializers[name] = array
        elif num == 11 and wire == _WIRE_LEN:
            graph.inputs.append(_decode_value_info(value))
        elif num == 12 and wire == _WIRE_LEN:
            graph.outputs.append(_decode_value_info(value))
    return graph


def read_model(data: bytes) -> Model:
    graph = None
    opset = 13
    ir_version = 8
    producer = ""
    for num, wire, value in _Reader(data).fields():
        if num == 1 and wire == _WIRE_VARINT:
            ir_version = _to_signed64(value)
        elif num == 2 and wire == _WIRE_LEN:
            producer = value.decode("utf-8")
        elif num == 7 and wire == _WIRE_LEN:
            graph = _decode_graph(value)
        elif num == 8 and wire == _WIRE_LEN:
            for onum, owire, ovalue in _Reader(value).fields():
                if onum == 2 and owire == _WIRE_VARINT:
                    opset = _to_signed64(ovalue)
    if graph is None:
        raise ValueError("model contains no graph")
    return Model(graph=graph, opset=opset, ir_version=ir_version, producer_name=producer)


def load_model(path: str | Path) -> Model:
    return read_model(Path(path).read_bytes())
