"""Self-contained ONNX graph I/O and execution.

``proto`` reads and writes the ONNX protobuf container directly (no ONNX
runtime dependency); ``runner`` executes the convolutional op subset the
pipeline's backbones use, on NumPy.
"""

from .proto import Graph, Model, Node, ValueInfo, load_model, read_model, save_model, write_model
from .runner import GraphRunner

__all__ = [
    "Graph", "Model", "Node", "ValueInfo",
    "load_model", "read_model", "save_model", "write_model",
    "GraphRunner",
]
