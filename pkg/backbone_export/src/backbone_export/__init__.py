"""One-shot export of pretrained Keras backbones to ONNX feature extractors."""

__version__ = "0.1.0"
