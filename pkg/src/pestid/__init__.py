"""Transfer-learning pest classification pipeline.

Frozen pretrained backbones (ONNX graphs) extract pooled features; a small
softmax head is trained on top, tuned by random search, and evaluated with
a full multiclass metric suite.
"""

__version__ = "0.1.0"
