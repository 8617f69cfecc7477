"""Character-level document forgery detection from OCR bounding-box graphs.

The toolkit covers the full experimental loop: synthesizing manipulated
document corpora with ground truth, turning OCR character boxes into
per-character sub-graph feature vectors, training a random forest on
those vectors, and scoring both the forest and a classical two-method
baseline with the same cross-validation machinery.
"""

__version__ = "0.1.0"
