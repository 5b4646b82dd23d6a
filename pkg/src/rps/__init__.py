"""Portfolio selection via random-walk embeddings of an anti-correlation
asset graph, plus benchmark selectors, classical weighters and stability
metrics."""

from ._backend import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
