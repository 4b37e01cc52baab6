"""One-shot converter from the Planetoid citation-dataset distribution
(pickled sparse feature blocks, one-hot label blocks, a neighbor
dictionary, and a test index file) to the plain-text dataset directory
format used by the safegcn toolkit."""

from .convert import UpstreamBundle, convert

__all__ = ["UpstreamBundle", "convert"]

__version__ = "0.1.0"
