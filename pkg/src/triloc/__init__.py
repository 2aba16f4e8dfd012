"""triloc: tri-modal place recognition sandbox.

Learns instance- and scene-level descriptors for text, image, and point-cloud
views of synthetic street scenes and evaluates cross-modal retrieval.
"""

__version__ = "0.1.0"
