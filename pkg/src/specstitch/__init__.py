"""Desk-scale wideband spectrum sensing toolkit.

Synthesize protocol waveforms, build a signal bank of pruned spectral
fragments, stitch labeled wideband training samples, train a 1D multi-label
segmentation network with a self-attention block, and run overlapping-window
inference over arbitrary bandwidths.
"""

__version__ = "0.1.0"
