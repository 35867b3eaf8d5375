"""Toolkit for building entity/frame training pairs from time-aligned transcripts
and for training weakly-supervised recognition and grounding models on
precomputed visual features."""

__version__ = "0.1.0"
