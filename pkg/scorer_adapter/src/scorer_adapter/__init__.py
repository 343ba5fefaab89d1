"""Adapter wrapping non-intrusive quality predictors; emits curate-se score
manifests (JSON Lines) without importing the core package."""

__version__ = "0.1.0"

# Canonical metric names of the curate-se manifest schema.
CANONICAL_METRICS = ("DNSMOS", "NISQA", "SIGMOS", "SQUIM_SDR", "UTMOS")

# MOS-family metrics are clamped to the 1-5 opinion scale on output.
MOS_METRICS = ("DNSMOS", "NISQA", "SIGMOS", "UTMOS")

SUPPORTED_SAMPLE_RATES = (8000, 16000, 22050, 24000, 32000, 44100, 48000)
