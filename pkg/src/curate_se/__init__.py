"""Data curation and degradation simulation toolkit for speech-enhancement corpora."""

__version__ = "0.1.0"

SUPPORTED_SAMPLE_RATES = (8000, 16000, 22050, 24000, 32000, 44100, 48000)

# Canonical names of the five metrics used for threshold-based filtering.
TBF_METRICS = ("DNSMOS", "SIGMOS", "UTMOS", "NISQA", "SQUIM_SDR")
