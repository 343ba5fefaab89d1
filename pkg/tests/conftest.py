import numpy as np
import pytest

from curate_se.audio_io import AudioBuffer


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def sine(freq_hz: float, fs: int, seconds: float = 1.0, amp: float = 1.0) -> AudioBuffer:
    t = np.arange(int(seconds * fs)) / fs
    return AudioBuffer(amp * np.sin(2.0 * np.pi * freq_hz * t), fs)


def steady_rms(x: np.ndarray, margin: int) -> float:
    """RMS over the steady-state span, excluding filter warm-up at the edges."""
    core = x[margin : x.size - margin]
    return float(np.sqrt(np.mean(core**2)))
