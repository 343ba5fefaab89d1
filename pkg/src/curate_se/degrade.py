"""Seven composable distortion kernels and the dynamic-simulation pipeline
that turns curated clean speech into aligned clean/degraded training pairs."""

from __future__ import annotations

import hashlib
import math
import shlex
import subprocess
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .audio_io import AudioBuffer, _resample_signal, highpass_75, lowpass, read_wav
from .manifest import ScoreRecord

# Canonical application order: room, acoustic noise sources, then
# channel/codec/transport, then analog saturation.
DISTORTION_ORDER = (
    "reverberation",
    "additive_noise",
    "wind_noise",
    "bandwidth_limitation",
    "codec_loss",
    "packet_loss",
    "clipping",
)


@dataclass
class DegradationSpec:
    """Which distortions to draw from and their parameter ranges.

    Ranges are configuration defaults chosen for this toolkit, not values
    taken from any upstream corpus recipe.
    """

    enabled: tuple[str, ...] = DISTORTION_ORDER
    snr_db: tuple[float, float] = (-5.0, 20.0)
    clip_ratio: tuple[float, float] = (0.1, 0.5)
    bandwidths: tuple[int, ...] = (4000, 8000, 11025, 12000, 16000)
    packet_ms: float = 20.0
    loss_prob: tuple[float, float] = (0.05, 0.25)
    codec_profile: str = "mulaw8"
    codec_command: str | None = None
    distortions_per_utterance: tuple[int, int] = (1, 3)
    seed: int = 0

    def validate(self) -> None:
        unknown = set(self.enabled) - set(DISTORTION_ORDER)
        if unknown:
            raise ValueError(f"unknown distortions: {sorted(unknown)}")
        if not self.enabled:
            raise ValueError("no distortions enabled")
        for name in ("snr_db", "clip_ratio", "loss_prob", "distortions_per_utterance"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ValueError(f"{name} range is empty: ({lo}, {hi})")
        if self.distortions_per_utterance[0] < 1:
            raise ValueError("distortions_per_utterance must be >= 1")
        if not self.bandwidths:
            raise ValueError("bandwidths must not be empty")
        if self.codec_profile not in ("mulaw8", "external"):
            raise ValueError(f"unknown codec profile {self.codec_profile!r}")

    def to_dict(self) -> dict:
        return {
            "enabled": list(self.enabled),
            "snr_db": list(self.snr_db),
            "clip_ratio": list(self.clip_ratio),
            "bandwidths": list(self.bandwidths),
            "packet_ms": self.packet_ms,
            "loss_prob": list(self.loss_prob),
            "codec_profile": self.codec_profile,
            "codec_command": self.codec_command,
            "distortions_per_utterance": list(self.distortions_per_utterance),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "DegradationSpec":
        kwargs = {}
        for name in (
            "enabled",
            "snr_db",
            "clip_ratio",
            "bandwidths",
            "loss_prob",
            "distortions_per_utterance",
        ):
            if name in obj:
                kwargs[name] = tuple(obj[name])
        for name in ("packet_ms", "codec_profile", "codec_command", "seed"):
            if name in obj:
                kwargs[name] = obj[name]
        spec = cls(**kwargs)
        spec.validate()
        return spec


@dataclass
class SimulatedPair:
    clean: AudioBuffer
    degraded: AudioBuffer
    applied: list[tuple[str, dict]]
    seed_used: int


# ---------------------------------------------------------------------------
# Kernels


def _fit_length(x: np.ndarray, n: int) -> np.ndarray:
    if x.size == n:
        return x
    if x.size > n:
        return x[:n]
    return np.pad(x, (0, n - x.size), mode="wrap" if x.size else "constant")


def mix_additive_noise(speech: AudioBuffer, noise: AudioBuffer, snr_db: float) -> AudioBuffer:
    """Add noise scaled so the full-utterance energy ratio equals snr_db.

    The noise is resampled to the speech rate if needed and looped or
    truncated to the speech length before scaling.
    """
    n = noise.samples
    if noise.sample_rate_hz != speech.sample_rate_hz:
        n = _resample_signal(n, noise.sample_rate_hz, speech.sample_rate_hz)
    n = _fit_length(n, speech.samples.size)
    speech_energy = float(np.sum(speech.samples**2))
    noise_energy = float(np.sum(n**2))
    if noise_energy < 1e-30:
        raise ValueError("zero-energy noise")
    if speech_energy < 1e-30:
        raise ValueError("zero-energy speech")
    gain = math.sqrt(speech_energy / (noise_energy * 10.0 ** (snr_db / 10.0)))
    return AudioBuffer(speech.samples + gain * n, speech.sample_rate_hz)


def normalize_rir(rir: AudioBuffer) -> np.ndarray:
    """Direct path (largest |tap|) shifted to index 0 and scaled to unit
    magnitude, keeping the reverberant output time-aligned with its input."""
    taps = rir.samples
    peak_idx = int(np.argmax(np.abs(taps)))
    peak = taps[peak_idx]
    if abs(peak) < 1e-30:
        raise ValueError("all-zero RIR")
    return taps[peak_idx:] / peak


def apply_reverb(speech: AudioBuffer, rir: AudioBuffer) -> AudioBuffer:
    if rir.sample_rate_hz != speech.sample_rate_hz:
        raise ValueError("RIR sample rate must match the speech")
    kernel = normalize_rir(rir)
    wet = fftconvolve(speech.samples, kernel, mode="full")[: speech.samples.size]
    return AudioBuffer(wet, speech.sample_rate_hz)


def apply_clipping(speech: AudioBuffer, clip_ratio: float) -> AudioBuffer:
    if not 0.0 < clip_ratio <= 1.0:
        raise ValueError(f"clip_ratio must be in (0, 1], got {clip_ratio}")
    peak = float(np.max(np.abs(speech.samples)))
    if peak < 1e-30:
        raise ValueError("silent input")
    level = clip_ratio * peak
    return AudioBuffer(np.clip(speech.samples, -level, level), speech.sample_rate_hz)


def apply_bandwidth_limit(speech: AudioBuffer, target_hz: int) -> AudioBuffer:
    """Band-limit by resampling down to 2*target_hz and back up."""
    fs = speech.sample_rate_hz
    if not 0 < target_hz < fs / 2:
        raise ValueError(f"target bandwidth {target_hz} must be below Nyquist of {fs}")
    down = _resample_signal(speech.samples, fs, 2 * target_hz)
    up = _resample_signal(down, 2 * target_hz, fs)
    return AudioBuffer(_fit_length(up, speech.samples.size), fs)


# 8-bit mu-law-style compander: 16-step linear core below 1/128, then seven
# octave segments of 16 steps each up to full scale; decode at interval
# midpoints so the round-trip error never exceeds 1/64 of full scale.
_MULAW_SEGMENTS = 7
_MULAW_STEPS = 16
_MULAW_CORE = 1.0 / 128.0


def _mulaw8_roundtrip(x: np.ndarray) -> np.ndarray:
    sign = np.sign(x)
    a = np.minimum(np.abs(x), 1.0)
    out = np.empty_like(a)

    core = a < _MULAW_CORE
    grid = _MULAW_CORE / _MULAW_STEPS
    out[core] = np.minimum(np.round(a[core] / grid), _MULAW_STEPS - 1) * grid

    seg = np.clip(np.floor(np.log2(np.maximum(a, 1e-300))), -_MULAW_SEGMENTS, -1)
    lo = 2.0**seg
    step = lo / _MULAW_STEPS
    idx = np.minimum(np.floor((a - lo) / step), _MULAW_STEPS - 1)
    out[~core] = (lo + (idx + 0.5) * step)[~core]
    return sign * out


def apply_codec_loss(
    speech: AudioBuffer, profile: str = "mulaw8", command: str | None = None
) -> AudioBuffer:
    """Codec emulation. "mulaw8" band-limits to 4 kHz (when the rate allows)
    and runs an 8-bit mu-law companding round trip; "external" pipes raw
    float32 samples through a user command and re-fits the output length."""
    if profile == "mulaw8":
        out = speech
        if speech.sample_rate_hz > 8000:
            out = apply_bandwidth_limit(out, 4000)
        return AudioBuffer(_mulaw8_roundtrip(out.samples), speech.sample_rate_hz)
    if profile == "external":
        if not command:
            raise ValueError("external codec profile requires a command")
        argv = [arg.replace("{rate}", str(speech.sample_rate_hz)) for arg in shlex.split(command)]
        proc = subprocess.run(
            argv, input=speech.samples.astype("<f4").tobytes(), stdout=subprocess.PIPE
        )
        if proc.returncode != 0:
            raise RuntimeError(f"external codec failed with exit code {proc.returncode}")
        decoded = np.frombuffer(proc.stdout, dtype="<f4").astype(np.float64)
        return AudioBuffer(_fit_length_zero(decoded, speech.samples.size), speech.sample_rate_hz)
    raise ValueError(f"unknown codec profile {profile!r}")


def _fit_length_zero(x: np.ndarray, n: int) -> np.ndarray:
    if x.size >= n:
        return x[:n]
    return np.pad(x, (0, n - x.size))


def apply_packet_loss(
    speech: AudioBuffer, packet_ms: float, loss_prob: float, seed: int
) -> AudioBuffer:
    """Zero out packet_ms-sized packets independently with probability
    loss_prob; surviving samples are bit-identical to the input."""
    if packet_ms <= 0:
        raise ValueError("packet_ms must be > 0")
    if not 0.0 <= loss_prob <= 1.0:
        raise ValueError("loss_prob must be in [0, 1]")
    packet = max(1, int(round(speech.sample_rate_hz * packet_ms / 1000.0)))
    n_packets = (speech.samples.size + packet - 1) // packet
    rng = np.random.Generator(np.random.PCG64(seed))
    lost = rng.random(n_packets) < loss_prob
    out = speech.samples.copy()
    for i in np.nonzero(lost)[0]:
        out[i * packet : (i + 1) * packet] = 0.0
    return AudioBuffer(out, speech.sample_rate_hz)


WIND_CUTOFF_HZ = 300.0


def synthesize_wind(n_samples: int, sample_rate_hz: int, seed: int) -> AudioBuffer:
    """Brownian noise low-passed at 300 Hz with a slow (0.5-2 Hz) seeded
    amplitude modulation; stands in when no wind recording is available."""
    rng = np.random.Generator(np.random.PCG64(seed))
    brown = np.cumsum(rng.standard_normal(n_samples))
    brown -= brown.mean()
    base = lowpass(AudioBuffer(brown, sample_rate_hz), WIND_CUTOFF_HZ, 150.0).samples
    mod_rate = rng.uniform(0.5, 2.0)
    phase = rng.uniform(0.0, 2.0 * math.pi)
    t = np.arange(n_samples) / sample_rate_hz
    envelope = 0.35 + 0.65 * 0.5 * (1.0 + np.sin(2.0 * math.pi * mod_rate * t + phase))
    return AudioBuffer(base * envelope, sample_rate_hz)


def apply_wind_noise(
    speech: AudioBuffer, wind: AudioBuffer | None, snr_db: float, seed: int = 0
) -> AudioBuffer:
    if wind is None:
        wind = synthesize_wind(speech.samples.size, speech.sample_rate_hz, seed)
    return mix_additive_noise(speech, wind, snr_db)


# ---------------------------------------------------------------------------
# Dynamic simulation


def utterance_seed(global_seed: int, utterance_id: str) -> int:
    """Schedule-independent per-utterance seed: BLAKE2b-64 of seed and id."""
    digest = hashlib.blake2b(f"{global_seed}:{utterance_id}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _fisher_yates(items: list, rng: np.random.Generator) -> list:
    items = list(items)
    for i in range(len(items) - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        items[i], items[j] = items[j], items[i]
    return items


def simulate(
    record: ScoreRecord,
    spec: DegradationSpec,
    noise_manifest: list[str],
    rir_manifest: list[str],
    global_seed: int | None = None,
) -> SimulatedPair:
    """Produce one aligned clean/degraded pair.

    The clean side is the high-passed source audio. A per-utterance PCG64
    stream (seeded from the global seed and the utterance id, never from the
    schedule) draws the number of distortions, the distortion subset, and all
    parameters; kernels are applied in the fixed canonical order.
    """
    seed = utterance_seed(spec.seed if global_seed is None else global_seed, record.utterance_id)
    rng = np.random.Generator(np.random.PCG64(seed))
    try:
        audio = read_wav(record.path)
        if audio.sample_rate_hz != record.sample_rate_hz:
            audio = AudioBuffer(
                _resample_signal(audio.samples, audio.sample_rate_hz, record.sample_rate_hz),
                record.sample_rate_hz,
            )
        clean = highpass_75(audio)

        applicable = []
        for name in spec.enabled:
            if name == "reverberation" and not rir_manifest:
                continue
            if name == "additive_noise" and not noise_manifest:
                continue
            if name == "bandwidth_limitation" and not any(
                b < record.sample_rate_hz / 2 for b in spec.bandwidths
            ):
                continue
            applicable.append(name)
        if not applicable:
            raise ValueError("no applicable distortions for this utterance")

        lo, hi = spec.distortions_per_utterance
        k = min(int(rng.integers(lo, hi + 1)), len(applicable))
        chosen = set(_fisher_yates(applicable, rng)[:k])
        plan = [name for name in DISTORTION_ORDER if name in chosen]

        degraded = clean
        applied: list[tuple[str, dict]] = []
        for name in plan:
            if name == "reverberation":
                path = rir_manifest[int(rng.integers(0, len(rir_manifest)))]
                degraded = apply_reverb(degraded, read_wav(path))
                params = {"rir_path": path}
            elif name == "additive_noise":
                path = noise_manifest[int(rng.integers(0, len(noise_manifest)))]
                snr = float(rng.uniform(*spec.snr_db))
                degraded = mix_additive_noise(degraded, read_wav(path), snr)
                params = {"noise_path": path, "snr_db": snr}
            elif name == "wind_noise":
                snr = float(rng.uniform(*spec.snr_db))
                wind_seed = int(rng.integers(0, 2**63))
                degraded = apply_wind_noise(degraded, None, snr, wind_seed)
                params = {"snr_db": snr, "wind_seed": wind_seed}
            elif name == "bandwidth_limitation":
                eligible = [b for b in spec.bandwidths if b < record.sample_rate_hz / 2]
                target = int(eligible[int(rng.integers(0, len(eligible)))])
                degraded = apply_bandwidth_limit(degraded, target)
                params = {"target_hz": target}
            elif name == "codec_loss":
                degraded = apply_codec_loss(degraded, spec.codec_profile, spec.codec_command)
                params = {"profile": spec.codec_profile}
            elif name == "packet_loss":
                prob = float(rng.uniform(*spec.loss_prob))
                loss_seed = int(rng.integers(0, 2**63))
                degraded = apply_packet_loss(degraded, spec.packet_ms, prob, loss_seed)
                params = {"packet_ms": spec.packet_ms, "loss_prob": prob, "loss_seed": loss_seed}
            else:  # clipping
                ratio = float(rng.uniform(*spec.clip_ratio))
                degraded = apply_clipping(degraded, ratio)
                params = {"clip_ratio": ratio}
            applied.append((name, params))
    except Exception as exc:
        raise type(exc)(f"{record.utterance_id}: {exc}") from exc

    return SimulatedPair(clean=clean, degraded=degraded, applied=applied, seed_used=seed)
