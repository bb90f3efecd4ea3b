"""Synthetic data: detector-like colored noise, bursts, and injections.

The noise model is a piecewise power-law continuum plus narrow spectral
lines (mains harmonics, a violin-mode cluster).  Noise is synthesized by
shaping white Gaussian draws in the frequency domain with sqrt(PSD),
which gives exact spectral control and bit-reproducible output per seed.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyError, ValidationError
from .rng import rng_for
from .series import PowerSpectrum, TimeSeries

__all__ = [
    "PsdSegment",
    "PsdLine",
    "PsdModel",
    "BurstSpec",
    "default_detector_model",
    "colored_noise",
    "sine_burst",
    "awgn_burst",
    "line_interference",
    "inject",
]


@dataclass(frozen=True)
class PsdSegment:
    """Power law ``level * (f / f_hz)**slope`` valid from ``f_hz`` upward."""

    f_hz: float
    level: float
    slope: float

    def __post_init__(self):
        if self.f_hz <= 0:
            raise ValidationError(f"segment start frequency must be > 0, got {self.f_hz}")
        if self.level <= 0:
            raise ValidationError(f"segment level must be > 0, got {self.level}")


@dataclass(frozen=True)
class PsdLine:
    """Gaussian spectral line: continuum multiplied up by ``ratio`` at ``f_hz``."""

    f_hz: float
    ratio: float
    width_hz: float

    def __post_init__(self):
        if self.f_hz <= 0 or self.ratio <= 0 or self.width_hz <= 0:
            raise ValidationError("line needs positive f_hz, ratio, width_hz")


@dataclass(frozen=True)
class PsdModel:
    """Piecewise power-law continuum with additive spectral lines.

    Below the first segment the first power law extrapolates, clipped at
    ``f_floor_hz`` so the low-frequency wall stays finite; the value at
    0 Hz equals the value at the clip frequency.
    """

    segments: tuple[PsdSegment, ...]
    lines: tuple[PsdLine, ...] = ()
    f_floor_hz: float = 1.0

    def __post_init__(self):
        segments = tuple(
            s if isinstance(s, PsdSegment) else PsdSegment(**s) for s in self.segments
        )
        lines = tuple(l if isinstance(l, PsdLine) else PsdLine(**l) for l in self.lines)
        if not segments:
            raise ValidationError("model needs at least one segment")
        starts = [s.f_hz for s in segments]
        if sorted(starts) != starts:
            raise ValidationError("segments must be sorted by f_hz")
        if self.f_floor_hz <= 0:
            raise ValidationError("f_floor_hz must be positive")
        object.__setattr__(self, "segments", segments)
        object.__setattr__(self, "lines", lines)

    def continuum(self, f) -> np.ndarray:
        f = np.maximum(np.asarray(f, dtype=np.float64), self.f_floor_hz)
        starts = np.array([s.f_hz for s in self.segments])
        idx = np.clip(np.searchsorted(starts, f, side="right") - 1, 0, len(starts) - 1)
        out = np.empty_like(f)
        for k, seg in enumerate(self.segments):
            mask = idx == k
            if np.any(mask):
                out[mask] = seg.level * (f[mask] / seg.f_hz) ** seg.slope
        return out

    def evaluate(self, f) -> np.ndarray:
        """PSD values at frequencies ``f`` (Hz), lines included."""
        f = np.asarray(f, dtype=np.float64)
        out = self.continuum(f)
        for line in self.lines:
            sigma = line.width_hz / 2.0
            bump = (line.ratio - 1.0) * np.exp(-0.5 * ((f - line.f_hz) / sigma) ** 2)
            out = out + self.continuum(np.full_like(f, line.f_hz)) * bump
        return out

    def to_power_spectrum(self, df: float, n_bins: int) -> PowerSpectrum:
        return PowerSpectrum(df=df, values=self.evaluate(np.arange(n_bins) * df))

    def to_dict(self) -> dict:
        return {
            "segments": [
                {"f_hz": s.f_hz, "level": s.level, "slope": s.slope}
                for s in self.segments
            ],
            "lines": [
                {"f_hz": l.f_hz, "ratio": l.ratio, "width_hz": l.width_hz}
                for l in self.lines
            ],
            "f_floor_hz": self.f_floor_hz,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PsdModel":
        try:
            return cls(
                segments=tuple(PsdSegment(**s) for s in data["segments"]),
                lines=tuple(PsdLine(**l) for l in data.get("lines", [])),
                f_floor_hz=float(data.get("f_floor_hz", 1.0)),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"bad PSD model config: {exc}") from exc

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="ascii") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | os.PathLike) -> "PsdModel":
        with open(path, "r", encoding="ascii") as fh:
            return cls.from_dict(json.load(fh))


def default_detector_model() -> PsdModel:
    """Stock detector-like PSD, version 1.

    Steep seismic-style wall below 20 Hz (dominates the raw sample
    variance, as in real interferometer strain), a flat floor at
    100-300 Hz, a gentle high-frequency rise, 60*n Hz mains lines, and a
    violin-mode cluster near 500 Hz.
    """
    return PsdModel(
        segments=(
            PsdSegment(f_hz=20.0, level=625.0, slope=-6.0),
            PsdSegment(f_hz=100.0, level=1.0, slope=0.0),
            PsdSegment(f_hz=300.0, level=1.0, slope=1.5),
        ),
        lines=(
            PsdLine(f_hz=60.0, ratio=100.0, width_hz=0.5),
            PsdLine(f_hz=120.0, ratio=100.0, width_hz=0.5),
            PsdLine(f_hz=180.0, ratio=100.0, width_hz=0.5),
            PsdLine(f_hz=497.0, ratio=30.0, width_hz=1.0),
            PsdLine(f_hz=503.0, ratio=30.0, width_hz=1.0),
        ),
        f_floor_hz=1.0,
    )


def colored_noise(
    model: PsdModel,
    duration: float,
    fs: float,
    seed: int,
    std_segments: list[tuple[float, float, float]] | None = None,
) -> TimeSeries:
    """Gaussian noise whose one-sided PSD follows ``model``.

    Frequency-domain synthesis: independent complex-normal draws per bin
    scaled by sqrt(PSD * n * fs / 2), inverse-transformed to time.  The
    DC bin is zeroed.  ``std_segments`` optionally applies piecewise
    standard-deviation factors ``(t_start, t_end, factor)`` afterwards,
    for non-stationarity studies; default off.

    Deterministic per seed.
    """
    n = int(round(duration * fs))
    if n < 2:
        raise ValidationError("duration * fs must be at least 2 samples")
    rng = rng_for(seed)
    n_f = n // 2 + 1
    freqs = np.arange(n_f) * (fs / n)
    psd = model.evaluate(freqs)
    scale = np.sqrt(psd * n * fs / 2.0)
    re = rng.standard_normal(n_f)
    im = rng.standard_normal(n_f)
    bins = (re + 1j * im) / math.sqrt(2.0) * scale
    bins[0] = 0.0
    if n % 2 == 0:
        # real Nyquist bin; one-sided density there has no factor 2
        bins[-1] = re[-1] * scale[-1] * math.sqrt(2.0)
    x = np.fft.irfft(bins, n=n)
    if std_segments:
        t = np.arange(n) / fs
        for t_a, t_b, factor in std_segments:
            if factor <= 0:
                raise ValidationError("std modulation factors must be positive")
            x[(t >= t_a) & (t < t_b)] *= factor
    return TimeSeries(fs=fs, t0=0.0, samples=x)


@dataclass(frozen=True)
class BurstSpec:
    """Short burst description.

    ``sigma_ratio`` is the target standard deviation relative to the
    standard deviation of a reference series (the host noise).  For
    ``sine_decay`` the envelope is exp(-t / decay_tau); ``decay_tau=None``
    means constant envelope.
    """

    kind: str
    duration: float
    sigma_ratio: float
    f0: float = 0.0
    decay_tau: float | None = 0.25
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("sine_decay", "awgn"):
            raise ValidationError(f"unknown burst kind {self.kind!r}")
        if self.duration <= 0:
            raise ValidationError("burst duration must be positive")
        if self.sigma_ratio <= 0:
            raise ValidationError("sigma_ratio must be positive")
        if self.kind == "sine_decay" and self.f0 <= 0:
            raise ValidationError("sine burst needs f0 > 0")
        if self.decay_tau is not None and self.decay_tau <= 0:
            raise ValidationError("decay_tau must be positive or None")


def _ref_std(ref: TimeSeries) -> float:
    std = float(np.std(ref.samples))
    if std <= 0.0:
        raise DegeneracyError("reference series has zero standard deviation")
    return std


def sine_burst(spec: BurstSpec, ref: TimeSeries) -> TimeSeries:
    """Decaying sine scaled to ``sigma_ratio * std(ref)`` exactly."""
    if spec.kind != "sine_decay":
        raise ValidationError(f"expected a sine_decay spec, got {spec.kind!r}")
    fs = ref.fs
    n = int(round(spec.duration * fs))
    if n < 2:
        raise ValidationError("burst shorter than two samples")
    t = np.arange(n) / fs
    x = np.sin(2.0 * np.pi * spec.f0 * t)
    if spec.decay_tau is not None:
        x = x * np.exp(-t / spec.decay_tau)
    std = float(np.std(x))
    if std <= 0.0:
        raise DegeneracyError("burst waveform has zero standard deviation")
    x *= spec.sigma_ratio * _ref_std(ref) / std
    return TimeSeries(fs=fs, t0=0.0, samples=x)


def awgn_burst(spec: BurstSpec, ref: TimeSeries) -> TimeSeries:
    """White Gaussian burst scaled to ``sigma_ratio * std(ref)`` exactly."""
    if spec.kind != "awgn":
        raise ValidationError(f"expected an awgn spec, got {spec.kind!r}")
    fs = ref.fs
    n = int(round(spec.duration * fs))
    if n < 2:
        raise ValidationError("burst shorter than two samples")
    x = rng_for(spec.seed).standard_normal(n)
    std = float(np.std(x))
    if std <= 0.0:
        raise DegeneracyError("burst draw has zero standard deviation")
    x *= spec.sigma_ratio * _ref_std(ref) / std
    return TimeSeries(fs=fs, t0=0.0, samples=x)


def line_interference(
    amplitude: float,
    f0: float = 60.0,
    delta: float = 0.015625,
    duration: float = 32.0,
    fs: float = 4096.0,
) -> TimeSeries:
    """Pure cosine at ``f0 + delta`` Hz.

    The default offset is half a frequency bin of a 32 s analysis block,
    which parks the tone between FFT bins and forces spectral leakage
    into the neighbours.
    """
    f = f0 + delta
    if f >= fs / 2:
        raise ValidationError(f"tone frequency {f} Hz is at or above Nyquist {fs / 2} Hz")
    n = int(round(duration * fs))
    if n < 2:
        raise ValidationError("duration * fs must be at least 2 samples")
    t = np.arange(n) / fs
    return TimeSeries(fs=fs, t0=0.0, samples=amplitude * np.cos(2.0 * np.pi * f * t))


def inject(host: TimeSeries, signal: TimeSeries, t_at: float) -> TimeSeries:
    """Add ``signal`` into ``host`` starting at time ``t_at`` (sample-snapped)."""
    if abs(host.fs - signal.fs) > 1e-9 * host.fs:
        raise ValidationError(
            f"sample-rate mismatch: host {host.fs} Hz, signal {signal.fs} Hz"
        )
    j = int(round((t_at - host.t0) * host.fs))
    if j < 0 or j + signal.n > host.n:
        raise ValidationError(
            f"injection at {t_at} s (+{signal.duration} s) overflows the host span "
            f"[{host.t0}, {host.t0 + host.duration}] s"
        )
    out = host.samples.copy()
    out[j:j + signal.n] += signal.samples
    return TimeSeries(host.fs, host.t0, out)
