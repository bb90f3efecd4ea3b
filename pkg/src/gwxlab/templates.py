"""Chirp templates: phase/envelope extraction, synthesis, and bogus variants.

A template is carried as instantaneous phase ``m(t)`` and envelope
``a(t)`` around an optional carrier ``f0``, reconstructing as
``a(t) * cos(2*pi*f0*t + m(t))``.  Bogus templates add band-limited
Gaussian noise to the phase (and optionally the envelope), producing
chirp-like waveforms that differ substantially from the original.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.signal

from .errors import DegeneracyError, ValidationError
from .rng import rng_for
from .series import TimeSeries, load_strain, save_strain

__all__ = [
    "Template",
    "BogusSpec",
    "extract_phase_amplitude",
    "synthesize_fm",
    "make_bogus",
    "template_error",
    "energy_fraction",
    "stock_template",
    "STOCK_TEMPLATES",
    "save_template",
    "load_template",
]


@dataclass(frozen=True, eq=False)
class Template:
    """Chirp reference decomposed into phase and envelope.

    ``base`` holds the waveform the decomposition came from;
    ``synthesize_fm`` rebuilds ``envelope * cos(2*pi*f0*t + phase)`` on
    the same time grid.
    """

    base: TimeSeries
    phase: np.ndarray
    envelope: np.ndarray
    f0: float = 0.0

    def __post_init__(self):
        phase = np.asarray(self.phase, dtype=np.float64).copy()
        envelope = np.asarray(self.envelope, dtype=np.float64).copy()
        if phase.shape != (self.base.n,) or envelope.shape != (self.base.n,):
            raise ValidationError(
                f"phase/envelope lengths {phase.size}/{envelope.size} must match "
                f"the base series length {self.base.n}"
            )
        if not (np.all(np.isfinite(phase)) and np.all(np.isfinite(envelope))):
            raise ValidationError("phase and envelope must be finite")
        if np.any(envelope < 0):
            raise ValidationError("envelope must be nonnegative")
        if phase.size > 1 and np.max(np.abs(np.diff(phase))) >= np.pi:
            raise ValidationError("phase must be unwrapped: |m[k+1]-m[k]| < pi")
        if self.f0 < 0:
            raise ValidationError(f"carrier must be >= 0 Hz, got {self.f0}")
        phase.setflags(write=False)
        envelope.setflags(write=False)
        object.__setattr__(self, "phase", phase)
        object.__setattr__(self, "envelope", envelope)
        object.__setattr__(self, "f0", float(self.f0))

    @property
    def fs(self) -> float:
        return self.base.fs

    def instantaneous_frequency(self) -> np.ndarray:
        """f0 + dm/dt / 2pi, via central differences."""
        return self.f0 + np.gradient(self.phase) * self.fs / (2.0 * np.pi)


@dataclass(frozen=True)
class BogusSpec:
    """Noise recipe for a bogus template.

    ``sigma_phase`` / ``sigma_amp`` are the standard deviations of the
    additive phase noise (radians) and fractional envelope noise
    (relative to the envelope RMS).  The raw white noise is low-passed at
    ``smoothing_bw`` Hz and rescaled to the exact target deviation, so
    bogus templates stay chirp-like instead of turning into broadband
    hash; ``smoothing_bw=None`` skips the smoothing.
    """

    sigma_phase: float
    sigma_amp: float = 0.0
    smoothing_bw: float | None = 64.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma_phase < 0 or self.sigma_amp < 0:
            raise ValidationError("noise deviations must be nonnegative")
        if self.smoothing_bw is not None and self.smoothing_bw <= 0:
            raise ValidationError("smoothing_bw must be positive or None")


def extract_phase_amplitude(h: TimeSeries, carrier_f0: float = 0.0) -> Template:
    """Analytic-signal decomposition into envelope and unwrapped phase.

    The phase returned excludes the carrier: ``m(t) = arg(z(t)) -
    2*pi*carrier_f0*t``.  Raises when the envelope is near zero over more
    than 10% of the samples or the input holds fewer than four cycles.
    """
    if carrier_f0 < 0:
        raise ValidationError(f"carrier must be >= 0 Hz, got {carrier_f0}")
    z = scipy.signal.hilbert(h.samples)
    envelope = np.abs(z)
    peak = float(np.max(envelope)) if envelope.size else 0.0
    if peak <= 0.0 or np.mean(envelope < 0.01 * peak) > 0.10:
        raise DegeneracyError(
            "phase extraction unreliable: envelope near zero over more than "
            "10% of the samples"
        )
    total = np.unwrap(np.angle(z))
    if abs(total[-1] - total[0]) < 8.0 * np.pi:
        raise DegeneracyError(
            "phase extraction unreliable: input holds fewer than four cycles"
        )
    t = np.arange(h.n) / h.fs
    phase = total - 2.0 * np.pi * carrier_f0 * t
    return Template(base=h, phase=phase, envelope=envelope, f0=carrier_f0)


def _synthesize(fs: float, t0: float, phase, envelope, f0: float) -> TimeSeries:
    t = np.arange(len(phase)) / fs
    return TimeSeries(fs, t0, envelope * np.cos(2.0 * np.pi * f0 * t + phase))


def synthesize_fm(tpl: Template) -> TimeSeries:
    """Rebuild ``envelope * cos(2*pi*f0*t + phase)`` on the base grid."""
    return _synthesize(tpl.fs, tpl.base.t0, tpl.phase, tpl.envelope, tpl.f0)


def _shaped_noise(rng, n: int, fs: float, smoothing_bw: float | None) -> np.ndarray:
    """Unit-std Gaussian noise, optionally low-passed then re-normalized."""
    w = rng.standard_normal(n)
    if smoothing_bw is not None and smoothing_bw < fs / 2:
        sos = scipy.signal.butter(4, smoothing_bw, btype="lowpass", fs=fs, output="sos")
        w = scipy.signal.sosfiltfilt(sos, w)
    std = float(np.std(w))
    if std > 0:
        w = w / std
    return w


def make_bogus(tpl: Template, spec: BogusSpec) -> TimeSeries:
    """Synthesize a bogus template with noisy phase (and envelope).

    Deterministic for a fixed seed; with both deviations zero the output
    equals :func:`synthesize_fm` exactly.
    """
    rng = rng_for(spec.seed)
    n = tpl.base.n
    w_phase = _shaped_noise(rng, n, tpl.fs, spec.smoothing_bw) * spec.sigma_phase
    w_amp = _shaped_noise(rng, n, tpl.fs, spec.smoothing_bw) * spec.sigma_amp
    amp_rms = float(np.sqrt(np.mean(tpl.envelope**2)))
    envelope = tpl.envelope + amp_rms * w_amp
    return _synthesize(tpl.fs, tpl.base.t0, tpl.phase + w_phase, envelope, tpl.f0)


def template_error(ideal: TimeSeries, candidate: TimeSeries) -> tuple[TimeSeries, float]:
    """Difference series and relative L2 error ``||ideal-candidate|| / ||ideal||``."""
    if ideal.n != candidate.n:
        raise ValidationError(
            f"length mismatch: {ideal.n} vs {candidate.n} samples"
        )
    if abs(ideal.fs - candidate.fs) > 1e-9 * ideal.fs:
        raise ValidationError(
            f"sample-rate mismatch: {ideal.fs} vs {candidate.fs} Hz"
        )
    err = ideal.samples - candidate.samples
    denom = float(np.linalg.norm(ideal.samples))
    if denom <= 0.0:
        raise DegeneracyError("ideal series has zero energy")
    return ideal.with_samples(err), float(np.linalg.norm(err) / denom)


def energy_fraction(
    ts: TimeSeries,
    band: tuple[float, float] | None = None,
    window: tuple[float, float] | None = None,
) -> float:
    """Fraction of total energy inside a frequency band or a time window."""
    if (band is None) == (window is None):
        raise ValidationError("pass exactly one of band= or window=")
    total = float(np.dot(ts.samples, ts.samples))
    if total <= 0.0:
        raise DegeneracyError("zero-energy series has no energy fraction")
    if band is not None:
        f_lo, f_hi = band
        if not (0.0 <= f_lo < f_hi <= ts.fs / 2):
            raise ValidationError(
                f"band must satisfy 0 <= f_lo < f_hi <= fs/2, got {f_lo}..{f_hi}"
            )
        spec = np.fft.rfft(ts.samples)
        power = np.abs(spec) ** 2
        weights = np.full(power.size, 2.0)
        weights[0] = 1.0
        if ts.n % 2 == 0:
            weights[-1] = 1.0
        freqs = np.arange(power.size) * (ts.fs / ts.n)
        sel = (freqs >= f_lo) & (freqs <= f_hi)
        return float(np.sum(weights[sel] * power[sel]) / np.sum(weights * power))
    t_a, t_b = window
    if not (t_a < t_b):
        raise ValidationError(f"window must satisfy t_a < t_b, got {t_a}..{t_b}")
    if t_a < ts.t0 - 0.5 / ts.fs or t_b > ts.t0 + ts.duration + 0.5 / ts.fs:
        raise ValidationError("window falls outside the series span")
    i0 = max(int(round((t_a - ts.t0) * ts.fs)), 0)
    i1 = min(int(round((t_b - ts.t0) * ts.fs)), ts.n)
    part = ts.samples[i0:i1]
    return float(np.dot(part, part) / total)


# ---------------------------------------------------------------------------
# stock chirp generators


def _inspiral_chirp(
    fs: float,
    duration: float,
    f_start: float,
    f_end: float,
    carrier_f0: float = 0.0,
    amp_exponent: float = 1.0,
    taper: float = 0.10,
) -> Template:
    """Monotone upward frequency sweep with rising envelope.

    Frequency follows the inspiral-style law
    ``f(t) = (f_start**(-8/3) + (f_end**(-8/3) - f_start**(-8/3)) * t/T)**(-3/8)``
    and the envelope grows as ``f(t)**amp_exponent`` under a cosine edge
    taper (``taper`` is the total tapered fraction, 5% per edge).
    """
    n = int(round(duration * fs))
    if n < 8:
        raise ValidationError("chirp too short for its sample rate")
    t = np.arange(n) / fs
    tau = t / (n / fs)
    a, b = f_start ** (-8.0 / 3.0), f_end ** (-8.0 / 3.0)
    freq = (a + (b - a) * tau) ** (-3.0 / 8.0)
    total_phase = 2.0 * np.pi * scipy.integrate.cumulative_trapezoid(freq, t, initial=0.0)
    envelope = (freq / f_end) ** amp_exponent
    envelope *= scipy.signal.windows.tukey(n, alpha=taper)
    phase = total_phase - 2.0 * np.pi * carrier_f0 * t
    base = _synthesize(fs, 0.0, phase, envelope, carrier_f0)
    return Template(base=base, phase=phase, envelope=envelope, f0=carrier_f0)


def _gw150914_like(fs: float) -> Template:
    return _inspiral_chirp(fs, duration=0.2, f_start=35.0, f_end=250.0)


def _gw151226_like(fs: float) -> Template:
    # AM+FM form around a 56 Hz carrier
    return _inspiral_chirp(fs, duration=1.0, f_start=35.0, f_end=350.0, carrier_f0=56.0)


def _gw170104_like(fs: float) -> Template:
    return _inspiral_chirp(fs, duration=0.12, f_start=35.0, f_end=300.0)


STOCK_TEMPLATES = {
    "gw150914": _gw150914_like,
    "gw151226": _gw151226_like,
    "gw170104": _gw170104_like,
}


def stock_template(name: str, fs: float = 4096.0) -> Template:
    """Parameterized stand-in chirps for the three reference events.

    ``gw150914``: 0.2 s, 35 to 250 Hz.  ``gw151226``: 1 s around a 56 Hz
    carrier, sweeping 35 to 350 Hz.  ``gw170104``: 0.12 s, 35 to 300 Hz.
    Real template files can be substituted via the strain file formats.
    """
    try:
        maker = STOCK_TEMPLATES[name]
    except KeyError:
        raise ValidationError(
            f"unknown stock template {name!r}; pick one of {sorted(STOCK_TEMPLATES)}"
        ) from None
    return maker(float(fs))


def save_template(tpl: Template, basename: str | os.PathLike) -> tuple[str, str]:
    """Write ``<basename>.gwx`` (waveform) and ``<basename>.json`` (metadata)."""
    wav = f"{basename}.gwx"
    meta = f"{basename}.json"
    save_strain(tpl.base, wav)
    info = {
        "f0_hz": tpl.f0,
        "fs_hz": tpl.fs,
        "duration_s": tpl.base.duration,
        "waveform": os.path.basename(wav),
    }
    with open(meta, "w", encoding="ascii") as fh:
        json.dump(info, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return wav, meta


def load_template(basename: str | os.PathLike) -> Template:
    """Read a template saved by :func:`save_template`, re-extracting phase."""
    with open(f"{basename}.json", "r", encoding="ascii") as fh:
        info = json.load(fh)
    base = load_strain(f"{basename}.gwx")
    return extract_phase_amplitude(base, carrier_f0=float(info.get("f0_hz", 0.0)))
