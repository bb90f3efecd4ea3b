import numpy as np
import pytest

from gwxlab import (
    PsdLine,
    PsdModel,
    TimeSeries,
    butterworth_bandpass,
    default_detector_model,
    detect_lines,
    inject,
    line_interference,
    slice_window,
    stock_template,
    whiten_full,
    whiten_localized,
)

FS = 4096.0


def best_scale_rel_l2(reference: np.ndarray, candidate: np.ndarray) -> float:
    """Relative L2 error after the best least-squares amplitude match."""
    alpha = float(np.dot(reference, candidate) / np.dot(candidate, candidate))
    return float(np.linalg.norm(reference - alpha * candidate) / np.linalg.norm(reference))


@pytest.fixture(scope="session")
def gw150914_distortion_case():
    """Template plus strong 60 Hz interference, whitened both ways.

    Returns (rel_l2_full, rel_l2_localized) against the band-passed clean
    template, both measured over the event window after a 43-300 Hz pass.
    """
    base = default_detector_model()
    model = PsdModel(
        segments=base.segments,
        lines=(PsdLine(60.0, 1e4, 0.5),) + base.lines[1:],
        f_floor_hz=base.f_floor_hz,
    )
    psd = model.to_power_spectrum(1 / 8.0, int(8 * FS) // 2 + 1)
    tpl = stock_template("gw150914", FS)
    host = TimeSeries(FS, 0.0, np.zeros(int(8 * FS)))
    embedded = inject(host, tpl.base, 4.0)
    line = line_interference(
        amplitude=3.0 * float(np.max(np.abs(tpl.base.samples))),
        f0=60.0, delta=0.015625, duration=8.0, fs=FS,
    )
    noisy = embedded.with_samples(embedded.samples + line.samples)
    reference = slice_window(butterworth_bandpass(embedded, 43.0, 300.0), 4.0, 0.2)

    def event_error(whitened):
        out = slice_window(butterworth_bandpass(whitened, 43.0, 300.0), 4.0, 0.2)
        return best_scale_rel_l2(reference.samples, out.samples)

    bands = detect_lines(psd, threshold_ratio=10.0, median_window_hz=8.0)
    err_full = event_error(whiten_full(noisy, psd))
    err_localized = event_error(whiten_localized(noisy, psd, bands))
    return err_full, err_localized
