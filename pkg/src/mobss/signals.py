"""Linear mixing/separation model, signal statistics and CSV ingestion.

The data model is deliberately small: multichannel signals are plain
float64 arrays of shape (channels, samples) wrapped in :class:`SignalMatrix`,
mixing is ``x(t) = A s(t) + r(t)`` with optional additive white Gaussian
noise scaled per channel from a target SNR, and separation is
``y(t) = W x(t)``. Statistics (autocorrelation, Pearson correlation,
standardization) use the sample mean over the available samples; lagged
products use only the overlapping samples.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

_GENERATORS = ("ecg-like", "smooth")


def _as_2d_float(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D (channels x samples) array, got ndim={arr.ndim}")
    return arr


@dataclass
class SignalMatrix:
    """N channels x T samples of real-valued signals.

    Used for sources, mixtures and estimates alike. Rows are channels.
    """

    data: np.ndarray
    channel_labels: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.data = _as_2d_float(self.data)
        if self.data.shape[1] < 2:
            raise ValueError("signals need at least 2 samples per channel")
        if not np.isfinite(self.data).all():
            raise ValueError("signal contains non-finite entries")
        if not self.channel_labels:
            self.channel_labels = [f"ch{i + 1}" for i in range(self.data.shape[0])]
        if len(self.channel_labels) != self.data.shape[0]:
            raise ValueError(
                f"{len(self.channel_labels)} labels for {self.data.shape[0]} channels"
            )

    @property
    def channel_count(self) -> int:
        return self.data.shape[0]

    @property
    def sample_count(self) -> int:
        return self.data.shape[1]


@dataclass
class MixingConfig:
    """Square mixing matrix plus optional AWGN level.

    ``snr_db`` is interpreted per channel: each noise channel gets variance
    ``var(clean_channel) * 10**(-snr_db / 10)``. Without ``snr_db`` the noise
    term is identically zero.
    """

    mixing_matrix: np.ndarray
    snr_db: float | None = None
    noise_seed: int = 0

    def __post_init__(self):
        self.mixing_matrix = _as_2d_float(self.mixing_matrix)
        m, n = self.mixing_matrix.shape
        if m != n:
            raise ValueError(f"mixing matrix must be square (determined case), got {m}x{n}")
        if not np.isfinite(self.mixing_matrix).all():
            raise ValueError("mixing matrix contains non-finite entries")
        if self.snr_db is not None and not 0.0 < self.snr_db <= 100.0:
            raise ValueError(f"snr_db must lie in (0, 100], got {self.snr_db}")


@dataclass
class SeparationMatrix:
    """N x M separation matrix; rows produce the individual estimates."""

    w: np.ndarray

    def __post_init__(self):
        self.w = _as_2d_float(self.w)
        if not np.isfinite(self.w).all():
            raise ValueError("separation matrix contains non-finite entries")
        norms = np.linalg.norm(self.w, axis=1)
        if np.any(norms == 0.0):
            raise ValueError("separation matrix has an all-zero row")


def mix(sources: SignalMatrix, cfg: MixingConfig) -> SignalMatrix:
    """Apply the linear mixing model, adding seeded AWGN when SNR is set."""
    a = cfg.mixing_matrix
    if a.shape[1] != sources.channel_count:
        raise ValueError(
            f"mixing matrix has {a.shape[1]} columns but sources have "
            f"{sources.channel_count} channels"
        )
    clean = a @ sources.data
    if cfg.snr_db is not None:
        rng = np.random.default_rng(cfg.noise_seed)
        power = clean.var(axis=1)
        sigma = np.sqrt(power * 10.0 ** (-cfg.snr_db / 10.0))
        clean = clean + sigma[:, None] * rng.standard_normal(clean.shape)
    labels = [f"mix{i + 1}" for i in range(clean.shape[0])]
    return SignalMatrix(clean, labels)


def separate(mixtures: SignalMatrix, w: SeparationMatrix) -> SignalMatrix:
    """Compute the estimates y(t) = W x(t)."""
    if w.w.shape[1] != mixtures.channel_count:
        raise ValueError(
            f"separation matrix has {w.w.shape[1]} columns but mixtures have "
            f"{mixtures.channel_count} channels"
        )
    est = w.w @ mixtures.data
    labels = [f"est{i + 1}" for i in range(est.shape[0])]
    return SignalMatrix(est, labels)


def autocorrelation(signal, max_lag: int) -> np.ndarray:
    """Normalized sample autocorrelation coefficients for lags 0..max_lag.

    The signal is centered by its global mean; the lagged product at lag tau
    averages over the T - tau overlapping samples and is normalized by the
    full-signal variance, so the coefficient at lag 0 is exactly 1.
    """
    x = np.asarray(signal, dtype=float).ravel()
    t = x.size
    if not 0 < max_lag < t:
        raise ValueError(f"max_lag must lie in [1, {t - 1}], got {max_lag}")
    xc = x - x.mean()
    var = np.mean(xc * xc)
    if var == 0.0:
        raise ValueError("autocorrelation of a constant signal is undefined")
    coeffs = np.empty(max_lag + 1)
    coeffs[0] = 1.0
    for lag in range(1, max_lag + 1):
        coeffs[lag] = np.mean(xc[lag:] * xc[:-lag]) / var
    return coeffs


def detect_delay(signal, min_lag: int, max_lag: int) -> int:
    """Lag of the autocorrelation maximum over [min_lag, max_lag].

    Ties are broken toward the smallest lag, so an exactly periodic signal
    reports its fundamental period rather than a multiple.
    """
    if not 1 <= min_lag < max_lag:
        raise ValueError(f"need 1 <= min_lag < max_lag, got [{min_lag}, {max_lag}]")
    coeffs = autocorrelation(signal, max_lag)
    window = coeffs[min_lag : max_lag + 1]
    return min_lag + int(np.argmax(window))


def pearson(a, b) -> float:
    """Sample Pearson correlation coefficient of two equal-length vectors."""
    x = np.asarray(a, dtype=float).ravel()
    y = np.asarray(b, dtype=float).ravel()
    if x.size != y.size:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = np.sqrt(np.mean(xc * xc))
    sy = np.sqrt(np.mean(yc * yc))
    if sx == 0.0 or sy == 0.0:
        raise ValueError("Pearson correlation of a constant signal is undefined")
    return float(np.mean(xc * yc) / (sx * sy))


def standardize(signal) -> np.ndarray:
    """Center and scale a vector to sample mean 0 and sample variance 1."""
    x = np.asarray(signal, dtype=float).ravel()
    xc = x - x.mean()
    sd = np.sqrt(np.mean(xc * xc))
    if sd == 0.0:
        raise ValueError("cannot standardize a constant signal")
    return xc / sd


def _unit_variance(x: np.ndarray) -> np.ndarray:
    return x / x.std()


def _spike_train(period: int, samples: int, rng: np.random.Generator) -> np.ndarray:
    # Narrow biphasic pulses with mild amplitude jitter, a small sensor
    # floor, and a deterministic quasi-periodic interval modulation (a
    # respiratory-arrhythmia stand-in). The modulation makes pulse pairs
    # k beats apart progressively misaligned, so the autocorrelation decays
    # at period multiples without displacing the peak at the period itself.
    width = max(1.5, period / 48.0)
    depth = max(1.5, period / 77.0)
    mod_beats = 7.3
    t = np.arange(samples, dtype=float)
    start = float(rng.integers(0, period))
    phase = rng.uniform(0.0, 2.0 * np.pi)
    out = np.zeros(samples)
    beat = 0
    while True:
        center = start + beat * period + depth * np.sin(2.0 * np.pi * beat / mod_beats + phase)
        if center >= samples:
            break
        amp = 1.0 + 0.1 * rng.standard_normal()
        u = (t - center) / width
        out += amp * (1.0 - u * u) * np.exp(-0.5 * u * u)
        beat += 1
    out += 0.02 * rng.standard_normal(samples)
    return _unit_variance(out)


def couple_channels(channels: np.ndarray, coupling: float) -> np.ndarray:
    """Mix a scaled copy of the first channel into every other channel.

    Models shared baseline wander across biosignal channels: the coupled
    channels are no longer maximally sparse themselves, so over-cleaning
    them (canceling the shared component entirely) looks sparser than the
    true source. Channels are re-standardized to unit variance.
    """
    if not 0.0 <= coupling < 1.0:
        raise ValueError(f"coupling must lie in [0, 1), got {coupling}")
    out = np.array(channels, dtype=float)
    if coupling == 0.0 or out.shape[0] < 2:
        return out
    for i in range(1, out.shape[0]):
        out[i] = _unit_variance(out[i] + coupling * out[0])
    return out


def _band_limited(period: int, samples: int, rng: np.random.Generator) -> np.ndarray:
    # Dense oscillation built from Hann-smoothed white noise, minus a scaled
    # copy of itself one period back. The smoothing window is kept well below
    # the spike period, so the autocorrelation is negligible across the lag
    # range where the spike train peaks except for a single negative dip at
    # the period itself (a structure the time-correlation criterion can use
    # without confusing the delay detector, which looks for the maximum).
    window = np.hanning(max(5, period // 16))
    noise = rng.standard_normal(samples + period + 2 * window.size)
    full = np.convolve(noise, window, mode="full")
    base = full[window.size : window.size + samples + period]
    out = base[period:] - 0.25 * base[:-period]
    return _unit_variance(out)


def synth_sources(kind: str, period: int, samples: int, seed: int) -> SignalMatrix:
    """Deterministic one-channel synthetic surrogate source.

    "ecg-like" is a sparse periodic spike train (both time-correlated at the
    period and sparse); "smooth" is a dense band-limited oscillation with
    neither property at spike-train lags. Multichannel problems stack
    several calls with distinct seeds.
    """
    if period < 1:
        raise ValueError("period must be positive")
    if samples < 4 * period:
        raise ValueError(f"need samples >= 4 * period, got {samples} < {4 * period}")
    rng = np.random.default_rng(seed)
    if kind == "ecg-like":
        return SignalMatrix(_spike_train(period, samples, rng)[None, :], ["ecg-like"])
    if kind == "smooth":
        return SignalMatrix(_band_limited(period, samples, rng)[None, :], ["smooth"])
    raise ValueError(f"unknown generator {kind!r} (expected one of {_GENERATORS})")


def save_signals(m: SignalMatrix, path) -> None:
    """Write a signal matrix as CSV, one column per channel, header row of labels.

    Floats are written with ``repr`` so a round-trip reproduces the matrix
    exactly.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(m.channel_labels)
        for row in m.data.T:
            writer.writerow([repr(float(v)) for v in row])


def load_signals(path) -> SignalMatrix:
    """Read a CSV signal file written by :func:`save_signals` (or compatible)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            labels = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        labels = [lab.strip() for lab in labels]
        n = len(labels)
        columns: list[list[float]] = [[] for _ in range(n)]
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != n:
                raise ValueError(
                    f"{path}: line {lineno}: expected {n} values, got {len(row)}"
                )
            for j, cell in enumerate(row):
                try:
                    columns[j].append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"{path}: line {lineno}: non-numeric cell {cell!r}"
                    ) from None
    if not columns or not columns[0]:
        raise ValueError(f"{path}: no samples")
    return SignalMatrix(np.array(columns), labels)
