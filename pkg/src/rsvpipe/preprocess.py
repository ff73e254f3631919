"""Continuous recordings, epoch sets and the preprocessing chain.

Re-reference, band-pass, resample, epoch, reject EOG-contaminated trials
and average ERPs. Data are in microvolts throughout.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np
from scipy import signal

from .errors import ClassCollapseError, EmptySetError, ParameterError, ShapeError

log = logging.getLogger(__name__)

TARGET = "target"
STANDARD = "standard"
LABELS = (STANDARD, TARGET)  # index == binary class code


@dataclass(frozen=True)
class Event:
    sample: int
    label: str
    block: int = 0
    task: int = 0


@dataclass
class ContinuousRecording:
    rate: float
    channels: list
    data: np.ndarray  # (n_channels, n_samples)
    events: list = field(default_factory=list)

    def __post_init__(self):
        self.data = np.asarray(self.data)
        self.channels = list(self.channels)
        if self.rate <= 0:
            raise ParameterError(f"rate must be positive, got {self.rate}")
        if self.data.ndim != 2 or self.data.shape[0] != len(self.channels):
            raise ShapeError(
                f"data shape {self.data.shape} does not match {len(self.channels)} channels"
            )
        if len(set(self.channels)) != len(self.channels):
            raise ParameterError("channel names must be unique")
        T = self.data.shape[1]
        for ev in self.events:
            if not 0 <= ev.sample < T:
                raise ParameterError(f"event at sample {ev.sample} outside recording of {T}")
            if ev.label not in LABELS:
                raise ParameterError(f"unknown event label {ev.label!r}")

    @property
    def n_samples(self):
        return self.data.shape[1]

    def channel_index(self, names):
        missing = [c for c in names if c not in self.channels]
        if missing:
            raise ParameterError(f"unknown channels: {missing}")
        return [self.channels.index(c) for c in names]


@dataclass
class EpochSet:
    """Stack of labeled epochs, ``epochs[i]`` is (n_channels, n_times).

    ``labels`` holds binary codes (1 = target, 0 = standard). ``onsets`` are
    the stimulus sample indices in the source recording at ``rate``.
    """

    epochs: np.ndarray
    labels: np.ndarray
    rate: float
    window: tuple
    channels: list
    onsets: np.ndarray = None
    blocks: np.ndarray = None
    tasks: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.epochs = np.asarray(self.epochs)
        if self.epochs.ndim != 3:
            raise ShapeError(f"epochs must be 3-D, got shape {self.epochs.shape}")
        n = self.epochs.shape[0]
        self.labels = np.asarray(self.labels, dtype=np.int8).reshape(-1)
        if self.labels.shape[0] != n:
            raise ShapeError(f"{n} epochs but {self.labels.shape[0]} labels")
        if not np.all(np.isin(self.labels, (0, 1))):
            raise ParameterError("labels must be 0 (standard) or 1 (target)")
        self.channels = list(self.channels)
        if len(self.channels) != self.epochs.shape[1]:
            raise ShapeError("channel list does not match epoch shape")
        self.window = (float(self.window[0]), float(self.window[1]))
        zeros = np.zeros(n, dtype=np.int64)
        self.onsets = zeros.copy() if self.onsets is None else np.asarray(self.onsets, dtype=np.int64)
        self.blocks = zeros.copy() if self.blocks is None else np.asarray(self.blocks, dtype=np.int64)
        self.tasks = zeros.copy() if self.tasks is None else np.asarray(self.tasks, dtype=np.int64)

    def __len__(self):
        return self.epochs.shape[0]

    @property
    def n_channels(self):
        return self.epochs.shape[1]

    @property
    def n_times(self):
        return self.epochs.shape[2]

    @property
    def times(self):
        return self.window[0] + np.arange(self.n_times) / self.rate

    def subset(self, index):
        index = np.asarray(index)
        return replace(
            self,
            epochs=self.epochs[index],
            labels=self.labels[index],
            onsets=self.onsets[index],
            blocks=self.blocks[index],
            tasks=self.tasks[index],
            meta=dict(self.meta),
        )

    def pick_channels(self, names):
        idx = [self.channels.index(c) for c in names]
        return replace(self, epochs=self.epochs[:, idx, :], channels=list(names), meta=dict(self.meta))

    def drop_channels(self, names):
        return self.pick_channels([c for c in self.channels if c not in set(names)])

    def require_both_classes(self):
        counts = np.bincount(self.labels, minlength=2)
        if counts.min() == 0:
            missing = LABELS[int(np.argmin(counts))]
            raise EmptySetError(f"no {missing} epochs present")
        return counts


def common_average_reference(rec, exclude=()):
    """Subtract the instantaneous mean across channels.

    Channels named in ``exclude`` (e.g. EOG) neither contribute to nor
    receive the reference.
    """
    idx = [i for i, c in enumerate(rec.channels) if c not in set(exclude)]
    if len(idx) < 2:
        raise ParameterError("common average reference needs at least 2 channels")
    data = rec.data.astype(float, copy=True)
    data[idx] -= data[idx].mean(axis=0, keepdims=True)
    return replace(rec, data=data)


def bandpass(rec, lo, hi, order=4):
    """Zero-phase Butterworth band-pass (forward-backward, reflected edges)."""
    nyq = rec.rate / 2.0
    if not 0 < lo < hi < nyq:
        raise ParameterError(f"need 0 < lo < hi < {nyq}, got lo={lo}, hi={hi}")
    sos = signal.butter(order, [lo, hi], btype="bandpass", fs=rec.rate, output="sos")
    padlen = min(rec.n_samples - 1, int(3 * rec.rate / lo))
    data = signal.sosfiltfilt(sos, rec.data.astype(float), axis=1, padtype="even", padlen=padlen)
    return replace(rec, data=data)


def _ratio(target, rate):
    frac = Fraction(target).limit_denominator(10_000) / Fraction(rate).limit_denominator(10_000)
    return frac.numerator, frac.denominator


def resample(rec, target):
    """Polyphase resampling with anti-alias FIR; event indices are floored."""
    if target > rec.rate:
        raise ParameterError(f"upsampling not supported ({rec.rate} -> {target})")
    if target <= 0:
        raise ParameterError("target rate must be positive")
    if target == rec.rate:
        return replace(rec, data=rec.data.copy(), events=list(rec.events))
    up, down = _ratio(target, rec.rate)
    data = signal.resample_poly(rec.data.astype(float), up, down, axis=1, padtype="line")
    T = data.shape[1]
    events = []
    for ev in rec.events:
        s = (ev.sample * up) // down
        events.append(replace(ev, sample=min(s, T - 1)))
    return ContinuousRecording(rate=float(target), channels=rec.channels, data=data, events=events)


def epoch(rec, window=(0.0, 1.0)):
    """Cut one epoch per event; events whose window leaves the recording are dropped.

    The number of dropped events is logged and stored in ``meta['dropped']``.
    """
    start_s, end_s = window
    n_t = int(round((end_s - start_s) * rec.rate))
    offset = int(round(start_s * rec.rate))
    if n_t < 1:
        raise ParameterError(f"window {window} is shorter than one sample")
    kept = [ev for ev in rec.events if ev.sample + offset >= 0 and ev.sample + offset + n_t <= rec.n_samples]
    dropped = len(rec.events) - len(kept)
    if dropped:
        log.info("dropped %d events with truncated windows", dropped)
    if not kept:
        raise EmptySetError("no events left after epoching")
    starts = np.array([ev.sample + offset for ev in kept])
    idx = starts[:, None] + np.arange(n_t)[None, :]
    epochs = np.ascontiguousarray(np.moveaxis(rec.data[:, idx], 0, 1))
    return EpochSet(
        epochs=epochs,
        labels=np.array([LABELS.index(ev.label) for ev in kept]),
        rate=rec.rate,
        window=(start_s, end_s),
        channels=rec.channels,
        onsets=np.array([ev.sample for ev in kept]),
        blocks=np.array([ev.block for ev in kept]),
        tasks=np.array([ev.task for ev in kept]),
        meta={"dropped": dropped},
    )


def reject_trials(epochs, eog_channels, threshold_uv=100.0):
    """Drop epochs whose peak-to-peak amplitude on any EOG channel exceeds the threshold.

    Per-class removal counts go to ``meta['rejected']``.
    """
    missing = [c for c in eog_channels if c not in epochs.channels]
    if missing:
        raise ParameterError(f"EOG channels not found: {missing}")
    idx = [epochs.channels.index(c) for c in eog_channels]
    if idx:
        ptp = np.ptp(epochs.epochs[:, idx, :], axis=2).max(axis=1)
        bad = ptp > threshold_uv
    else:
        bad = np.zeros(len(epochs), dtype=bool)
    rejected = {lab: int(np.sum(bad & (epochs.labels == i))) for i, lab in enumerate(LABELS)}
    for i, lab in enumerate(LABELS):
        present = np.sum(epochs.labels == i)
        if present and rejected[lab] == present:
            raise ClassCollapseError(f"all {present} {lab} epochs rejected")
    out = epochs.subset(np.flatnonzero(~bad))
    out.meta["rejected"] = rejected
    if bad.any():
        log.info("rejected %s", rejected)
    return out


def erp_average(epochs, label):
    code = LABELS.index(label) if isinstance(label, str) else int(label)
    sel = epochs.labels == code
    if not sel.any():
        raise EmptySetError(f"no epochs of class {LABELS[code]}")
    return epochs.epochs[sel].mean(axis=0)


def difference_erp(epochs):
    """Target average minus standard average, (n_channels, n_times)."""
    return erp_average(epochs, TARGET) - erp_average(epochs, STANDARD)
