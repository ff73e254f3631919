"""Synthetic RSVP recordings with known target ERPs.

Stimuli arrive at a fixed rate in blocks; a few randomly placed targets per
block each add every target template (Gaussian temporal bump times a
topography). The background is spatially mixed 1/f noise plus white sensor
noise, and the EOG channels carry blink transients.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import signal

from .errors import ParameterError
from .layout import EEG32, blob, positions
from .preprocess import STANDARD, TARGET, ContinuousRecording, Event

EOG_CHANNELS = ("HEOG", "VEOG")


@dataclass
class ErpTemplate:
    latency_s: float
    width_s: float
    amplitude_uv: float
    topography: object = "Pz"  # channel name (Gaussian blob), dict(center, spread, scale) or per-channel list

    def pattern(self, channels):
        topo = self.topography
        if isinstance(topo, str):
            return blob(channels, topo)
        if isinstance(topo, dict):
            return blob(channels, topo["center"], topo.get("spread", 0.2), topo.get("scale", 1.0))
        topo = np.asarray(topo, dtype=float)
        if topo.shape != (len(channels),):
            raise ParameterError(f"topography has {topo.size} entries for {len(channels)} channels")
        return topo

    def waveform(self, t):
        return self.amplitude_uv * np.exp(-0.5 * ((t - self.latency_s) / self.width_s) ** 2)


def _default_targets():
    return [
        ErpTemplate(0.25, 0.035, 3.0, {"center": "Fz", "spread": 0.22, "scale": -1.0}),
        ErpTemplate(0.42, 0.08, 5.0, {"center": "Pz", "spread": 0.25}),
    ]


def _default_evoked():
    return [ErpTemplate(0.10, 0.02, 2.0, {"center": "Oz", "spread": 0.25})]


@dataclass
class NoiseConfig:
    background_std_uv: float = 18.0
    pink_exponent: float = 1.0
    sensor_std_uv: float = 1.5
    spatial_spread: float = 0.3


@dataclass
class EogConfig:
    blink_rate_hz: float = 0.05
    amplitude_uv: float = 150.0
    background_std_uv: float = 4.0
    eeg_leak: float = 0.4


@dataclass
class SynthConfig:
    channels: int = 32
    rate: float = 1000.0
    stimulus_rate: float = 6.0
    blocks: int = 9
    images_per_block: int = 180
    targets_per_block: int = 9
    tasks: int = 1
    min_target_gap: int = 2  # in stimulus positions; 2 forbids adjacent targets
    block_gap_s: float = 2.0
    erp_templates: list = field(default_factory=_default_targets)
    evoked_templates: list = field(default_factory=_default_evoked)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    eog: EogConfig = field(default_factory=EogConfig)
    seed: int = 42

    def __post_init__(self):
        if not 0 <= self.targets_per_block < self.images_per_block:
            raise ParameterError("targets_per_block must be smaller than images_per_block")
        if not 1 <= self.channels <= len(EEG32):
            raise ParameterError(f"channels must be in 1..{len(EEG32)}")
        for t in list(self.erp_templates) + list(self.evoked_templates):
            if not 0 <= t.latency_s < 1 or t.amplitude_uv < 0 or t.width_s <= 0:
                raise ParameterError(f"invalid template {t}")

    @property
    def eeg_channels(self):
        return EEG32[: self.channels]

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for key in ("erp_templates", "evoked_templates"):
            if key in d:
                d[key] = [t if isinstance(t, ErpTemplate) else ErpTemplate(**t) for t in d[key]]
        if "noise" in d and isinstance(d["noise"], dict):
            d["noise"] = NoiseConfig(**d["noise"])
        if "eog" in d and isinstance(d["eog"], dict):
            d["eog"] = EogConfig(**d["eog"])
        return cls(**d)


@dataclass
class GroundTruth:
    target_onsets: np.ndarray
    template_index: np.ndarray  # template id of each injected instance
    instance_onsets: np.ndarray
    clean: np.ndarray  # (n_eeg, n_samples) target-ERP-only traces
    patterns: np.ndarray  # (n_eeg, n_templates)


def target_positions(n_images, n_targets, min_gap, rng):
    """Sorted target positions with consecutive differences of at least ``min_gap``."""
    gap = max(int(min_gap), 1)
    free = n_images - (n_targets - 1) * (gap - 1)
    if n_targets and free < n_targets:
        raise ParameterError(f"cannot place {n_targets} targets in {n_images} images with gap {gap}")
    picks = np.sort(rng.choice(free, size=n_targets, replace=False))
    return picks + np.arange(n_targets) * (gap - 1)


def pink_noise(n_channels, n_samples, rate, exponent, rng, f_lo=0.1):
    """Unit-variance noise with power ~ 1/f**exponent from a pole-zero shaping cascade.

    First-order sections are log-spaced between ``f_lo`` and Nyquist; each
    zero sits a fraction ``exponent/2`` of the way to the next pole, giving
    an average amplitude slope of ``-exponent/2`` decades per decade.
    """
    white = rng.standard_normal((n_channels, n_samples))
    if exponent <= 0:
        return white
    f_hi = rate / 2.0
    per_decade = 2
    n_poles = max(int(np.ceil(np.log10(f_hi / f_lo) * per_decade)), 1)
    step = 1.0 / per_decade
    poles_hz = f_lo * 10 ** (step * np.arange(n_poles))
    frac = min(exponent / 2.0, 1.0)
    zeros_hz = poles_hz * 10 ** (step * frac) if frac < 1.0 else np.array([])
    z = -2 * np.pi * zeros_hz
    p = -2 * np.pi * poles_hz
    zd, pd, kd = signal.bilinear_zpk(z, p, 1.0, rate)
    sos = signal.zpk2sos(zd, pd, kd)
    out = signal.sosfilt(sos, white, axis=1)
    out -= out.mean(axis=1, keepdims=True)
    return out / out.std(axis=1, keepdims=True)


def _add_instances(trace, pattern, kernel, onsets):
    L = kernel.size
    T = trace.shape[1]
    for o in onsets:
        n = min(L, T - o)
        trace[:, o : o + n] += pattern[:, None] * kernel[None, :n]


def synth_rsvp(cfg: SynthConfig):
    """Generate ``(ContinuousRecording, GroundTruth)`` fully determined by ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    chans = cfg.eeg_channels
    n_c = len(chans)
    rate = cfg.rate
    block_len = int(round(cfg.images_per_block * rate / cfg.stimulus_rate))
    gap = int(round(cfg.block_gap_s * rate))
    n_blocks = cfg.blocks * cfg.tasks
    T = n_blocks * (block_len + gap) + gap

    events, target_onsets = [], []
    for b in range(n_blocks):
        start = gap + b * (block_len + gap)
        onsets = start + np.round(np.arange(cfg.images_per_block) * rate / cfg.stimulus_rate).astype(int)
        tpos = set(target_positions(cfg.images_per_block, cfg.targets_per_block, cfg.min_target_gap, rng).tolist())
        for i, o in enumerate(onsets):
            label = TARGET if i in tpos else STANDARD
            events.append(Event(int(o), label, block=b % cfg.blocks, task=b // cfg.blocks))
            if label == TARGET:
                target_onsets.append(int(o))
    target_onsets = np.array(target_onsets, dtype=np.int64)
    all_onsets = np.array([ev.sample for ev in events], dtype=np.int64)

    support = np.arange(int(round(1.5 * rate))) / rate
    clean = np.zeros((n_c, T))
    patterns = []
    for tpl in cfg.erp_templates:
        pat = tpl.pattern(chans)
        patterns.append(pat)
        _add_instances(clean, pat, tpl.waveform(support), target_onsets)
    evoked = np.zeros((n_c, T))
    for tpl in cfg.evoked_templates:
        _add_instances(evoked, tpl.pattern(chans), tpl.waveform(support), all_onsets)

    nz = cfg.noise
    eeg = clean + evoked
    if nz.background_std_uv > 0:
        sources = pink_noise(n_c, T, rate, nz.pink_exponent, rng)

        pos = positions(chans)
        d2 = np.sum((pos[:, None, :] - pos[None, :, :]) ** 2, axis=2)
        mixing = np.exp(-d2 / (2 * nz.spatial_spread**2)) @ rng.standard_normal((n_c, n_c))
        bg = mixing @ sources
        bg *= nz.background_std_uv / bg.std(axis=1, keepdims=True)
        eeg = eeg + bg
    if nz.sensor_std_uv > 0:
        eeg = eeg + nz.sensor_std_uv * rng.standard_normal((n_c, T))

    eo = cfg.eog
    eog = np.zeros((len(EOG_CHANNELS), T))
    if eo.background_std_uv > 0:
        eog += eo.background_std_uv * pink_noise(len(EOG_CHANNELS), T, rate, 1.0, rng)
    n_blinks = rng.poisson(eo.blink_rate_hz * T / rate) if eo.blink_rate_hz > 0 else 0
    if n_blinks and eo.amplitude_uv > 0:
        blink_t = np.arange(int(round(0.6 * rate))) / rate
        kernel = eo.amplitude_uv * np.exp(-0.5 * ((blink_t - 0.3) / 0.06) ** 2)
        starts = np.sort(rng.integers(0, T - 1, size=n_blinks))
        _add_instances(eog, np.array([0.15, 1.0]), kernel, starts)
        if eo.eeg_leak > 0:
            leak = eo.eeg_leak * blob(chans, "Fp1", 0.25) + eo.eeg_leak * blob(chans, "Fp2", 0.25)
            _add_instances(eeg, 0.5 * leak, kernel, starts)

    rec = ContinuousRecording(rate=rate, channels=list(chans) + list(EOG_CHANNELS), data=np.vstack([eeg, eog]), events=events)
    n_t = len(cfg.erp_templates)
    truth = GroundTruth(
        target_onsets=target_onsets,
        template_index=np.repeat(np.arange(n_t), target_onsets.size),
        instance_onsets=np.tile(target_onsets, n_t),
        clean=clean,
        patterns=np.column_stack(patterns) if patterns else np.zeros((n_c, 0)),
    )
    return rec, truth
