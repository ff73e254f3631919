"""Approximate 2-D scalp positions for the standard 32-channel 10-20 cap.

Polar convention: angle in degrees from the nose (positive toward the right
ear), radius 0.5 at the ear-nasion circle. Nose points to +y.
"""

import numpy as np

EEG32 = [
    "Fp1", "Fz", "F3", "F7", "FT9", "FC5", "FC1", "C3", "T7", "TP9", "CP5", "CP1", "Pz", "P3",
    "P7", "O1", "Oz", "O2", "P4", "P8", "TP10", "CP6", "CP2", "Cz", "C4", "T8", "FT10", "FC6",
    "FC2", "F4", "F8", "Fp2",
]

_POLAR = {
    "Fp1": (-18, 0.511), "Fp2": (18, 0.511), "Fpz": (0, 0.511),
    "F7": (-54, 0.511), "F3": (-39, 0.333), "Fz": (0, 0.256), "F4": (39, 0.333), "F8": (54, 0.511),
    "FT9": (-72, 0.64), "FC5": (-69, 0.397), "FC1": (-32, 0.178), "FCz": (0, 0.128),
    "FC2": (32, 0.178), "FC6": (69, 0.397), "FT10": (72, 0.64),
    "T7": (-90, 0.511), "C3": (-90, 0.256), "Cz": (0, 0.0), "C4": (90, 0.256), "T8": (90, 0.511),
    "TP9": (-108, 0.64), "CP5": (-111, 0.397), "CP1": (-148, 0.178), "CPz": (180, 0.128),
    "CP2": (148, 0.178), "CP6": (111, 0.397), "TP10": (108, 0.64),
    "P7": (-126, 0.511), "P3": (-141, 0.333), "Pz": (180, 0.256), "P4": (141, 0.333), "P8": (126, 0.511),
    "O1": (-162, 0.511), "Oz": (180, 0.511), "O2": (162, 0.511),
}


def positions(channels):
    """(n, 2) array of x/y positions; raises KeyError listing unknown channels."""
    missing = [c for c in channels if c not in _POLAR]
    if missing:
        raise KeyError(f"no scalp position for channels: {missing}")
    theta = np.deg2rad([_POLAR[c][0] for c in channels])
    r = np.array([_POLAR[c][1] for c in channels])
    return np.column_stack([r * np.sin(theta), r * np.cos(theta)])


def default_layout(channels):
    """Mapping name -> (x, y) for every channel with a known position."""
    known = [c for c in channels if c in _POLAR]
    return dict(zip(known, map(tuple, positions(known))))


def blob(channels, center, spread=0.2, scale=1.0):
    """Gaussian topography centered on a channel position."""
    pos = positions(channels)
    c = positions([center])[0]
    d2 = np.sum((pos - c) ** 2, axis=1)
    return scale * np.exp(-d2 / (2 * spread**2))
