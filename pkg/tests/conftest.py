import numpy as np
import pytest

from rsvpipe.cli import DEFAULT_PREPROCESS, preprocess_recording
from rsvpipe.preprocess import ContinuousRecording, EpochSet, Event
from rsvpipe.synth import NoiseConfig, SynthConfig, synth_rsvp

ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def small_config(**overrides):
    base = dict(blocks=4, images_per_block=120, targets_per_block=8, noise=NoiseConfig(background_std_uv=6.0), seed=3)
    base.update(overrides)
    return SynthConfig(**base)


@pytest.fixture(scope="session")
def small_recording():
    return synth_rsvp(small_config())


@pytest.fixture(scope="session")
def small_epochs(small_recording):
    rec, _ = small_recording
    return preprocess_recording(rec, dict(DEFAULT_PREPROCESS))


def random_recording(rng):
    n_c = int(rng.integers(1, 6))
    T = int(rng.integers(1, 400))
    data = rng.standard_normal((n_c, T)).astype(np.float32) * np.float32(rng.uniform(0.1, 100))
    events = [Event(int(s), str(rng.choice(["standard", "target"])), int(rng.integers(0, 9)), int(rng.integers(0, 3)))
              for s in np.sort(rng.integers(0, T, int(rng.integers(0, 8))))]
    return ContinuousRecording(float(rng.choice([250.0, 1000.0, 512.5])), [f"ch{i}" for i in range(n_c)], data, events)


def random_epochs(rng, n=None):
    n = int(rng.integers(1, 12)) if n is None else n
    n_c, n_t = int(rng.integers(1, 5)), int(rng.integers(1, 30))
    return EpochSet(
        rng.standard_normal((n, n_c, n_t)).astype(np.float32),
        rng.integers(0, 2, n), float(rng.choice([250.0, 100.0])), (0.0, n_t / 250.0),
        [f"e{i}" for i in range(n_c)], rng.integers(0, 10**6, n), rng.integers(0, 9, n), rng.integers(0, 3, n),
    )
