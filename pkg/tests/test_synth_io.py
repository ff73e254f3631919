import json

import numpy as np
import pytest
from conftest import random_epochs, random_recording

from rsvpipe import io as rio
from rsvpipe.errors import EmptySetError, FormatError, ParameterError
from rsvpipe.layout import EEG32, blob, default_layout, positions
from rsvpipe.plotting import emit_topomap, interpolate_topography, plot_difference_erp
from rsvpipe.preprocess import ContinuousRecording, Event
from rsvpipe.synth import EogConfig, ErpTemplate, NoiseConfig, SynthConfig, pink_noise, synth_rsvp, target_positions

QUIET = dict(noise=NoiseConfig(background_std_uv=0.0, sensor_std_uv=0.0), eog=EogConfig(0.0, 0.0, 0.0, 0.0))


# generator ---------------------------------------------------------------------------


def test_default_target_ratio_per_block():
    rec, truth = synth_rsvp(SynthConfig(blocks=2))
    for b in range(2):
        labels = [ev.label for ev in rec.events if ev.block == b]
        assert labels.count("target") == 9 and labels.count("standard") == 171
    assert rec.channels[:32] == EEG32 and rec.channels[32:] == ["HEOG", "VEOG"]
    assert rec.rate == 1000.0


def test_onsets_at_stimulus_rate():
    rec, _ = synth_rsvp(SynthConfig(blocks=1, images_per_block=30, targets_per_block=3))
    gaps = np.diff([ev.sample for ev in rec.events])
    assert set(gaps) <= {166, 167}


def test_same_seed_identical_other_seed_differs():
    cfg = dict(blocks=1, images_per_block=40, targets_per_block=3)
    a, _ = synth_rsvp(SynthConfig(seed=5, **cfg))
    b, _ = synth_rsvp(SynthConfig(seed=5, **cfg))
    c, _ = synth_rsvp(SynthConfig(seed=6, **cfg))
    assert a.data.tobytes() == b.data.tobytes() and a.events == b.events
    assert not np.array_equal(a.data, c.data)


def test_truth_onsets_are_target_events():
    rec, truth = synth_rsvp(SynthConfig(blocks=2, images_per_block=60, targets_per_block=5))
    targets = {ev.sample for ev in rec.events if ev.label == "target"}
    assert set(truth.instance_onsets.tolist()) <= targets
    assert truth.template_index.size == truth.instance_onsets.size == 2 * len(targets)


def test_no_adjacent_targets(rng):
    for gap in (2, 4, 7):
        pos = target_positions(180, 9, gap, rng)
        assert np.all(np.diff(pos) >= gap) and pos.min() >= 0 and pos.max() < 180


def test_infeasible_target_placement():
    with pytest.raises(ParameterError):
        synth_rsvp(SynthConfig(blocks=1, images_per_block=20, targets_per_block=8, min_target_gap=3))
    with pytest.raises(ParameterError):
        SynthConfig(images_per_block=10, targets_per_block=10)


def test_invalid_template():
    with pytest.raises(ParameterError):
        SynthConfig(erp_templates=[ErpTemplate(1.2, 0.05, 3.0)])


def test_noiseless_recording_equals_templates():
    cfg = SynthConfig(blocks=1, images_per_block=40, targets_per_block=3, min_target_gap=7, evoked_templates=[], **QUIET)
    rec, truth = synth_rsvp(cfg)
    np.testing.assert_array_equal(rec.data[:32], truth.clean)
    np.testing.assert_array_equal(rec.data[32:], 0.0)


def test_linearity_in_amplitude():
    def clean(scale):
        tpl = [ErpTemplate(0.3, 0.05, 2.0 * scale, "Cz")]
        return synth_rsvp(SynthConfig(blocks=1, images_per_block=30, targets_per_block=2, erp_templates=tpl, seed=1))[1].clean

    np.testing.assert_allclose(clean(2.0), 2.0 * clean(1.0), rtol=0, atol=1e-12)


def test_snr_decreases_with_background():
    snrs = []
    for std in (2.0, 6.0, 18.0):
        cfg = SynthConfig(blocks=1, images_per_block=60, targets_per_block=6, noise=NoiseConfig(background_std_uv=std),
                          eog=EogConfig(blink_rate_hz=0.0), seed=2)
        rec, truth = synth_rsvp(cfg)
        noise = rec.data[:32] - truth.clean
        snrs.append(truth.clean.var() / noise.var())
    assert snrs[0] > snrs[1] > snrs[2]


def test_pink_noise_spectrum_slope():
    x = pink_noise(4, 2**16, 1000.0, 1.0, np.random.default_rng(0))
    f = np.fft.rfftfreq(x.shape[1], 1e-3)
    psd = (np.abs(np.fft.rfft(x, axis=1)) ** 2).mean(0)
    band = (f > 1) & (f < 100)
    slope = np.polyfit(np.log10(f[band]), np.log10(psd[band]), 1)[0]
    assert -1.3 < slope < -0.7
    np.testing.assert_allclose(x.std(axis=1), 1.0)


def test_blinks_reach_eog():
    cfg = SynthConfig(blocks=1, images_per_block=120, targets_per_block=3, eog=EogConfig(blink_rate_hz=0.5), seed=4)
    rec, _ = synth_rsvp(cfg)
    assert np.ptp(rec.data[rec.channels.index("VEOG")]) > 100


def test_config_dict_round_trip():
    cfg = SynthConfig(blocks=2, noise=NoiseConfig(background_std_uv=3.0), seed=9)
    back = SynthConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert back == cfg


def test_template_topography_forms():
    chans = ["Fz", "Cz", "Pz"]
    assert np.argmax(ErpTemplate(0.3, 0.05, 1.0, "Pz").pattern(chans)) == 2
    np.testing.assert_allclose(ErpTemplate(0.3, 0.05, 1.0, [1, 0, 0]).pattern(chans), [1, 0, 0])
    with pytest.raises(ParameterError):
        ErpTemplate(0.3, 0.05, 1.0, [1, 0]).pattern(chans)


# formats -------------------------------------------------------------------------------


def test_recording_round_trip(tmp_path, rng):
    for i in range(10):
        rec = random_recording(rng)
        sidecar = rio.write_recording(rec, tmp_path / f"r{i}")
        assert rio.recordings_equal(rio.read_recording(sidecar), rec)


def test_recording_sidecar_contents(tmp_path, rng):
    rec = random_recording(rng)
    header = json.loads(rio.write_recording(rec, tmp_path / "x").read_text())
    assert header["units"] == "uV" and header["version"] == 1 and header["dtype"] == "float32-le"
    lines = (tmp_path / "x.events.csv").read_text().splitlines()
    assert lines[0] == "sample_index,label,block_id,task_id"


def test_recording_truncated_payload(tmp_path, rng):
    rec = random_recording(rng)
    rio.write_recording(rec, tmp_path / "t")
    payload = tmp_path / "t.bin"
    payload.write_bytes(payload.read_bytes()[:-1])
    with pytest.raises(FormatError, match="expected .* bytes, got"):
        rio.read_recording(tmp_path / "t")


def test_recording_future_version_and_malformed_header(tmp_path, rng):
    rec = random_recording(rng)
    sidecar = rio.write_recording(rec, tmp_path / "v")
    header = json.loads(sidecar.read_text())
    header["version"] = 99
    sidecar.write_text(json.dumps(header))
    with pytest.raises(FormatError, match="unsupported version") as info:
        rio.read_recording(sidecar)
    assert info.value.offset is not None
    sidecar.write_text('{"format": "rsvpipe-recording", "version": 1,,}')
    with pytest.raises(FormatError, match="byte offset") as info:
        rio.read_recording(sidecar)
    assert info.value.offset == sidecar.read_text().index(",,") + 1


def test_events_bad_label_line_number(tmp_path):
    rec = ContinuousRecording(100.0, ["a"], np.zeros((1, 50), np.float32), [Event(1, "target"), Event(5, "standard")])
    rio.write_recording(rec, tmp_path / "e")
    path = tmp_path / "e.events.csv"
    path.write_text(path.read_text().replace("5,standard", "5,novel"))
    with pytest.raises(FormatError, match="line 3") as info:
        rio.read_recording(tmp_path / "e")
    assert info.value.line == 3


def test_epochs_round_trip(tmp_path, rng):
    for i in range(10):
        es = random_epochs(rng)
        rio.write_epochs(es, tmp_path / f"{i}.epochs")
        assert rio.epochs_equal(rio.read_epochs(tmp_path / f"{i}.epochs"), es)


def test_epochs_empty_file(tmp_path, rng):
    es = random_epochs(rng, n=0)
    rio.write_epochs(es, tmp_path / "empty.epochs")
    with pytest.raises(EmptySetError):
        rio.read_epochs(tmp_path / "empty.epochs")
    assert len(rio.read_epochs(tmp_path / "empty.epochs", supervised=False)) == 0


def test_epochs_corruption(tmp_path, rng):
    path = rio.write_epochs(random_epochs(rng, n=4), tmp_path / "c.epochs")
    blob = path.read_bytes()
    path.write_bytes(blob[:-10])
    with pytest.raises(FormatError, match="byte offset"):
        rio.read_epochs(path)
    path.write_bytes(b"NOTMAGIC" + blob[8:])
    with pytest.raises(FormatError, match="magic"):
        rio.read_epochs(path)
    path.write_bytes(blob[:8] + (2).to_bytes(4, "little") + blob[12:])
    with pytest.raises(FormatError, match="unsupported version"):
        rio.read_epochs(path)
    path.write_bytes(blob[:5])
    with pytest.raises(FormatError, match="header truncated"):
        rio.read_epochs(path)


# layout and figures ----------------------------------------------------------------------


def test_layout_covers_cap():
    assert len(EEG32) == 32 and len(default_layout(EEG32)) == 32
    pos = positions(["Cz", "Fz", "Pz", "T7", "T8"])
    np.testing.assert_allclose(pos[0], [0, 0], atol=1e-12)
    assert pos[1, 1] > 0 > pos[2, 1] and pos[3, 0] < 0 < pos[4, 0]
    with pytest.raises(KeyError):
        positions(["Xx1"])
    assert blob(EEG32, "Oz")[EEG32.index("Oz")] == 1.0


def test_topomap_zero_is_uniform():
    _, _, zz = interpolate_topography(np.zeros(32), EEG32)
    assert np.nanmax(np.abs(zz)) == 0.0


def test_topomap_peak_at_pz():
    pattern = np.zeros(32)
    pattern[EEG32.index("Pz")] = 1.0
    xx, yy, zz = interpolate_topography(pattern, EEG32, resolution=101)
    i = np.nanargmax(zz)
    pz = positions(["Pz"])[0]
    assert np.hypot(xx.flat[i] - pz[0], yy.flat[i] - pz[1]) < 0.03


def test_topomap_missing_positions(tmp_path):
    with pytest.raises(ParameterError, match="Xx1"):
        emit_topomap(np.zeros(2), ["Cz", "Xx1"], tmp_path / "m.svg")


def test_svg_output_is_reproducible(tmp_path, rng):
    pattern = rng.standard_normal(32)
    a = emit_topomap(pattern, EEG32, tmp_path / "a.svg", title="x").read_bytes()
    b = emit_topomap(pattern, EEG32, tmp_path / "b.svg", title="x").read_bytes()
    assert a == b and a.lstrip().startswith(b"<?xml")
    t = np.linspace(0, 1, 50)
    plot_difference_erp(t, rng.standard_normal((3, 50)), ["Fz", "Cz", "Pz"], tmp_path / "erp.svg")
    assert (tmp_path / "erp.svg").stat().st_size > 0
