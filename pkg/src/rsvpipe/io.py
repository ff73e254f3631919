"""Native on-disk formats for recordings and epoch sets.

Recording: ``<stem>.json`` sidecar, ``<stem>.bin`` little-endian float32
channel-major payload, ``<stem>.events.csv`` with
``sample_index,label,block_id,task_id`` rows.

Epochs: one binary file. Fixed little-endian header
``magic, version, n, n_channels, n_times, rate, window_start, window_end``,
then ``n * n_channels * n_times`` float32 values, one label byte per epoch
(1 = target), and a length-prefixed JSON trailer carrying channel names,
onsets, blocks and tasks.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .errors import EmptySetError, FormatError
from .preprocess import LABELS, ContinuousRecording, EpochSet, Event

RECORDING_FORMAT = "rsvpipe-recording"
RECORDING_VERSION = 1
EVENT_HEADER = ["sample_index", "label", "block_id", "task_id"]

EPOCH_MAGIC = b"RSVPEPOC"
EPOCH_VERSION = 1
_EPOCH_HEADER = struct.Struct("<8sIIIIddd")


def _stem(path):
    path = Path(path)
    if path.suffix in (".json", ".bin"):
        path = path.with_suffix("")
    return path


def recording_paths(path):
    stem = _stem(path)
    return (
        stem.with_name(stem.name + ".json"),
        stem.with_name(stem.name + ".bin"),
        stem.with_name(stem.name + ".events.csv"),
    )


def write_recording(rec: ContinuousRecording, path):
    """Write a recording; ``path`` may be a stem or the sidecar ``.json`` path."""
    sidecar, payload, events = recording_paths(path)
    sidecar.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "format": RECORDING_FORMAT,
        "version": RECORDING_VERSION,
        "rate": float(rec.rate),
        "channels": list(rec.channels),
        "units": "uV",
        "n_samples": int(rec.n_samples),
        "dtype": "float32-le",
        "layout": "channel-major",
        "payload": payload.name,
        "events": events.name,
    }
    sidecar.write_text(json.dumps(header, indent=2) + "\n")
    payload.write_bytes(np.ascontiguousarray(rec.data, dtype="<f4").tobytes())
    with open(events, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENT_HEADER)
        for ev in rec.events:
            w.writerow([ev.sample, ev.label, ev.block, ev.task])
    return sidecar


def _header_offset(text, key):
    i = text.find(f'"{key}"')
    return i if i >= 0 else 0


def read_recording(path) -> ContinuousRecording:
    sidecar, _, _ = recording_paths(path)
    raw = sidecar.read_bytes()
    try:
        text = raw.decode("utf-8")
        header = json.loads(text)
    except UnicodeDecodeError as exc:
        raise FormatError(f"{sidecar}: header is not UTF-8", offset=exc.start) from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{sidecar}: malformed header: {exc.msg}", offset=exc.pos, line=exc.lineno) from exc
    if not isinstance(header, dict):
        raise FormatError(f"{sidecar}: header must be a JSON object", offset=0)
    if header.get("format") != RECORDING_FORMAT:
        raise FormatError(f"{sidecar}: not a recording header", offset=_header_offset(text, "format"))
    version = header.get("version")
    if not isinstance(version, int) or version < 1:
        raise FormatError(f"{sidecar}: invalid version {version!r}", offset=_header_offset(text, "version"))
    if version > RECORDING_VERSION:
        raise FormatError(
            f"{sidecar}: unsupported version {version} (reader supports {RECORDING_VERSION})",
            offset=_header_offset(text, "version"),
        )
    for key in ("rate", "channels", "n_samples", "payload", "events"):
        if key not in header:
            raise FormatError(f"{sidecar}: missing header field {key!r}", offset=len(raw))
    if header.get("dtype", "float32-le") != "float32-le" or header.get("layout", "channel-major") != "channel-major":
        raise FormatError(f"{sidecar}: unsupported dtype/layout", offset=_header_offset(text, "dtype"))

    n_c = len(header["channels"])
    T = int(header["n_samples"])
    payload = sidecar.with_name(header["payload"])
    blob = payload.read_bytes()
    expected = n_c * T * 4
    if len(blob) != expected:
        kind = "truncated" if len(blob) < expected else "oversized"
        raise FormatError(
            f"{payload}: payload {kind}: expected {expected} bytes, got {len(blob)}",
            offset=min(len(blob), expected),
        )
    data = np.frombuffer(blob, dtype="<f4").reshape(n_c, T).astype(np.float32)
    events = read_events(sidecar.with_name(header["events"]), n_samples=T)
    return ContinuousRecording(rate=header["rate"], channels=header["channels"], data=data, events=events)


def read_events(path, n_samples=None):
    events = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            head = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty events file", line=1) from None
        if head != EVENT_HEADER:
            raise FormatError(f"{path}: expected header {','.join(EVENT_HEADER)}", line=1)
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != 4:
                raise FormatError(f"{path}: expected 4 fields, got {len(row)}", line=line)
            s, label, block, task = row
            if label not in LABELS:
                raise FormatError(f"{path}: unknown label {label!r}", line=line)
            try:
                s, block, task = int(s), int(block), int(task)
            except ValueError:
                raise FormatError(f"{path}: non-integer field", line=line) from None
            if s < 0 or (n_samples is not None and s >= n_samples):
                raise FormatError(f"{path}: sample index {s} outside recording", line=line)
            events.append(Event(s, label, block, task))
    return events


def write_epochs(epochs: EpochSet, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n, n_c, n_t = epochs.epochs.shape
    trailer = json.dumps(
        {
            "channels": list(epochs.channels),
            "onsets": epochs.onsets.tolist(),
            "blocks": epochs.blocks.tolist(),
            "tasks": epochs.tasks.tolist(),
        }
    ).encode()
    with open(path, "wb") as fh:
        fh.write(_EPOCH_HEADER.pack(EPOCH_MAGIC, EPOCH_VERSION, n, n_c, n_t, float(epochs.rate), *epochs.window))
        fh.write(np.ascontiguousarray(epochs.epochs, dtype="<f4").tobytes())
        fh.write(epochs.labels.astype(np.uint8).tobytes())
        fh.write(struct.pack("<I", len(trailer)))
        fh.write(trailer)
    return path


def read_epochs(path, supervised=True) -> EpochSet:
    """Read an epoch file; ``supervised`` rejects empty sets."""
    buf = Path(path).read_bytes()
    hsize = _EPOCH_HEADER.size
    if len(buf) < hsize:
        raise FormatError(f"{path}: header truncated: expected {hsize} bytes, got {len(buf)}", offset=len(buf))
    magic, version, n, n_c, n_t, rate, start, end = _EPOCH_HEADER.unpack_from(buf, 0)
    if magic != EPOCH_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}", offset=0)
    if version != EPOCH_VERSION:
        raise FormatError(f"{path}: unsupported version {version} (reader supports {EPOCH_VERSION})", offset=8)
    data_end = hsize + n * n_c * n_t * 4
    label_end = data_end + n
    if len(buf) < label_end + 4:
        raise FormatError(
            f"{path}: header declares {n}x{n_c}x{n_t} epochs needing {label_end + 4} bytes, file has {len(buf)}",
            offset=len(buf),
        )
    (tlen,) = struct.unpack_from("<I", buf, label_end)
    if len(buf) != label_end + 4 + tlen:
        raise FormatError(
            f"{path}: trailer length mismatch: expected {label_end + 4 + tlen} bytes, got {len(buf)}",
            offset=label_end,
        )
    labels = np.frombuffer(buf, dtype=np.uint8, count=n, offset=data_end)
    if np.any(labels > 1):
        bad = int(np.argmax(labels > 1))
        raise FormatError(f"{path}: invalid label byte {labels[bad]}", offset=data_end + bad)
    try:
        meta = json.loads(buf[label_end + 4 :].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: malformed trailer", offset=label_end + 4) from exc
    if n == 0 and supervised:
        raise EmptySetError(f"{path}: epoch file is empty")
    epochs = np.frombuffer(buf, dtype="<f4", count=n * n_c * n_t, offset=hsize).reshape(n, n_c, n_t).astype(np.float32)
    return EpochSet(
        epochs=epochs,
        labels=labels.astype(np.int8),
        rate=rate,
        window=(start, end),
        channels=meta["channels"],
        onsets=np.asarray(meta["onsets"], dtype=np.int64),
        blocks=np.asarray(meta["blocks"], dtype=np.int64),
        tasks=np.asarray(meta["tasks"], dtype=np.int64),
    )


def epochs_equal(a: EpochSet, b: EpochSet):
    return (
        np.array_equal(a.epochs, b.epochs)
        and np.array_equal(a.labels, b.labels)
        and a.rate == b.rate
        and a.window == b.window
        and a.channels == b.channels
        and np.array_equal(a.onsets, b.onsets)
        and np.array_equal(a.blocks, b.blocks)
        and np.array_equal(a.tasks, b.tasks)
    )


def recordings_equal(a: ContinuousRecording, b: ContinuousRecording):
    return (
        a.rate == b.rate
        and a.channels == b.channels
        and np.array_equal(a.data, b.data)
        and a.events == b.events
    )
