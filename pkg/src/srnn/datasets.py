"""Synthetic task generators, file-based loaders, and dataset splitting.

Datasets are immutable in spirit: a dense (samples, t_steps, channels)
input array plus either one label per sample (sequence classification) or
one label per step (streaming). The generators are pure functions of
their arguments; the same call always returns the same arrays.

The pattern task draws, once per channel, how many spike events that
channel carries, then gives each class its own event times. Every class
therefore shows the same per-channel spike counts and differs only in
when the events happen, so counting spikes cannot separate the classes;
their temporal order can.

File formats kept deliberately plain:
  dense CSV   one row per timestep: label,v0,...,v{N-1}
  event CSV   one row per spike: sample,t,channel,label
  IDX         big-endian images/labels with the standard magic numbers
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DATASET_KINDS = ("sequence-classification", "streaming")
MANIFEST_FORMAT = "srnn-dataset/1"

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class Dataset:
    inputs: np.ndarray           # (samples, t_steps, channels)
    labels: np.ndarray           # (samples,) or (samples, t_steps)
    kind: str
    n_classes: int

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.inputs.ndim != 3:
            raise ValueError("inputs must be (samples, t_steps, channels)")
        if self.kind not in DATASET_KINDS:
            raise ValueError(f"kind must be one of {DATASET_KINDS}")
        want = 2 if self.kind == "streaming" else 1
        if self.labels.ndim != want:
            raise ValueError(f"{self.kind} labels must be {want}-d")
        if self.labels.shape[0] != self.inputs.shape[0]:
            raise ValueError("one label row per sample is required")
        if want == 2 and self.labels.shape[1] != self.inputs.shape[1]:
            raise ValueError("streaming labels need one entry per step")
        if self.labels.size and (self.labels.min() < 0
                                 or self.labels.max() >= self.n_classes):
            raise ValueError("labels must lie in [0, n_classes)")

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]

    @property
    def t_steps(self) -> int:
        return self.inputs.shape[1]

    @property
    def channels(self) -> int:
        return self.inputs.shape[2]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(inputs=self.inputs[idx], labels=self.labels[idx],
                       kind=self.kind, n_classes=self.n_classes)


def gen_pattern_classification(n_classes: int, t_steps: int, channels: int,
                               jitter_std: float, seed: int,
                               n_samples: int = 200,
                               events_mean: float = 3.0) -> Dataset:
    """Spike-timing classification: jittered copies of per-class templates.

    Each channel's event count is 1 + Poisson(events_mean), drawn once and
    shared by all classes; each class places those events at its own
    uniformly drawn times. A sample is its class template with every event
    time shifted by rounded Gaussian jitter, clipped to the sequence.
    """
    if n_classes < 2 or t_steps < 2 or channels < 1 or n_samples < 1:
        raise ValueError("need n_classes >= 2, t_steps >= 2, channels >= 1, "
                         "n_samples >= 1")
    if jitter_std < 0:
        raise ValueError("jitter_std must be non-negative")
    rng = np.random.default_rng([seed, 0])
    counts = 1 + rng.poisson(events_mean, size=channels)
    counts = np.minimum(counts, t_steps)
    templates = []   # per class: list over channels of event-time arrays
    for _ in range(n_classes):
        templates.append([np.sort(rng.choice(t_steps, size=counts[ch],
                                             replace=False))
                          for ch in range(channels)])
    inputs = np.zeros((n_samples, t_steps, channels))
    labels = np.zeros(n_samples, dtype=int)
    for k in range(n_samples):
        srng = np.random.default_rng([seed, 1 + k])
        label = int(srng.integers(n_classes))
        labels[k] = label
        for ch in range(channels):
            times = templates[label][ch]
            if jitter_std > 0:
                times = times + np.rint(
                    srng.normal(0.0, jitter_std, size=times.shape)).astype(int)
                times = np.clip(times, 0, t_steps - 1)
            inputs[k, times, ch] = 1.0
    return Dataset(inputs=inputs, labels=labels,
                   kind="sequence-classification", n_classes=n_classes)


def pattern_templates(n_classes: int, t_steps: int, channels: int, seed: int,
                      events_mean: float = 3.0) -> np.ndarray:
    """The jitter-free class rasters behind gen_pattern_classification.

    Returns (n_classes, t_steps, channels); useful as a nearest-template
    reference classifier.
    """
    rng = np.random.default_rng([seed, 0])
    counts = np.minimum(1 + rng.poisson(events_mean, size=channels), t_steps)
    out = np.zeros((n_classes, t_steps, channels))
    for c in range(n_classes):
        for ch in range(channels):
            times = np.sort(rng.choice(t_steps, size=counts[ch], replace=False))
            out[c, times, ch] = 1.0
    return out


def _waveform_library(k: int, segment_len: int) -> np.ndarray:
    """k distinct unit-amplitude segments: ramps, triangle, bump, steps."""
    t = np.linspace(0.0, 1.0, segment_len)
    shapes = [
        t,                                   # ramp up
        1.0 - t,                             # ramp down
        1.0 - np.abs(2.0 * t - 1.0),         # triangle
        np.exp(-((t - 0.5) / 0.15) ** 2),    # bump
        np.where(t < 0.5, 0.2, 0.9),         # step
        0.5 + 0.5 * np.sin(2.0 * np.pi * t), # one sine period
    ]
    if k > len(shapes):
        raise ValueError(f"at most {len(shapes)} waveform kinds are defined")
    return np.stack(shapes[:k])


def gen_streaming_waveform(k: int, segment_len: int, segments_per_sample: int,
                           noise_std: float, seed: int,
                           n_samples: int = 100) -> Dataset:
    """Streaming labeling: concatenated waveform segments, a label per step.

    Each sample chains segments_per_sample segments drawn uniformly from k
    waveform kinds, adds Gaussian noise, and labels every step with its
    segment's kind. Single analog channel.
    """
    if k < 2 or segment_len < 2 or segments_per_sample < 1 or n_samples < 1:
        raise ValueError("need k >= 2, segment_len >= 2, "
                         "segments_per_sample >= 1, n_samples >= 1")
    if noise_std < 0:
        raise ValueError("noise_std must be non-negative")
    library = _waveform_library(k, segment_len)
    t_steps = segment_len * segments_per_sample
    inputs = np.zeros((n_samples, t_steps, 1))
    labels = np.zeros((n_samples, t_steps), dtype=int)
    for s in range(n_samples):
        srng = np.random.default_rng([seed, s])
        order = srng.integers(k, size=segments_per_sample)
        series = np.concatenate([library[c] for c in order])
        if noise_std > 0:
            series = series + srng.normal(0.0, noise_std, size=series.shape)
        inputs[s, :, 0] = series
        labels[s] = np.repeat(order, segment_len)
    return Dataset(inputs=inputs, labels=labels, kind="streaming", n_classes=k)


def _parse_error(path, line_no: int, why: str) -> ValueError:
    return ValueError(f"{path}:{line_no}: {why}")


def load_dense_csv(path, t_steps: int, channels: int) -> Dataset:
    """Read label,v0,...,v{N-1} rows grouped into samples of t_steps rows.

    A constant label column within a sample means sequence classification;
    a varying one means streaming (applied uniformly over the file).
    """
    rows = []
    with open(path) as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != channels + 1:
                raise _parse_error(path, line_no,
                                   f"expected {channels + 1} fields, got {len(parts)}")
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                raise _parse_error(path, line_no, "non-numeric field") from None
    if not rows or len(rows) % t_steps != 0:
        raise ValueError(f"{path}: row count {len(rows)} is not a multiple "
                         f"of t_steps={t_steps}")
    arr = np.asarray(rows)
    n = len(rows) // t_steps
    label_col = arr[:, 0].reshape(n, t_steps)
    if np.any(label_col != np.rint(label_col)):
        raise ValueError(f"{path}: labels must be integers")
    inputs = arr[:, 1:].reshape(n, t_steps, channels)
    step_labels = label_col.astype(int)
    if np.all(step_labels == step_labels[:, :1]):
        labels = step_labels[:, 0]
        kind = "sequence-classification"
    else:
        labels = step_labels
        kind = "streaming"
    return Dataset(inputs=inputs, labels=labels, kind=kind,
                   n_classes=int(step_labels.max()) + 1)


def save_dense_csv(ds: Dataset, path) -> None:
    """Write a dataset in the dense CSV row format load_dense_csv reads."""
    with open(path, "w") as f:
        for s in range(ds.n_samples):
            for t in range(ds.t_steps):
                label = ds.labels[s] if ds.labels.ndim == 1 else ds.labels[s, t]
                vals = ",".join(repr(float(v)) for v in ds.inputs[s, t])
                f.write(f"{int(label)},{vals}\n")


def load_event_csv(path) -> Dataset:
    """Read sample,t,channel,label spike events into a binary dataset."""
    events = []
    with open(path) as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise _parse_error(path, line_no,
                                   f"expected 4 fields, got {len(parts)}")
            try:
                events.append([int(p) for p in parts])
            except ValueError:
                raise _parse_error(path, line_no, "non-integer field") from None
    if not events:
        raise ValueError(f"{path}: no events")
    ev = np.asarray(events)
    if ev.min() < 0:
        raise ValueError(f"{path}: negative field")
    n = ev[:, 0].max() + 1
    t_steps = ev[:, 1].max() + 1
    channels = ev[:, 2].max() + 1
    inputs = np.zeros((n, t_steps, channels))
    labels = np.zeros(n, dtype=int)
    inputs[ev[:, 0], ev[:, 1], ev[:, 2]] = 1.0
    labels[ev[:, 0]] = ev[:, 3]
    return Dataset(inputs=inputs, labels=labels,
                   kind="sequence-classification",
                   n_classes=int(ev[:, 3].max()) + 1)


def save_event_csv(ds: Dataset, path) -> None:
    """Write a binary classification dataset as sample,t,channel,label rows."""
    if ds.kind != "sequence-classification":
        raise ValueError("event CSV holds sequence-classification data")
    if not np.all((ds.inputs == 0) | (ds.inputs == 1)):
        raise ValueError("event CSV holds binary rasters only")
    with open(path, "w") as f:
        for s, t, ch in zip(*np.nonzero(ds.inputs)):
            f.write(f"{s},{t},{ch},{int(ds.labels[s])}\n")


def load_idx(images_path, labels_path) -> Dataset:
    """Read IDX image/label files into pixel sequences scaled to [0, 1].

    Each image becomes a (rows*cols, 1) sequence read row-major, one
    pixel per step.
    """
    with open(images_path, "rb") as f:
        header = f.read(16)
        if len(header) != 16:
            raise ValueError(f"{images_path}: truncated header")
        magic, n, rows, cols = struct.unpack(">IIII", header)
        if magic != IDX_IMAGES_MAGIC:
            raise ValueError(f"{images_path}: bad magic 0x{magic:08x}")
        raw = f.read(n * rows * cols)
    if len(raw) != n * rows * cols:
        raise ValueError(f"{images_path}: truncated data")
    images = np.frombuffer(raw, dtype=np.uint8).reshape(n, rows * cols, 1)
    with open(labels_path, "rb") as f:
        header = f.read(8)
        if len(header) != 8:
            raise ValueError(f"{labels_path}: truncated header")
        magic, n_labels = struct.unpack(">II", header)
        if magic != IDX_LABELS_MAGIC:
            raise ValueError(f"{labels_path}: bad magic 0x{magic:08x}")
        raw = f.read(n_labels)
    if len(raw) != n_labels:
        raise ValueError(f"{labels_path}: truncated data")
    if n_labels != n:
        raise ValueError(f"image count {n} != label count {n_labels}")
    labels = np.frombuffer(raw, dtype=np.uint8).astype(int)
    return Dataset(inputs=images.astype(float) / 255.0, labels=labels,
                   kind="sequence-classification",
                   n_classes=int(labels.max()) + 1 if n else 1)


def split(ds: Dataset, ratios=(0.72, 0.08, 0.20), seed: int = 0):
    """Shuffle and partition a dataset into (train, val, test).

    The first two sizes are floors of ratio * n; the remainder is test, so
    the three parts always cover every sample exactly once.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ValueError("ratios must be three non-negative numbers")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("ratios must sum to 1")
    n = ds.n_samples
    order = np.random.default_rng(seed).permutation(n)
    n_train = int(ratios[0] * n)
    n_val = int(ratios[1] * n)
    return (ds.subset(order[:n_train]),
            ds.subset(order[n_train:n_train + n_val]),
            ds.subset(order[n_train + n_val:]))


def save_dataset(ds: Dataset, out_dir) -> None:
    """Materialize a dataset as a manifest plus a dense CSV."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"format": MANIFEST_FORMAT, "kind": ds.kind,
                "n_samples": ds.n_samples, "t_steps": ds.t_steps,
                "channels": ds.channels, "n_classes": ds.n_classes,
                "data": "data.csv"}
    with open(out / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
        f.write("\n")
    save_dense_csv(ds, out / "data.csv")


def load_dataset(in_dir) -> Dataset:
    """Read a dataset directory written by save_dataset."""
    path = Path(in_dir) / "manifest.json"
    with open(path) as f:
        manifest = json.load(f)
    if manifest.get("format") != MANIFEST_FORMAT:
        raise ValueError(f"unsupported dataset format: {manifest.get('format')!r}")
    ds = load_dense_csv(Path(in_dir) / manifest["data"],
                        manifest["t_steps"], manifest["channels"])
    if ds.n_samples != manifest["n_samples"]:
        raise ValueError(f"{path}: manifest sample count mismatch")
    # a streaming set whose labels happen to be constant per sample would
    # load as classification; the manifest is authoritative
    if ds.kind != manifest["kind"]:
        if manifest["kind"] == "streaming":
            labels = np.repeat(ds.labels[:, None], ds.t_steps, axis=1)
            ds = Dataset(inputs=ds.inputs, labels=labels, kind="streaming",
                         n_classes=max(ds.n_classes, manifest["n_classes"]))
        else:
            raise ValueError(f"{path}: kind mismatch")
    if manifest["n_classes"] > ds.n_classes:
        ds = Dataset(inputs=ds.inputs, labels=ds.labels, kind=ds.kind,
                     n_classes=manifest["n_classes"])
    return ds
