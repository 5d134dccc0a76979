"""Audio, manifest and binary file I/O, plus the synthetic sound-event set.

File formats
------------
FeatureFile (``RWFB``), all little-endian::

    magic   4s   b"RWFB"
    version u16  1
    dims    3*u32  channels, F, T
    payload f64 * channels*F*T, row-major

Parameter file (``RWPM``)::

    magic   4s   b"RWPM"
    version u16  1
    count   u32  number of tensors
    then per tensor:
        name_len u16, name utf-8 bytes,
        ndim u32, dims u32*ndim,
        payload f64 * prod(dims)
"""

from __future__ import annotations

import csv
import os
import struct
import warnings
import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FEATURE_MAGIC = b"RWFB"
PARAMS_MAGIC = b"RWPM"
FORMAT_VERSION = 1

SYNTH_CLASSES = ("low_tone", "high_tone", "up_chirp", "down_chirp", "white_noise", "am_tone")


class UnsupportedFormatError(ValueError):
    pass


class CorruptFileError(ValueError):
    pass


class ManifestError(ValueError):
    pass


@dataclass
class AudioClip:
    samples: np.ndarray
    sample_rate: int
    source: str = ""

    def __post_init__(self):
        if self.samples.size == 0:
            raise CorruptFileError(f"{self.source or 'clip'}: no samples")
        if not np.isfinite(self.samples).all():
            raise CorruptFileError(f"{self.source or 'clip'}: non-finite samples")


# -- WAV ----------------------------------------------------------------------------


def read_wav(path) -> AudioClip:
    """Read 16-bit PCM (mono or stereo, averaged) scaled by 1/32768."""
    path = str(path)
    try:
        with wave.open(path, "rb") as w:
            n_channels, width, rate, n_frames = w.getnchannels(), w.getsampwidth(), w.getframerate(), w.getnframes()
            raw = w.readframes(n_frames)
    except wave.Error as e:
        msg = str(e)
        if "unknown format" in msg:
            raise UnsupportedFormatError(f"{path}: {msg}") from None
        raise CorruptFileError(f"{path}: {msg}") from None
    except EOFError:
        raise CorruptFileError(f"{path}: truncated header") from None
    if width != 2:
        raise UnsupportedFormatError(f"{path}: {8 * width}-bit samples; only 16-bit PCM is supported")
    if len(raw) != n_frames * n_channels * 2:
        raise CorruptFileError(f"{path}: expected {n_frames} frames, data chunk is truncated")
    pcm = np.frombuffer(raw, dtype="<i2").reshape(-1, n_channels).astype(np.float64) / 32768.0
    return AudioClip(pcm.mean(axis=1) if n_channels > 1 else pcm[:, 0], rate, path)


def write_wav(path, samples, sample_rate: int) -> None:
    """Write mono 16-bit PCM; values are clipped to [-1, 1)."""
    x = np.asarray(samples, dtype=np.float64)
    pcm = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(int(sample_rate))
        w.writeframes(pcm.tobytes())


# -- manifest -----------------------------------------------------------------------


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: str
    fold: int


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]
    root: Path = field(default_factory=Path)

    @property
    def labels(self) -> list[str]:
        """Label vocabulary, sorted so class indices are stable."""
        return sorted({e.label for e in self.entries})

    @property
    def folds(self) -> list[int]:
        return sorted({e.fold for e in self.entries})

    def class_index(self, vocabulary: list[str] | None = None) -> np.ndarray:
        vocab = {lab: i for i, lab in enumerate(vocabulary or self.labels)}
        return np.array([vocab[e.label] for e in self.entries], dtype=np.intp)

    def resolve(self, entry: ManifestEntry) -> Path:
        p = Path(entry.path)
        return p if p.is_absolute() else self.root / p

    def __len__(self) -> int:
        return len(self.entries)


def load_manifest(path) -> DatasetManifest:
    """CSV with header ``path,label,fold``; relative paths resolve against the CSV's folder."""
    path = Path(path)
    entries: list[ManifestEntry] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["path", "label", "fold"]:
            raise ManifestError(f"{path}:1: expected header 'path,label,fold'")
        seen = set()
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise ManifestError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            p, label, fold = (c.strip() for c in row)
            try:
                fold_i = int(fold)
            except ValueError:
                raise ManifestError(f"{path}:{lineno}: fold {fold!r} is not an integer") from None
            if not p or not label or fold_i < 1:
                raise ManifestError(f"{path}:{lineno}: empty path/label or fold < 1")
            if p in seen:
                warnings.warn(f"{path}:{lineno}: duplicate path {p!r}", stacklevel=2)
            seen.add(p)
            entries.append(ManifestEntry(p, label, fold_i))
    return DatasetManifest(entries, path.parent)


def write_manifest(path, manifest: DatasetManifest) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", "label", "fold"])
        for e in manifest.entries:
            w.writerow([e.path, e.label, e.fold])


def fold_split(manifest: DatasetManifest, test_fold: int) -> tuple[DatasetManifest, DatasetManifest]:
    test = [e for e in manifest.entries if e.fold == test_fold]
    if not test:
        raise ManifestError(f"fold {test_fold} has no entries (folds present: {manifest.folds})")
    train = [e for e in manifest.entries if e.fold != test_fold]
    return DatasetManifest(train, manifest.root), DatasetManifest(test, manifest.root)


def load_clips(manifest: DatasetManifest) -> list[AudioClip]:
    clips = [read_wav(manifest.resolve(e)) for e in manifest.entries]
    rates = {c.sample_rate for c in clips}
    if len(rates) > 1:
        raise ManifestError(f"clips have mixed sample rates {sorted(rates)}; resample first")
    return clips


# -- synthetic data -----------------------------------------------------------------


def _synth_clip(label: str, rng: np.random.Generator, sr: int, n: int) -> np.ndarray:
    t = np.arange(n) / sr
    phase = rng.uniform(0, 2 * np.pi)
    if label == "low_tone":
        x = np.sin(2 * np.pi * rng.uniform(200, 400) * t + phase)
    elif label == "high_tone":
        x = np.sin(2 * np.pi * rng.uniform(3000, 6000) * t + phase)
    elif label in ("up_chirp", "down_chirp"):
        f0, f1 = (500.0, 4000.0) if label == "up_chirp" else (4000.0, 500.0)
        dur = n / sr
        # linear sweep: instantaneous frequency f0 + (f1 - f0) t / dur
        x = np.sin(2 * np.pi * (f0 * t + 0.5 * (f1 - f0) * t**2 / dur) + phase)
    elif label == "white_noise":
        x = rng.standard_normal(n)
        x /= np.sqrt(2 * np.mean(x * x))  # same power as a unit sinusoid
    elif label == "am_tone":
        rate = rng.uniform(4, 8)
        env = 0.5 * (1 + np.sin(2 * np.pi * rate * t + rng.uniform(0, 2 * np.pi)))
        x = env * np.sin(2 * np.pi * 1000.0 * t + phase)
    else:
        raise ValueError(label)
    x = x * 0.25 * 10 ** (rng.uniform(-6, 6) / 20)
    noise = rng.standard_normal(n)
    noise *= np.sqrt(np.mean(x * x) / 100.0 / np.mean(noise * noise))  # 20 dB SNR
    return np.clip(x + noise, -1.0, 32767 / 32768)


def gen_synthetic(out_dir, seed: int, n_per_class: int, sample_rate: int = 16000,
                  dur: float = 1.0, n_folds: int = 5, force: bool = False) -> DatasetManifest:
    """Write WAVs and ``manifest.csv`` for the six-class synthetic task."""
    if n_per_class < 1:
        raise ValueError("n_per_class must be at least 1")
    out = Path(out_dir)
    manifest_path = out / "manifest.csv"
    if manifest_path.exists() and not force:
        raise FileExistsError(f"{manifest_path} exists; pass force=True to overwrite")
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    n = int(round(sample_rate * dur))
    entries = []
    for label in SYNTH_CLASSES:
        for i in range(n_per_class):
            name = f"{label}_{i:04d}.wav"
            write_wav(out / name, _synth_clip(label, rng, sample_rate, n), sample_rate)
            entries.append(ManifestEntry(name, label, i % n_folds + 1))
    manifest = DatasetManifest(entries, out)
    write_manifest(manifest_path, manifest)
    return manifest


# -- binary formats -----------------------------------------------------------------


def write_features(path, stack) -> None:
    x = np.asarray(stack, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3:
        raise ValueError(f"feature stack must be (channels, F, T), got shape {x.shape}")
    if not np.isfinite(x).all():
        raise ValueError("feature stack has non-finite values")
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC + struct.pack("<H3I", FORMAT_VERSION, *x.shape))
        fh.write(np.ascontiguousarray(x).astype("<f8").tobytes())


def read_features(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:4] != FEATURE_MAGIC:
        raise CorruptFileError(f"{path}: bad magic {data[:4]!r}")
    if len(data) < 18:
        raise CorruptFileError(f"{path}: truncated header")
    version, c, f, t = struct.unpack_from("<H3I", data, 4)
    if version != FORMAT_VERSION:
        raise UnsupportedFormatError(f"{path}: feature file version {version}")
    payload = data[18:]
    if len(payload) != c * f * t * 8:
        raise CorruptFileError(f"{path}: payload is {len(payload)} bytes, expected {c * f * t * 8}")
    return np.frombuffer(payload, dtype="<f8").reshape(c, f, t).astype(np.float64)


def write_params(path, tensors: dict[str, np.ndarray]) -> None:
    parts = [PARAMS_MAGIC, struct.pack("<HI", FORMAT_VERSION, len(tensors))]
    for name, value in tensors.items():
        arr = np.asarray(value, dtype=np.float64)
        key = name.encode("utf-8")
        parts.append(struct.pack("<H", len(key)) + key)
        parts.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
        parts.append(np.ascontiguousarray(arr).astype("<f8").tobytes())
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(b"".join(parts))
    os.replace(tmp, path)


def read_params(path) -> dict[str, np.ndarray]:
    data = Path(path).read_bytes()
    if data[:4] != PARAMS_MAGIC:
        raise CorruptFileError(f"{path}: bad magic {data[:4]!r}")
    try:
        version, count = struct.unpack_from("<HI", data, 4)
        if version != FORMAT_VERSION:
            raise UnsupportedFormatError(f"{path}: parameter file version {version}")
        pos, out = 10, {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", data, pos)
            name = data[pos + 2 : pos + 2 + nlen].decode("utf-8")
            pos += 2 + nlen
            (ndim,) = struct.unpack_from("<I", data, pos)
            dims = struct.unpack_from(f"<{ndim}I", data, pos + 4)
            pos += 4 + 4 * ndim
            size = int(np.prod(dims)) * 8
            if pos + size > len(data):
                raise CorruptFileError(f"{path}: tensor {name!r} truncated")
            out[name] = np.frombuffer(data, dtype="<f8", count=size // 8, offset=pos).reshape(dims).astype(np.float64)
            pos += size
    except struct.error:
        raise CorruptFileError(f"{path}: truncated") from None
    if pos != len(data):
        raise CorruptFileError(f"{path}: {len(data) - pos} trailing bytes")
    return out
