"""Dataset ingestion, preprocessing, splitting, and the synthetic generator.

Images enter as binary PGM ("P5") files together with a labels.csv mapping
filenames to the benign/malignant classes. Preprocessing resamples to the
target grid first and then min-max normalizes each image into [0, 1].
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .tensor_ops import bilinear_resize

BENIGN, MALIGNANT = 0, 1
_LABEL_TOKENS = {"benign": BENIGN, "malignant": MALIGNANT}

DEFAULT_FRACTIONS = (0.75, 0.15, 0.10)  # train, validation, test


@dataclass
class Sample:
    id: str
    image: np.ndarray  # H x W x 1, values in [0, 1]
    label: int


@dataclass
class DatasetSplit:
    train: list[str]
    validation: list[str]
    test: list[str]
    seed: int

    def to_json(self) -> str:
        payload = {"seed": self.seed, "train": self.train,
                   "validation": self.validation, "test": self.test}
        return json.dumps(payload, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "DatasetSplit":
        try:
            payload = json.loads(text)
            return cls(train=list(payload["train"]), validation=list(payload["validation"]),
                       test=list(payload["test"]), seed=int(payload["seed"]))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed split manifest: {exc}") from None


# ---------------------------------------------------------------------------
# PGM (binary "P5") reading and writing
# ---------------------------------------------------------------------------

def _pgm_tokens(data: bytes, path):
    """Header tokens, whitespace- and comment-tolerant."""
    pos = 0
    while True:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise DataError(f"{path}: truncated PGM header")
        yield data[start:pos], pos


def load_pgm(path) -> np.ndarray:
    """Read a binary PGM into an H x W x 1 tensor of raw byte values (0-255)."""
    data = Path(path).read_bytes()
    tokens = _pgm_tokens(data, path)
    magic, _ = next(tokens)
    if magic != b"P5":
        raise DataError(f"{path}: bad magic {magic!r}, only binary PGM (P5) is supported")
    fields = []
    for _ in range(3):
        token, pos = next(tokens)
        if not token.isdigit():
            raise DataError(f"{path}: malformed PGM header token {token!r}")
        fields.append(int(token))
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise DataError(f"{path}: non-positive PGM dimensions {width} x {height}")
    if maxval > 255:
        raise DataError(f"{path}: maxval {maxval} exceeds 255, 16-bit PGM is unsupported")
    # exactly one whitespace byte separates the header from the pixel data
    pixel_start = pos + 1
    pixels = data[pixel_start:pixel_start + width * height]
    if len(pixels) < width * height:
        raise DataError(f"{path}: truncated pixel data, expected {width * height} bytes, got {len(pixels)}")
    img = np.frombuffer(pixels, dtype=np.uint8).astype(np.float64)
    return img.reshape(height, width, 1)


def write_pgm(path, image: np.ndarray) -> None:
    """Write an H x W (x 1) tensor of byte values 0-255 as binary PGM."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim != 2:
        raise DataError(f"write_pgm: expected an H x W (x 1) tensor, got shape {arr.shape}")
    h, w = arr.shape
    payload = np.clip(np.rint(arr), 0, 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(payload.tobytes())


# ---------------------------------------------------------------------------
# Preprocessing
# ---------------------------------------------------------------------------

def normalize(raw: np.ndarray) -> np.ndarray:
    """Per-image min-max scaling into [0, 1]; constant images map to zeros."""
    raw = np.asarray(raw, dtype=np.float64)
    lo, hi = raw.min(), raw.max()
    if hi == lo:
        return np.zeros_like(raw)
    return (raw - lo) / (hi - lo)


def prepare(raw: np.ndarray, target_hw: tuple[int, int]) -> np.ndarray:
    """Resample raw pixel values to the target grid, then normalize."""
    resized = bilinear_resize(np.asarray(raw, dtype=np.float64), target_hw[0], target_hw[1])
    return normalize(resized)


# ---------------------------------------------------------------------------
# Stratified splitting with largest-remainder allocation
# ---------------------------------------------------------------------------

def largest_remainder_allocation(n: int, fractions=DEFAULT_FRACTIONS) -> tuple[int, ...]:
    """Integer counts per part: floor the quotas, then hand leftovers to the
    largest remainders, ties broken by part order (train, validation, test)."""
    quotas = [n * f for f in fractions]
    floors = [math.floor(q) for q in quotas]
    leftover = n - sum(floors)
    order = sorted(range(len(fractions)), key=lambda i: (-(quotas[i] - floors[i]), i))
    for i in order[:leftover]:
        floors[i] += 1
    return tuple(floors)


def stratified_split(samples, fractions=DEFAULT_FRACTIONS, seed: int = 0) -> DatasetSplit:
    """Shuffle and allocate each class independently, so the class balance of
    every part follows the requested fractions exactly.

    Accepts Sample objects or plain (id, label) pairs.
    """
    if len(fractions) != 3 or any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise DataError(f"split fractions {fractions} must be three non-negative values summing to 1")
    by_class: dict[int, list[str]] = {BENIGN: [], MALIGNANT: []}
    for item in samples:
        sid, label = (item.id, item.label) if isinstance(item, Sample) else item
        if label not in by_class:
            raise DataError(f"sample {sid!r} has unknown label {label!r}")
        by_class[label].append(sid)
    for cls, ids in by_class.items():
        if not ids:
            raise DataError(f"class {cls} has no samples; a stratified split needs both classes")
        if len(set(ids)) != len(ids):
            raise DataError(f"duplicate sample ids in class {cls}")

    rng = np.random.default_rng(seed)
    parts: list[list[str]] = [[], [], []]
    for cls in sorted(by_class):
        ids = list(by_class[cls])
        rng.shuffle(ids)
        counts = largest_remainder_allocation(len(ids), fractions)
        start = 0
        for part, count in zip(parts, counts):
            part.extend(ids[start:start + count])
            start += count
    return DatasetSplit(train=parts[0], validation=parts[1], test=parts[2], seed=seed)


# ---------------------------------------------------------------------------
# Labels CSV and directory loading
# ---------------------------------------------------------------------------

def load_labels_csv(path) -> list[tuple[str, int]]:
    """Parse "filename,label" lines; labels are benign/malignant, case-insensitive."""
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read labels file {path}: {exc}") from None
    records: list[tuple[str, int]] = []
    seen: dict[str, int] = {}
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if lineno == 1 and stripped.lower() == "filename,label":
            continue
        pieces = [p.strip() for p in stripped.split(",")]
        if len(pieces) != 2 or not pieces[0]:
            raise DataError(f"{path}:{lineno}: expected 'filename,label', got {line!r}")
        fname, token = pieces
        label = _LABEL_TOKENS.get(token.lower())
        if label is None:
            raise DataError(f"{path}:{lineno}: unknown label {token!r}, expected benign or malignant")
        if fname in seen:
            raise DataError(f"{path}:{lineno}: duplicate filename {fname!r} (first seen on line {seen[fname]})")
        seen[fname] = lineno
        records.append((fname, label))
    if not records:
        raise DataError(f"{path}: no label records found")
    return records


def load_dataset(data_dir, labels_path, target_hw: tuple[int, int]) -> list[Sample]:
    """Load every labelled PGM under data_dir, resampled and normalized."""
    data_dir = Path(data_dir)
    samples = []
    for fname, label in load_labels_csv(labels_path):
        img_path = data_dir / fname
        if not img_path.is_file():
            raise DataError(f"labelled image {img_path} does not exist")
        samples.append(Sample(id=fname, image=prepare(load_pgm(img_path), target_hw), label=label))
    return samples


# ---------------------------------------------------------------------------
# Synthetic two-class generator
# ---------------------------------------------------------------------------

def _coordinate_grid(size: int):
    ys, xs = np.mgrid[0:size, 0:size]
    return ys.astype(np.float64), xs.astype(np.float64)


def _benign_image(rng, size: int) -> np.ndarray:
    """Smooth bright blob on a noisy background."""
    base = 0.35 + rng.normal(0.0, 0.02, (size, size))
    cy = size / 2 + rng.uniform(-size / 8, size / 8)
    cx = size / 2 + rng.uniform(-size / 8, size / 8)
    sigma = size * rng.uniform(0.16, 0.22)
    ys, xs = _coordinate_grid(size)
    blob = 0.45 * np.exp(-(((ys - cy) ** 2) + ((xs - cx) ** 2)) / (2.0 * sigma * sigma))
    return np.clip(base + blob, 0.0, 1.0)[:, :, None]


def _malignant_image(rng, size: int) -> np.ndarray:
    """Dark irregular ellipse with a bright rim on the same background model."""
    base = 0.35 + rng.normal(0.0, 0.02, (size, size))
    cy = size / 2 + rng.uniform(-size / 8, size / 8)
    cx = size / 2 + rng.uniform(-size / 8, size / 8)
    a = size * rng.uniform(0.18, 0.28)
    b = size * rng.uniform(0.12, 0.22)
    theta = rng.uniform(0.0, np.pi)
    wobble_phase = rng.uniform(0.0, 2.0 * np.pi)
    ys, xs = _coordinate_grid(size)
    dy, dx = ys - cy, xs - cx
    u = np.cos(theta) * dx + np.sin(theta) * dy
    v = -np.sin(theta) * dx + np.cos(theta) * dy
    phi = np.arctan2(v, u)
    boundary = 1.0 + 0.15 * np.sin(4.0 * phi + wobble_phase)
    rho = np.sqrt((u / a) ** 2 + (v / b) ** 2) / boundary
    img = base.copy()
    img[rho < 1.0] -= 0.30
    img[(rho >= 1.0) & (rho < 1.25)] += 0.35
    return np.clip(img, 0.0, 1.0)[:, :, None]


def synth_dataset(n_per_class: int, size: int, seed: int = 0) -> list[Sample]:
    """Deterministic benign-like/malignant-like samples, already in [0, 1]."""
    if n_per_class < 1:
        raise DataError(f"n_per_class must be >= 1, got {n_per_class}")
    if size < 8:
        raise DataError(f"size must be >= 8, got {size}")
    rng = np.random.default_rng(seed)
    samples = []
    for i in range(n_per_class):
        samples.append(Sample(id=f"synth-benign-{i:04d}.pgm", image=_benign_image(rng, size), label=BENIGN))
    for i in range(n_per_class):
        samples.append(Sample(id=f"synth-malignant-{i:04d}.pgm", image=_malignant_image(rng, size), label=MALIGNANT))
    return samples


def write_synth_dataset(samples: list[Sample], data_dir) -> Path:
    """Materialize synthetic samples as PGM files plus labels.csv; returns the labels path."""
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    lines = ["filename,label"]
    for s in samples:
        write_pgm(data_dir / s.id, s.image * 255.0)
        lines.append(f"{s.id},{'malignant' if s.label == MALIGNANT else 'benign'}")
    labels = data_dir / "labels.csv"
    labels.write_text("\n".join(lines) + "\n")
    return labels
