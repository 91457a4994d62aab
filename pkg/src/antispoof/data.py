"""Dataset plumbing: manifests, portable pixmap I/O, resizing, statistics,
and a synthetic live/spoof corpus generator.

Images are numpy float64 arrays of shape (C, H, W) with values in [0, 1].
Only binary portable pixmaps are supported (P6 for RGB, P5 for grayscale,
8-bit); they are bit-exactly specifiable with zero dependencies. Convert
PNG/JPEG inputs with external tooling (e.g. ImageMagick's ``convert``).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

VALID_SPLITS = ("train", "validation")
MANIFEST_HEADER = ["path", "label", "dataset", "split"]


class DataError(ValueError):
    """Malformed manifest, image file, or record."""


@dataclass(frozen=True)
class ManifestRecord:
    path: str
    label: int  # 0 = normal/live (bona fide), 1 = attack
    dataset: str
    split: str  # train | validation


def load_manifest(path: str | Path) -> list[ManifestRecord]:
    """Parse a ``path,label,dataset,split`` CSV; malformed rows name their line."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"manifest not found: {path}")
    records = []
    with open(path, newline="") as fp:
        reader = csv.reader(fp)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, expected header {','.join(MANIFEST_HEADER)}")
        if [h.strip() for h in header] != MANIFEST_HEADER:
            raise DataError(f"{path}: bad header {header!r}, expected {MANIFEST_HEADER}")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 4:
                raise DataError(f"{path}: line {lineno}: expected 4 fields, got {len(row)}")
            p, label_s, dataset, split = (field.strip() for field in row)
            if not p:
                raise DataError(f"{path}: line {lineno}: empty path")
            if label_s not in ("0", "1"):
                raise DataError(f"{path}: line {lineno}: label must be 0 or 1, got {label_s!r}")
            if split not in VALID_SPLITS:
                raise DataError(
                    f"{path}: line {lineno}: split must be one of {VALID_SPLITS}, got {split!r}"
                )
            records.append(ManifestRecord(p, int(label_s), dataset, split))
    return records


def save_manifest(records: list[ManifestRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(MANIFEST_HEADER)
        for r in records:
            writer.writerow([r.path, r.label, r.dataset, r.split])


def image_path(record: ManifestRecord, manifest_path: str | Path) -> Path:
    """Resolve a record's path relative to its manifest's directory."""
    p = Path(record.path)
    return p if p.is_absolute() else Path(manifest_path).parent / p


# ---------------------------------------------------------------------------
# Portable pixmap I/O
# ---------------------------------------------------------------------------


def _read_pnm_token(fp) -> bytes:
    """Next whitespace-delimited header token, skipping '#' comments."""
    token = b""
    while True:
        ch = fp.read(1)
        if not ch:
            raise DataError("truncated pixmap header")
        if ch == b"#":
            while ch not in (b"\n", b""):
                ch = fp.read(1)
            continue
        if ch.isspace():
            if token:
                return token
            continue
        token += ch


def load_image(path: str | Path) -> np.ndarray:
    """Decode a binary P6 (RGB) or P5 (grayscale) pixmap to (C, H, W) in [0, 1]."""
    path = Path(path)
    with open(path, "rb") as fp:
        magic = fp.read(2)
        if magic not in (b"P5", b"P6"):
            raise DataError(f"{path}: unsupported magic {magic!r}, need binary P5/P6")
        width = int(_read_pnm_token(fp))
        height = int(_read_pnm_token(fp))
        maxval = int(_read_pnm_token(fp))
        if not 0 < maxval < 256:
            raise DataError(f"{path}: only 8-bit pixmaps supported, maxval={maxval}")
        channels = 3 if magic == b"P6" else 1
        count = width * height * channels
        payload = fp.read(count)
        if len(payload) != count:
            raise DataError(f"{path}: truncated payload, expected {count} bytes, got {len(payload)}")
    flat = np.frombuffer(payload, dtype=np.uint8).astype(np.float64) / maxval
    return flat.reshape(height, width, channels).transpose(2, 0, 1).copy()


def save_image(img: np.ndarray, path: str | Path) -> None:
    """Encode a (C, H, W) image in [0, 1] as binary P6 (C=3) or P5 (C=1)."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[0] not in (1, 3):
        raise DataError(f"expected (C, H, W) with C in {{1, 3}}, got {img.shape}")
    _c, h, w = img.shape
    quantized = np.rint(np.clip(img, 0.0, 1.0) * 255).astype(np.uint8)
    magic = b"P6" if img.shape[0] == 3 else b"P5"
    with open(path, "wb") as fp:
        fp.write(magic + b"\n%d %d\n255\n" % (w, h))
        fp.write(quantized.transpose(1, 2, 0).tobytes())


# ---------------------------------------------------------------------------
# Resizing
# ---------------------------------------------------------------------------


def resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with edge-aligned (half-pixel-center) sampling.

    Output pixel (i, j) samples the source at
    ``((i + 0.5) * H / out_h - 0.5, (j + 0.5) * W / out_w - 0.5)``,
    clamped to the source grid, so source and target rectangles cover the
    same extent. At identical sizes the sample points are exact integers
    and the result is the identity.
    """
    if out_h < 1 or out_w < 1:
        raise DataError(f"resize target must be >= 1, got {out_h}x{out_w}")
    img = np.asarray(img, dtype=np.float64)
    _c, h, w = img.shape

    ys = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0.0, h - 1.0)
    xs = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[None, :, None]
    fx = (xs - x0)[None, None, :]

    top = img[:, y0][:, :, x0] * (1 - fx) + img[:, y0][:, :, x1] * fx
    bot = img[:, y1][:, :, x0] * (1 - fx) + img[:, y1][:, :, x1] * fx
    return top * (1 - fy) + bot * fy


# ---------------------------------------------------------------------------
# Split statistics
# ---------------------------------------------------------------------------


@dataclass
class SplitStats:
    by_dataset_split: dict[tuple[str, str], int]
    by_split_label: dict[tuple[str, int], int]
    total: int


def split_stats(records: list[ManifestRecord]) -> SplitStats:
    by_ds: dict[tuple[str, str], int] = {}
    by_sl: dict[tuple[str, int], int] = {}
    for r in records:
        by_ds[(r.dataset, r.split)] = by_ds.get((r.dataset, r.split), 0) + 1
        by_sl[(r.split, r.label)] = by_sl.get((r.split, r.label), 0) + 1
    return SplitStats(by_ds, by_sl, len(records))


def render_split_stats(stats: SplitStats) -> str:
    """Aligned-text rendering of the two distribution tables."""
    lines = ["Dataset distribution", "Dataset      Split       Total"]
    for (dataset, split), count in sorted(stats.by_dataset_split.items()):
        lines.append(f"{dataset:<12} {split:<11} {count}")
    lines.append("")
    lines.append("Label distribution")
    lines.append("Split        Label 0 (Normal)  Label 1 (Attack)")
    seen_splits = {s for (s, _label) in stats.by_split_label}
    for split in VALID_SPLITS:
        if split in seen_splits:
            zero = stats.by_split_label.get((split, 0), 0)
            one = stats.by_split_label.get((split, 1), 0)
            lines.append(f"{split:<12} {zero:<17} {one}")
    lines.append(f"Total records: {stats.total}")
    return "\n".join(lines)


def write_split_stats_csv(stats: SplitStats, path: str | Path) -> None:
    with open(path, "w", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(["table", "key1", "key2", "count"])
        for (dataset, split), count in sorted(stats.by_dataset_split.items()):
            writer.writerow(["dataset_split", dataset, split, count])
        for (split, label), count in sorted(stats.by_split_label.items()):
            writer.writerow(["split_label", split, label, count])


# ---------------------------------------------------------------------------
# Synthetic live/spoof corpus
# ---------------------------------------------------------------------------
#
# The live class is smooth low-frequency blob texture; the attack class is
# the same kind of texture overlaid with a high-frequency grating plus a
# halftone dot lattice, mimicking the periodic tell of screen replays and
# prints. Separability is spectral, not a brightness offset.


def _smooth_base(size: int, rng: np.random.Generator) -> np.ndarray:
    yy, xx = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    base = np.zeros((size, size))
    for _ in range(3):
        fy, fx = rng.uniform(0.5, 2.0, size=2)  # cycles per image: low frequency
        phase = rng.uniform(0, 2 * math.pi, size=2)
        base += rng.uniform(0.3, 1.0) * (
            np.sin(2 * math.pi * fy * yy / size + phase[0])
            * np.sin(2 * math.pi * fx * xx / size + phase[1])
        )
    cy, cx = rng.uniform(0.2, 0.8, size=2) * size
    sigma = rng.uniform(0.2, 0.4) * size
    base += 1.2 * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sigma**2))
    lo, hi = base.min(), base.max()
    return 0.2 + 0.6 * (base - lo) / max(hi - lo, 1e-9)


def _spoof_overlay(size: int, rng: np.random.Generator) -> np.ndarray:
    yy, xx = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    freq = size / rng.uniform(3.0, 5.0)  # grating wavelength 3..5 px at any size
    theta = rng.uniform(0, math.pi)
    phase = rng.uniform(0, 2 * math.pi)
    grating = 0.5 + 0.5 * np.sin(
        2 * math.pi * freq * (xx * math.cos(theta) + yy * math.sin(theta)) / size + phase
    )
    period = int(rng.integers(3, 6))
    radius = period / 3.0
    dy = (yy % period) - period / 2.0
    dx = (xx % period) - period / 2.0
    dots = (dy**2 + dx**2 <= radius**2).astype(np.float64)
    return 0.4 * grating + 0.25 * dots


def synth_image(label: int, size: int, rng: np.random.Generator) -> np.ndarray:
    base = _smooth_base(size, rng)
    gains = rng.uniform(0.75, 1.0, size=3)
    img = np.stack([base * g for g in gains])
    if label == 1:
        img = img * 0.45 + _spoof_overlay(size, rng)[None, :, :]
    return np.clip(img, 0.0, 1.0)


def generate_synthetic(
    n_per_class: int,
    size: int,
    seed: int,
    out_dir: str | Path,
    val_fraction: float = 0.0,
    dataset: str = "synthetic",
) -> tuple[Path, list[ManifestRecord]]:
    """Write 2·n_per_class pixmaps plus a manifest; deterministic per seed."""
    if n_per_class < 1:
        raise DataError(f"n_per_class must be >= 1, got {n_per_class}")
    if size < 8:
        raise DataError(f"size must be >= 8, got {size}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n_val = int(round(val_fraction * n_per_class))
    records = []
    for label, stem in ((0, "live"), (1, "attack")):
        for i in range(n_per_class):
            rng = np.random.default_rng([seed, label, i])
            img = synth_image(label, size, rng)
            name = f"{stem}_{i:04d}.ppm"
            save_image(img, out_dir / name)
            split = "validation" if i < n_val else "train"
            records.append(ManifestRecord(name, label, dataset, split))
    manifest = out_dir / "manifest.csv"
    save_manifest(records, manifest)
    return manifest, records
