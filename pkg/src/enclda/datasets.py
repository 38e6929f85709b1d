"""Dataset container, PGM/CSV ingestion, and the synthetic generator.

Two on-disk forms are accepted: a directory of binary PGM images (P5,
maxval 255) with a CSV manifest of ``filename,label[,subject]`` rows, or
a single CSV of ``label,p0,...,p{n-1}`` rows with a header.
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataError


@dataclass
class Dataset:
    vectors: list[list[int]]
    labels: list[int]
    label_names: list[str]
    subject_ids: list[str] | None = None

    def __post_init__(self):
        if len(self.vectors) != len(self.labels):
            raise DataError("vector/label count mismatch")
        if self.subject_ids is not None and len(self.subject_ids) != len(self.vectors):
            raise DataError("subject id count mismatch")

    @property
    def size(self) -> int:
        return len(self.vectors)

    @property
    def class_count(self) -> int:
        return len(self.label_names)

    @property
    def dimension(self) -> int:
        return len(self.vectors[0]) if self.vectors else 0

    def class_counts(self) -> list[int]:
        counts = [0] * self.class_count
        for lab in self.labels:
            counts[lab] += 1
        return counts

    def subset(self, indices: list[int]) -> "Dataset":
        return Dataset(
            vectors=[self.vectors[i] for i in indices],
            labels=[self.labels[i] for i in indices],
            label_names=list(self.label_names),
            subject_ids=None if self.subject_ids is None
            else [self.subject_ids[i] for i in indices],
        )


class _LabelTable:
    """Maps label strings to codes in first-appearance order."""

    def __init__(self):
        self.names: list[str] = []
        self._codes: dict[str, int] = {}

    def code(self, name: str) -> int:
        if name not in self._codes:
            self._codes[name] = len(self.names)
            self.names.append(name)
        return self._codes[name]


def read_pgm(path: str | Path) -> list[list[int]]:
    """Read a binary PGM (P5, maxval 255) into a row-major pixel matrix."""
    data = Path(path).read_bytes()
    pos = 0

    def next_token() -> bytes:
        nonlocal pos
        while pos < len(data):
            if data[pos : pos + 1].isspace():
                pos += 1
            elif data[pos : pos + 1] == b"#":
                while pos < len(data) and data[pos] != 0x0A:
                    pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise DataError(f"{path}: truncated PGM header")
        return data[start:pos]

    magic = next_token()
    if magic != b"P5":
        raise DataError(f"{path}: only binary P5 PGM is accepted, got {magic!r}")
    try:
        width = int(next_token())
        height = int(next_token())
        maxval = int(next_token())
    except ValueError as exc:
        raise DataError(f"{path}: malformed PGM header") from exc
    if maxval != 255:
        raise DataError(f"{path}: maxval must be 255, got {maxval}")
    pos += 1  # single whitespace byte after maxval
    raster = data[pos : pos + width * height]
    if len(raster) != width * height:
        raise DataError(f"{path}: raster shorter than {width}x{height}")
    return [list(raster[r * width : (r + 1) * width]) for r in range(height)]


def write_pgm(path: str | Path, rows: list[list[int]]) -> None:
    height = len(rows)
    width = len(rows[0]) if rows else 0
    if any(len(r) != width for r in rows):
        raise DataError("ragged pixel matrix")
    body = bytes(v for row in rows for v in row)
    Path(path).write_bytes(f"P5\n{width} {height}\n255\n".encode("ascii") + body)


def load_dataset(path: str | Path, manifest: str | Path | None = None) -> Dataset:
    """Load either a PGM directory (with manifest) or a vector CSV."""
    path = Path(path)
    if path.is_dir():
        manifest = Path(manifest) if manifest else path / "manifest.csv"
        return _load_pgm_dir(path, manifest)
    return _load_vector_csv(path)


def _load_pgm_dir(directory: Path, manifest: Path) -> Dataset:
    if not manifest.exists():
        raise DataError(f"manifest not found: {manifest}")
    table = _LabelTable()
    vectors: list[list[int]] = []
    labels: list[int] = []
    subjects: list[str] = []
    have_subjects = False
    with open(manifest, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            if row[0].strip() == "filename":  # header row
                have_subjects = len(row) >= 3 and row[2].strip() == "subject"
                continue
            if len(row) < 2:
                raise DataError(f"manifest row needs filename,label: {row}")
            pixels = read_pgm(directory / row[0].strip())
            vec = [v for r in pixels for v in r]
            vectors.append(vec)
            labels.append(table.code(row[1].strip()))
            subjects.append(row[2].strip() if have_subjects and len(row) >= 3 else "")
    if not vectors:
        raise DataError(f"{manifest}: no samples listed")
    dims = {len(v) for v in vectors}
    if len(dims) != 1:
        raise DataError(f"mixed image dimensions in {directory}: {sorted(dims)}")
    return Dataset(
        vectors=vectors,
        labels=labels,
        label_names=table.names,
        subject_ids=subjects if have_subjects else None,
    )


def _load_vector_csv(path: Path) -> Dataset:
    table = _LabelTable()
    vectors: list[list[int]] = []
    labels: list[int] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty CSV") from None
        if not header or header[0].strip() != "label":
            raise DataError(f"{path}: first column must be 'label'")
        n = len(header) - 1
        if n < 1:
            raise DataError(f"{path}: no pixel columns")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != n + 1:
                raise DataError(
                    f"{path}:{lineno}: {len(row) - 1} values, header declares {n}"
                )
            try:
                vec = [int(v) for v in row[1:]]
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-integer pixel value") from exc
            if any(not 0 <= v <= 255 for v in vec):
                raise DataError(f"{path}:{lineno}: pixel outside [0, 255]")
            vectors.append(vec)
            labels.append(table.code(row[0].strip()))
    if not vectors:
        raise DataError(f"{path}: no data rows")
    return Dataset(vectors=vectors, labels=labels, label_names=table.names)


def synth_dataset(
    class_count: int,
    per_class: int,
    side: int,
    separation: float,
    noise: float,
    seed: int,
) -> Dataset:
    """Gaussian pixel-space clusters, one per class, clamped to [0, 255].

    Class centers sit ``separation`` apart (Euclidean, in pixel space)
    around a common random base image; per-pixel Gaussian noise of width
    ``noise`` is added to every sample.  Deterministic for a given seed.
    Every sample gets a unique subject id.
    """
    if class_count < 1 or per_class < 1 or side < 1:
        raise DataError("degenerate synthetic configuration")
    rng = random.Random(seed)
    n = side * side
    base = [rng.uniform(64.0, 192.0) for _ in range(n)]
    centers = []
    for _ in range(class_count):
        direction = [rng.gauss(0.0, 1.0) for _ in range(n)]
        norm = sum(d * d for d in direction) ** 0.5 or 1.0
        centers.append([b + separation * d / norm for b, d in zip(base, direction)])
    vectors: list[list[int]] = []
    labels: list[int] = []
    subjects: list[str] = []
    for cls in range(class_count):
        for k in range(per_class):
            pix = [
                _clamp_pixel(c + rng.gauss(0.0, noise)) for c in centers[cls]
            ]
            vectors.append(pix)
            labels.append(cls)
            subjects.append(f"subj-{cls}-{k}")
    return Dataset(
        vectors=vectors,
        labels=labels,
        label_names=[f"class{c}" for c in range(class_count)],
        subject_ids=subjects,
    )


def _clamp_pixel(x: float) -> int:
    return min(255, max(0, int(round(x))))
