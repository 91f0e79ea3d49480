"""Subclass-structured embedding datasets.

Data model
----------
Every sample is a fixed-dimension real feature vector tagged with
``(subject_id, subclass, sample_index)``.  A subject's samples fall into two
subclasses: intact reference images (code ``N``, the gallery side) and
injured/altered images (code ``I``, the probe side).  Datasets are immutable
after construction and canonically ordered (subjects by id, samples by
index), so equal content always compares equal and every downstream
operation is deterministic.

This module provides three ways to obtain a dataset and the protocol
plumbing around it:

* :func:`generate_synthetic` - a parameterized Gaussian-cluster generator.
  Each subject gets a mean on a sphere of radius ``subject_radius``; intact
  samples scatter around the mean with spread ``sigma_n``; injured samples
  are additionally displaced by ``injury_shift`` along one of
  ``n_injury_modes`` per-subject unit directions (cycled by sample index)
  and scatter with spread ``sigma_i``.
* :func:`load_embeddings` / :func:`save_embeddings` - CSV interchange for
  externally computed feature vectors (see `CSV format`_ below).
* :func:`subject_split` - subject-disjoint train/test partitioning with
  repeated random sub-sampling.
* :func:`gallery_probe_partition` - splits a dataset into an intact-only
  gallery and an injured-only probe set.

CSV format
----------
Header ``subject_id,subclass,sample_index,f0,f1,...,f{d-1}``; one sample per
row; ``subclass`` is ``N`` or ``I``; features are decimal float literals
(``repr`` of the float64 value, so a save/load round trip is bit-exact);
UTF-8 with LF line endings.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, ParseError, ProtocolError


class Subclass(enum.Enum):
    """Which side of the matching protocol a sample belongs to."""

    NON_INJURED = "N"
    INJURED = "I"


def _freeze_vector(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1:
        raise DataError(f"embedding must be a 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError("embedding contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Sample:
    """One feature vector of one subject, tagged with its subclass."""

    subject_id: int
    subclass: Subclass
    sample_index: int
    embedding: np.ndarray

    def __post_init__(self):
        if self.subject_id < 0 or self.sample_index < 0:
            raise DataError("subject_id and sample_index must be non-negative")
        object.__setattr__(self, "embedding", _freeze_vector(self.embedding))

    @property
    def key(self) -> tuple[int, str, int]:
        return (self.subject_id, self.subclass.value, self.sample_index)

    def __eq__(self, other):
        if not isinstance(other, Sample):
            return NotImplemented
        return self.key == other.key and np.array_equal(self.embedding, other.embedding)

    def __repr__(self):
        return f"Sample(subject={self.subject_id}, {self.subclass.value}{self.sample_index}, d={len(self.embedding)})"


@dataclass(frozen=True, eq=False)
class SubjectRecord:
    """All samples of one subject, split by subclass and sorted by index."""

    subject_id: int
    non_injured: tuple[Sample, ...]
    injured: tuple[Sample, ...]

    def __post_init__(self):
        non = tuple(sorted(self.non_injured, key=lambda s: s.sample_index))
        inj = tuple(sorted(self.injured, key=lambda s: s.sample_index))
        object.__setattr__(self, "non_injured", non)
        object.__setattr__(self, "injured", inj)
        for s in non:
            if s.subject_id != self.subject_id or s.subclass is not Subclass.NON_INJURED:
                raise DataError(f"sample {s.key} does not belong in the N list of subject {self.subject_id}")
        for s in inj:
            if s.subject_id != self.subject_id or s.subclass is not Subclass.INJURED:
                raise DataError(f"sample {s.key} does not belong in the I list of subject {self.subject_id}")

    @property
    def samples(self) -> tuple[Sample, ...]:
        return self.non_injured + self.injured

    def __eq__(self, other):
        if not isinstance(other, SubjectRecord):
            return NotImplemented
        return (
            self.subject_id == other.subject_id
            and self.non_injured == other.non_injured
            and self.injured == other.injured
        )


@dataclass(frozen=True, eq=False)
class Dataset:
    """An immutable collection of subjects with a single embedding dimension."""

    dimension: int
    subjects: tuple[SubjectRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "subjects", tuple(sorted(self.subjects, key=lambda r: r.subject_id)))
        seen = set()
        for record in self.subjects:
            if record.subject_id in seen:
                raise DataError(f"duplicate subject id {record.subject_id}")
            seen.add(record.subject_id)
            for s in record.samples:
                if len(s.embedding) != self.dimension:
                    raise DataError(
                        f"sample {s.key} has dimension {len(s.embedding)}, dataset declares {self.dimension}"
                    )

    @classmethod
    def from_samples(cls, dimension: int, samples) -> "Dataset":
        """Group loose samples into a canonical Dataset, rejecting duplicates."""
        by_subject: dict[int, dict[Subclass, list[Sample]]] = {}
        seen: set[tuple[int, str, int]] = set()
        for s in samples:
            if s.key in seen:
                raise DataError(f"duplicate sample key {s.key}")
            seen.add(s.key)
            by_subject.setdefault(s.subject_id, {Subclass.NON_INJURED: [], Subclass.INJURED: []})
            by_subject[s.subject_id][s.subclass].append(s)
        records = [
            SubjectRecord(sid, tuple(groups[Subclass.NON_INJURED]), tuple(groups[Subclass.INJURED]))
            for sid, groups in by_subject.items()
        ]
        return cls(dimension, tuple(records))

    @property
    def n_subjects(self) -> int:
        return len(self.subjects)

    @property
    def subject_ids(self) -> tuple[int, ...]:
        return tuple(r.subject_id for r in self.subjects)

    def subject(self, subject_id: int) -> SubjectRecord:
        for record in self.subjects:
            if record.subject_id == subject_id:
                return record
        raise DataError(f"no subject {subject_id} in dataset")

    def all_samples(self) -> tuple[Sample, ...]:
        out: list[Sample] = []
        for record in self.subjects:
            out.extend(record.samples)
        return tuple(out)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.dimension == other.dimension and self.subjects == other.subjects


@dataclass(frozen=True)
class SplitSpec:
    """Repeated random sub-sampling plan: disjoint subject-level splits."""

    seed: int
    train_fraction: float = 0.7
    repetitions: int = 5

    def __post_init__(self):
        if self.seed < 0:
            raise ConfigError("split seed must be non-negative")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")


@dataclass(frozen=True)
class GalleryProbePartition:
    """Intact-only gallery vs injured-only probe set; dropped subjects listed."""

    gallery: tuple[Sample, ...]
    probe: tuple[Sample, ...]
    single_image_gallery: bool
    excluded_subjects: tuple[tuple[int, str], ...] = field(default=())

    def __post_init__(self):
        for s in self.gallery:
            if s.subclass is not Subclass.NON_INJURED:
                raise DataError(f"gallery sample {s.key} is not non-injured")
        for s in self.probe:
            if s.subclass is not Subclass.INJURED:
                raise DataError(f"probe sample {s.key} is not injured")
        if self.single_image_gallery:
            ids = [s.subject_id for s in self.gallery]
            if len(ids) != len(set(ids)):
                raise DataError("single-image gallery contains a repeated subject")

    @property
    def gallery_subject_ids(self) -> tuple[int, ...]:
        return tuple(dict.fromkeys(s.subject_id for s in self.gallery))


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of the synthetic subclass-cluster generator."""

    n_subjects: int
    dim: int
    n_non_injured: int
    n_injured: int
    subject_radius: float
    sigma_n: float
    sigma_i: float
    injury_shift: float
    n_injury_modes: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n_subjects < 1:
            raise ConfigError("n_subjects must be >= 1")
        if self.dim < 1:
            raise ConfigError("dim must be >= 1")
        if self.n_non_injured < 1 or self.n_injured < 1:
            raise ConfigError("per-subject sample counts must be >= 1")
        if self.n_injury_modes < 1:
            raise ConfigError("n_injury_modes must be >= 1")
        for name in ("subject_radius", "sigma_n", "sigma_i", "injury_shift"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")


def _random_unit_vector(rng: np.random.Generator, dim: int) -> np.ndarray:
    while True:
        v = rng.standard_normal(dim)
        norm = math.sqrt(float(v @ v))
        if norm > 1e-12:
            return v / norm


def generate_synthetic(cfg: SynthConfig) -> Dataset:
    """Draw a deterministic synthetic dataset per the generator model above.

    For a fixed seed the result is bit-identical across calls.  Injured
    samples cycle through the subject's injury-mode directions by sample
    index, so every mode is exercised whenever ``n_injured >= n_injury_modes``.
    """
    rng = np.random.default_rng(cfg.seed)
    records = []
    for sid in range(cfg.n_subjects):
        mean = _random_unit_vector(rng, cfg.dim) * cfg.subject_radius
        modes = [_random_unit_vector(rng, cfg.dim) for _ in range(cfg.n_injury_modes)]
        non = tuple(
            Sample(sid, Subclass.NON_INJURED, k, mean + rng.normal(0.0, cfg.sigma_n, cfg.dim))
            for k in range(cfg.n_non_injured)
        )
        inj = tuple(
            Sample(
                sid,
                Subclass.INJURED,
                k,
                mean + modes[k % cfg.n_injury_modes] * cfg.injury_shift + rng.normal(0.0, cfg.sigma_i, cfg.dim),
            )
            for k in range(cfg.n_injured)
        )
        records.append(SubjectRecord(sid, non, inj))
    return Dataset(cfg.dim, tuple(records))


CSV_FIXED_COLUMNS = ("subject_id", "subclass", "sample_index")


def save_embeddings(ds: Dataset, path) -> None:
    """Write the dataset in the CSV interchange format (bit-exact floats)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        feature_names = ",".join(f"f{k}" for k in range(ds.dimension))
        fh.write(",".join(CSV_FIXED_COLUMNS) + "," + feature_names + "\n")
        for record in ds.subjects:
            for s in record.samples:
                values = ",".join(repr(x) for x in s.embedding.tolist())
                fh.write(f"{s.subject_id},{s.subclass.value},{s.sample_index},{values}\n")


def load_embeddings(path) -> Dataset:
    """Parse an embedding CSV into a Dataset.

    The dimension is inferred from the header and enforced on every row.
    Malformed rows, inconsistent dimensions, and duplicate
    (subject, subclass, index) keys raise :class:`ParseError` naming the
    1-based line number.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        header = fh.readline()
        if not header:
            raise ParseError(f"{path}: line 1: empty file, expected header")
        fields = header.rstrip("\n").rstrip("\r").split(",")
        if tuple(fields[:3]) != CSV_FIXED_COLUMNS:
            raise ParseError(f"{path}: line 1: header must start with {','.join(CSV_FIXED_COLUMNS)}")
        dim = len(fields) - 3
        if dim < 1:
            raise ParseError(f"{path}: line 1: header declares no feature columns")
        for k, name in enumerate(fields[3:]):
            if name != f"f{k}":
                raise ParseError(f"{path}: line 1: feature column {k} must be named f{k}, got {name!r}")

        samples: list[Sample] = []
        seen: set[tuple[int, str, int]] = set()
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3 + dim:
                raise ParseError(
                    f"{path}: line {lineno}: expected {3 + dim} fields for dimension {dim}, got {len(parts)}"
                )
            try:
                sid = int(parts[0])
                idx = int(parts[2])
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: bad integer field ({exc})") from None
            if parts[1] not in ("N", "I"):
                raise ParseError(f"{path}: line {lineno}: subclass must be N or I, got {parts[1]!r}")
            if sid < 0 or idx < 0:
                raise ParseError(f"{path}: line {lineno}: ids and indices must be non-negative")
            key = (sid, parts[1], idx)
            if key in seen:
                raise ParseError(f"{path}: line {lineno}: duplicate sample {key}")
            seen.add(key)
            try:
                values = [float(x) for x in parts[3:]]
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: bad float field ({exc})") from None
            if not all(math.isfinite(x) for x in values):
                raise ParseError(f"{path}: line {lineno}: non-finite feature value")
            samples.append(Sample(sid, Subclass(parts[1]), idx, values))
    return Dataset.from_samples(dim, samples)


def subject_split(ds: Dataset, spec: SplitSpec, repetition: int) -> tuple[Dataset, Dataset]:
    """One subject-disjoint train/test split of the repeated-sampling plan.

    Train size is ``round(train_fraction * n_subjects)`` clamped so both
    sides stay nonempty; the remainder goes to test.  Deterministic per
    (seed, repetition).
    """
    if ds.n_subjects < 2:
        raise ProtocolError("subject_split needs at least 2 subjects")
    if not 0 <= repetition < spec.repetitions:
        raise ProtocolError(f"repetition {repetition} outside 0..{spec.repetitions - 1}")
    rng = np.random.default_rng([spec.seed, repetition])
    order = rng.permutation(ds.n_subjects)
    n_train = round(spec.train_fraction * ds.n_subjects)
    n_train = min(max(n_train, 1), ds.n_subjects - 1)
    train_ids = {ds.subjects[i].subject_id for i in order[:n_train]}
    train = Dataset(ds.dimension, tuple(r for r in ds.subjects if r.subject_id in train_ids))
    test = Dataset(ds.dimension, tuple(r for r in ds.subjects if r.subject_id not in train_ids))
    return train, test


def gallery_probe_partition(ds: Dataset, single_image_gallery: bool, seed=None) -> GalleryProbePartition:
    """Split a dataset into an intact gallery and an injured probe set.

    Subjects missing either subclass are dropped and reported in
    ``excluded_subjects`` (plus a warning) instead of failing the run.
    With ``single_image_gallery`` the lowest sample_index per subject is
    enrolled.  ``seed`` is accepted for interface stability; the current
    selection rule is deterministic and does not consume it.
    """
    gallery: list[Sample] = []
    probe: list[Sample] = []
    excluded: list[tuple[int, str]] = []
    for record in ds.subjects:
        if not record.non_injured:
            excluded.append((record.subject_id, "no non-injured samples"))
            continue
        if not record.injured:
            excluded.append((record.subject_id, "no injured samples"))
            continue
        if single_image_gallery:
            gallery.append(record.non_injured[0])
        else:
            gallery.extend(record.non_injured)
        probe.extend(record.injured)
    if excluded:
        warnings.warn(f"gallery/probe partition dropped subjects: {excluded}", stacklevel=2)
    return GalleryProbePartition(tuple(gallery), tuple(probe), single_image_gallery, tuple(excluded))
