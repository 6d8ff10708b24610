"""
Synthetic growth-profile datasets.

Each record is (thickness profile, dose time, saturation time) for one
randomly drawn ALD process.  Sample ``i`` of a dataset draws from its own RNG
stream keyed on ``(seed, i)``, so a dataset is a pure function of its
metadata, size and seed no matter how generation is split across workers.
"""

from __future__ import annotations

import json
import math
import struct
import warnings
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .transport import (
    ProcessConditions,
    ReactorGeometry,
    coverage_analytic,
    derive_rates,
    saturation_time,
)

# point count -> spacing (m) of the six reference datasets
REFERENCE_SPACINGS = {20: 0.02, 16: 0.025, 10: 0.04, 8: 0.05, 5: 0.08, 4: 0.10}

MAGIC = b"ALDS"
FORMAT_VERSION = 1
STD_FLOOR = 1e-12

_MASK64 = (1 << 64) - 1


# ---------------------------------------------------------------------------
# priors and sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Prior:
    low: float
    high: float
    log: bool = False

    def __post_init__(self):
        if not self.low <= self.high:
            raise ValueError(f"prior range [{self.low}, {self.high}] is empty")
        if self.log and self.low <= 0:
            raise ValueError("log-uniform prior needs a positive range")

    def draw(self, rng: np.random.Generator) -> float:
        if self.low == self.high:
            rng.random()  # keep stream alignment with non-degenerate priors
            return float(self.low)
        if self.log:
            return math.exp(rng.uniform(math.log(self.low), math.log(self.high)))
        return float(rng.uniform(self.low, self.high))


@dataclass(frozen=True)
class ParameterPriors:
    partial_pressure: Prior = Prior(0.5, 50.0, log=True)
    molar_mass: Prior = Prior(50.0, 500.0)
    temperature: Prior = Prior(373.0, 573.0)
    sticking_probability: Prior = Prior(1e-5, 1e-1, log=True)
    # The thickness scale is confounded with coverage; see wide_growth() for the alternative.
    growth_per_cycle: Prior = Prior(0.1, 0.1)
    site_density: Prior = Prior(1e18, 1e19, log=True)
    dose_fraction: Prior = Prior(0.05, 1.0, log=True)

    def __post_init__(self):
        if self.sticking_probability.high > 1:
            raise ValueError("sticking probability cannot exceed 1")
        if not (0 < self.dose_fraction.low and self.dose_fraction.high <= 1):
            raise ValueError("dose fraction range must lie in (0, 1]")
        if self.sticking_probability.low <= 0 or self.molar_mass.low <= 0:
            raise ValueError("physical parameters must be positive")

    @classmethod
    def wide_growth(cls) -> "ParameterPriors":
        """Defaults with growth per cycle uniform over [0.02, 0.2] nm/cycle."""
        return cls(growth_per_cycle=Prior(0.02, 0.2))

    def to_dict(self) -> dict:
        return {name: [p.low, p.high, "log-uniform" if p.log else "uniform"] for name, p in self.__dict__.items()}

    @classmethod
    def from_dict(cls, data: dict) -> "ParameterPriors":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown prior(s): {sorted(unknown)}")
        return cls(**{k: Prior(lo, hi, tag == "log-uniform") for k, (lo, hi, tag) in data.items()})


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def stream_seed(seed: int, index: int) -> int:
    return splitmix64(splitmix64(seed & _MASK64) ^ (index & _MASK64))


def sample_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(stream_seed(seed, index)))


def sample_conditions(priors: ParameterPriors, rng: np.random.Generator) -> tuple[ProcessConditions, float]:
    """Draw one process and its dose fraction; field order is part of the stream contract."""
    cond = ProcessConditions(
        partial_pressure=priors.partial_pressure.draw(rng),
        molar_mass=priors.molar_mass.draw(rng),
        temperature=priors.temperature.draw(rng),
        sticking_probability=priors.sticking_probability.draw(rng),
        growth_per_cycle=priors.growth_per_cycle.draw(rng),
        site_density=priors.site_density.draw(rng),
    )
    return cond, priors.dose_fraction.draw(rng)


# ---------------------------------------------------------------------------
# records and datasets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SampleRecord:
    thickness: np.ndarray  # nm
    dose_time: float  # s
    saturation_time: float  # s


@dataclass(frozen=True)
class DatasetMeta:
    n_points: int
    spacing: float
    positions: tuple[float, ...]
    geometry: ReactorGeometry = ReactorGeometry()
    priors: ParameterPriors = ParameterPriors()
    seed: int = 1
    theta_sat: float = 0.99
    format_version: int = FORMAT_VERSION

    @property
    def is_standard(self) -> bool:
        return REFERENCE_SPACINGS.get(self.n_points) == self.spacing

    def to_dict(self) -> dict:
        return {
            "n_points": self.n_points,
            "spacing": self.spacing,
            "positions": list(self.positions),
            "geometry": asdict(self.geometry),
            "priors": self.priors.to_dict(),
            "seed": self.seed,
            "theta_sat": self.theta_sat,
            "format_version": self.format_version,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetMeta":
        return cls(
            n_points=d["n_points"],
            spacing=d["spacing"],
            positions=tuple(d["positions"]),
            geometry=ReactorGeometry(**d["geometry"]),
            priors=ParameterPriors.from_dict(d["priors"]),
            seed=d["seed"],
            theta_sat=d["theta_sat"],
            format_version=d["format_version"],
        )


def make_meta(
    n_points: int,
    seed: int = 1,
    geometry: ReactorGeometry | None = None,
    priors: ParameterPriors | None = None,
    theta_sat: float = 0.99,
) -> DatasetMeta:
    """Metadata for ``n_points`` equally spaced samples starting at the inlet.

    The spacing is ``length / n_points``, which reproduces the reference
    spacings (20 -> 2 cm, ..., 4 -> 10 cm) for the default 0.4 m zone.
    """
    geometry = geometry or ReactorGeometry()
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    if not 0 < theta_sat < 1:
        raise ValueError("theta_sat must lie in (0, 1)")
    spacing = geometry.length / n_points
    if n_points in REFERENCE_SPACINGS and geometry.length == ReactorGeometry().length:
        spacing = REFERENCE_SPACINGS[n_points]
    else:
        warnings.warn(f"non-standard dataset: {n_points} points over {geometry.length} m", stacklevel=2)
    positions = tuple(i * spacing for i in range(n_points))
    return DatasetMeta(n_points, spacing, positions, geometry, priors or ParameterPriors(), seed, theta_sat)


@dataclass(frozen=True)
class NormalizationStats:
    input_mean: np.ndarray  # n thickness columns, then log10(t_dose)
    input_std: np.ndarray
    target_mean: float  # log10(t_sat)
    target_std: float
    floored: tuple[int, ...] = ()

    def __eq__(self, other):
        if not isinstance(other, NormalizationStats):
            return NotImplemented
        return (
            _bits_equal(self.input_mean, other.input_mean)
            and _bits_equal(self.input_std, other.input_std)
            and _bits_equal(self.target_mean, other.target_mean)
            and _bits_equal(self.target_std, other.target_std)
            and tuple(self.floored) == tuple(other.floored)
        )

    @property
    def n_features(self) -> int:
        return len(self.input_mean)

    def to_dict(self) -> dict:
        return {
            "input_mean": [float(v) for v in self.input_mean],
            "input_std": [float(v) for v in self.input_std],
            "target_mean": float(self.target_mean),
            "target_std": float(self.target_std),
            "floored": list(self.floored),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationStats":
        return cls(
            np.asarray(d["input_mean"], dtype=np.float64),
            np.asarray(d["input_std"], dtype=np.float64),
            float(d["target_mean"]),
            float(d["target_std"]),
            tuple(d.get("floored", ())),
        )


def _bits_equal(a, b) -> bool:
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    return a.shape == b.shape and a.view(np.uint64).tobytes() == b.view(np.uint64).tobytes()


@dataclass(eq=False)
class Dataset:
    meta: DatasetMeta
    thickness: np.ndarray  # (N, n_points), nm
    dose_time: np.ndarray  # (N,), s
    saturation_time: np.ndarray  # (N,), s
    stats: NormalizationStats | None = None

    def __post_init__(self):
        self.thickness = np.ascontiguousarray(self.thickness, dtype=np.float64).reshape(-1, self.meta.n_points)
        self.dose_time = np.ascontiguousarray(self.dose_time, dtype=np.float64)
        self.saturation_time = np.ascontiguousarray(self.saturation_time, dtype=np.float64)
        if not (len(self.thickness) == len(self.dose_time) == len(self.saturation_time)):
            raise ValueError("record arrays differ in length")

    def __len__(self) -> int:
        return len(self.dose_time)

    def __getitem__(self, i: int) -> SampleRecord:
        return SampleRecord(self.thickness[i].copy(), float(self.dose_time[i]), float(self.saturation_time[i]))

    @property
    def records(self) -> list[SampleRecord]:
        return [self[i] for i in range(len(self))]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.meta == other.meta
            and _bits_equal(self.thickness, other.thickness)
            and _bits_equal(self.dose_time, other.dose_time)
            and _bits_equal(self.saturation_time, other.saturation_time)
            and self.stats == other.stats
        )

    def with_stats(self, stats: NormalizationStats | None) -> "Dataset":
        return Dataset(self.meta, self.thickness, self.dose_time, self.saturation_time, stats)

    def features(self) -> np.ndarray:
        """Raw network inputs: thickness columns followed by log10(t_dose)."""
        return np.column_stack([self.thickness, np.log10(self.dose_time)])

    def targets(self) -> np.ndarray:
        return np.log10(self.saturation_time)

    def standardized(self, stats: NormalizationStats | None = None) -> tuple[np.ndarray, np.ndarray]:
        stats = stats or self.stats
        if stats is None:
            raise ValueError("dataset has no normalization stats")
        X = (self.features() - stats.input_mean) / stats.input_std
        y = (self.targets() - stats.target_mean) / stats.target_std
        return X, y


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------


def generate_sample(
    cond: ProcessConditions,
    dose_fraction: float,
    geometry: ReactorGeometry,
    positions,
    theta_sat: float = 0.99,
) -> SampleRecord:
    positions = np.asarray(positions, dtype=np.float64)
    rates = derive_rates(cond, geometry)
    t_sat = saturation_time(rates, float(positions[-1]), theta_sat)
    t_dose = dose_fraction * t_sat
    coverage = np.atleast_1d(coverage_analytic(rates, positions, t_dose))
    return SampleRecord(cond.growth_per_cycle * coverage, t_dose, t_sat)


def _generate_block(meta: DatasetMeta, seed: int, start: int, stop: int):
    positions = np.asarray(meta.positions, dtype=np.float64)
    out = np.empty((stop - start, meta.n_points + 2))
    for row, i in enumerate(range(start, stop)):
        cond, f = sample_conditions(meta.priors, sample_rng(seed, i))
        rec = generate_sample(cond, f, meta.geometry, positions, meta.theta_sat)
        out[row, :-2] = rec.thickness
        out[row, -2] = rec.dose_time
        out[row, -1] = rec.saturation_time
    return out


def generate_dataset(meta: DatasetMeta, n_samples: int, seed: int | None = None, workers: int = 1) -> Dataset:
    """Generate ``n_samples`` records; ``seed`` defaults to ``meta.seed``.

    Records are identical for any ``workers`` value.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if seed is None:
        seed = meta.seed
    elif seed != meta.seed:
        meta = DatasetMeta(**{**meta.__dict__, "seed": seed})
    if workers <= 1:
        rows = _generate_block(meta, seed, 0, n_samples)
    else:
        bounds = np.linspace(0, n_samples, min(workers, n_samples) + 1).astype(int)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_generate_block, meta, seed, int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]
            rows = np.concatenate([f.result() for f in futures])
    return Dataset(meta, rows[:, :-2], rows[:, -2], rows[:, -1])


def compute_normalization(train: Dataset) -> NormalizationStats:
    """Per-feature mean/std over the training set; degenerate columns floored and reported."""
    if len(train) < 2:
        raise ValueError("need at least two records for normalization")
    X = train.features()
    y = train.targets()
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    floored = tuple(int(i) for i in np.flatnonzero(std < STD_FLOOR))
    if floored:
        warnings.warn(f"constant input feature(s) {list(floored)}; std floored at {STD_FLOOR}", stacklevel=2)
    y_std = float(y.std())
    return NormalizationStats(mean, np.maximum(std, STD_FLOOR), float(y.mean()), max(y_std, STD_FLOOR), floored)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


class DatasetFormatError(ValueError):
    pass


class MagicMismatchError(DatasetFormatError):
    pass


class UnsupportedVersionError(DatasetFormatError):
    pass


class TruncatedFileError(DatasetFormatError):
    pass


class ChecksumMismatchError(DatasetFormatError):
    pass


_PREAMBLE = struct.Struct("<4sHI")  # magic, version, header length


def dumps(dataset: Dataset) -> bytes:
    header = {
        "meta": dataset.meta.to_dict(),
        "n_records": len(dataset),
        "stats": None if dataset.stats is None else dataset.stats.to_dict(),
    }
    header_bytes = json.dumps(header).encode("utf-8")
    rows = np.column_stack([dataset.thickness, dataset.dose_time, dataset.saturation_time])
    body = _PREAMBLE.pack(MAGIC, FORMAT_VERSION, len(header_bytes)) + header_bytes
    body += np.ascontiguousarray(rows, dtype="<f8").tobytes()
    return body + struct.pack("<I", zlib.crc32(body))


def loads(blob: bytes) -> Dataset:
    if len(blob) < _PREAMBLE.size:
        raise TruncatedFileError(f"file is {len(blob)} bytes, shorter than the preamble")
    magic, version, header_len = _PREAMBLE.unpack_from(blob)
    if magic != MAGIC:
        raise MagicMismatchError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"format version {version} not supported (expected {FORMAT_VERSION})")
    body_start = _PREAMBLE.size + header_len
    if len(blob) < body_start + 4:
        raise TruncatedFileError("file ends inside the header")
    try:
        header = json.loads(blob[_PREAMBLE.size : body_start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        if zlib.crc32(blob[:-4]) != struct.unpack("<I", blob[-4:])[0]:
            raise ChecksumMismatchError("checksum mismatch (corrupted header)") from exc
        raise DatasetFormatError(f"unreadable header: {exc}") from exc
    meta = DatasetMeta.from_dict(header["meta"])
    n_cols = meta.n_points + 2
    expected = body_start + header["n_records"] * n_cols * 8 + 4
    if len(blob) < expected:
        raise TruncatedFileError(f"file is {len(blob)} bytes, header promises {expected}")
    if len(blob) > expected:
        raise DatasetFormatError(f"{len(blob) - expected} trailing bytes after checksum")
    (crc,) = struct.unpack("<I", blob[-4:])
    if zlib.crc32(blob[:-4]) != crc:
        raise ChecksumMismatchError("checksum mismatch")
    rows = np.frombuffer(blob, dtype="<f8", count=header["n_records"] * n_cols, offset=body_start)
    rows = rows.astype(np.float64).reshape(-1, n_cols)
    stats = None if header["stats"] is None else NormalizationStats.from_dict(header["stats"])
    return Dataset(meta, rows[:, :-2], rows[:, -2], rows[:, -1], stats)


def save(dataset: Dataset, path) -> None:
    Path(path).write_bytes(dumps(dataset))


def load(path) -> Dataset:
    return loads(Path(path).read_bytes())


def export_csv(dataset: Dataset, path) -> None:
    """One record per line; floats written with shortest round-trip repr."""
    n = dataset.meta.n_points
    lines = [",".join([f"x_{i}" for i in range(n)] + ["t_dose", "t_sat"])]
    for thick, td, ts in zip(dataset.thickness.tolist(), dataset.dose_time.tolist(), dataset.saturation_time.tolist()):
        lines.append(",".join(repr(v) for v in (*thick, td, ts)))
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inverse of ``export_csv``: (thickness, dose_time, saturation_time)."""
    lines = Path(path).read_text().splitlines()
    n = len(lines[0].split(",")) - 2
    rows = np.array([[float(v) for v in line.split(",")] for line in lines[1:]], dtype=np.float64).reshape(-1, n + 2)
    return rows[:, :n], rows[:, n], rows[:, n + 1]
