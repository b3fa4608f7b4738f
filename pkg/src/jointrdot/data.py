"""Residual block datasets: synthetic generation and the RSD1 file format.

Synthetic residuals stand in for codec intra-prediction residuals. Each block
is a zero-mean Gaussian field with covariance

    cov((r, c), (r', c')) = s(r, c) s(r', c') * rho_along**|d_par| * rho_across**|d_perp|

where ``d_par`` / ``d_perp`` are the pixel displacement components along and
across the mode's angle (0 degrees points right, 90 degrees points up) and
``s`` is the standard deviation profile: ``sigma`` scaled by ``1 + ramp * t``
with ``t`` in ``[0, 1]`` growing away from the prediction boundary. Smooth and
DC modes use an isotropic kernel ``rho_along**||d||``. Samples are rounded
half away from zero and clamped to +-1023.

Randomness: block ``b`` of mode ``m`` draws from its own PCG64 stream seeded
by ``SeedSequence(seed, spawn_key=(mode_index(m), b))``, so any block can be
regenerated independently of the others.

RSD1 layout (little endian): ``b"RSD1"``, version ``u8 = 1``, ``N u32``,
``M u32``, mode label (``u16`` byte length + UTF-8), then ``M * N * N``
``i16`` samples, row-major per block.
"""
from __future__ import annotations

import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ._io import atomic_write_bytes
from .errors import BadLength, BadMagic, InvalidParams, TruncatedFile, UnsupportedVersion

MODES = ("DC", "V", "H", "D_45", "D_135", "D_113", "D_157", "D_203", "D_67", "S", "S_V", "S_H")
DIRECTIONAL_MODES = ("V", "H", "D_45", "D_135", "D_113", "D_157", "D_203", "D_67")
MODE_ANGLES = {
    "V": 90.0, "H": 0.0, "D_45": 45.0, "D_135": 135.0, "D_113": 113.0,
    "D_157": 157.0, "D_203": 23.0, "D_67": 67.0,
}
BLOCK_SIZES = (4, 8, 16, 32)
SAMPLE_LIMIT = 1023
DATASET_MAGIC = b"RSD1"
DATASET_VERSION = 1


def mode_index(mode: str) -> int:
    check_mode(mode)
    return MODES.index(mode)


def check_mode(mode: str) -> str:
    if mode not in MODES:
        raise InvalidParams(f"unknown mode {mode!r}; expected one of {', '.join(MODES)}")
    return mode


@dataclass(frozen=True)
class Mixture:
    """Second Gaussian component drawn with probability ``weight``.

    Unset correlation / sigma values inherit from the main component.
    """

    weight: float
    angle_degrees: float
    rho_along: float | None = None
    rho_across: float | None = None
    sigma: float | None = None


@dataclass(frozen=True)
class SynthParams:
    rho_along: float = 0.95
    rho_across: float = 0.6
    sigma: float = 12.0
    ramp: float = 1.0
    angle_degrees: float | None = None
    mixture: Mixture | None = None

    def validate(self) -> None:
        for name in ("rho_along", "rho_across"):
            r = getattr(self, name)
            if not 0.0 < r < 1.0:
                raise InvalidParams(f"{name} must lie strictly inside (0, 1), got {r}")
        if not (np.isfinite(self.sigma) and self.sigma >= 0):
            raise InvalidParams("sigma must be finite and non-negative")
        if not (np.isfinite(self.ramp) and self.ramp >= 0):
            raise InvalidParams("ramp must be finite and non-negative")
        if self.mixture is not None:
            m = self.mixture
            if not 0.0 <= m.weight <= 1.0:
                raise InvalidParams("mixture weight must lie in [0, 1]")
            for r in (m.rho_along, m.rho_across):
                if r is not None and not 0.0 < r < 1.0:
                    raise InvalidParams("mixture correlations must lie strictly inside (0, 1)")
            if m.sigma is not None and not m.sigma >= 0:
                raise InvalidParams("mixture sigma must be non-negative")


@dataclass
class ResidualDataset:
    block_size: int
    mode: str
    blocks: np.ndarray = field(repr=False)
    source: dict = field(default_factory=dict)

    def __post_init__(self):
        check_mode(self.mode)
        b = np.asarray(self.blocks)
        if b.ndim != 3 or b.shape[1:] != (self.block_size, self.block_size):
            raise InvalidParams(f"blocks must have shape (M, {self.block_size}, {self.block_size})")
        self.blocks = b.astype(np.int16, copy=False)

    def __len__(self):
        return self.blocks.shape[0]

    def as_float(self) -> np.ndarray:
        return self.blocks.astype(np.float64)


def _std_profile(mode: str, n: int, sigma: float, ramp: float) -> np.ndarray:
    r, c = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    span = max(n - 1, 1)
    if mode in ("V", "S_V"):
        t = r / span
    elif mode in ("H", "S_H"):
        t = c / span
    elif mode == "DC":
        t = np.zeros((n, n))
    else:
        t = (r + c) / (2 * span)
    return (sigma * (1.0 + ramp * t)).ravel()


def covariance(mode: str, n: int, rho_along: float, rho_across: float, sigma: float,
               ramp: float, angle_degrees: float | None = None) -> np.ndarray:
    """Covariance of the row-major vectorised ``n x n`` synthetic block."""
    r, c = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    r, c = r.ravel().astype(float), c.ravel().astype(float)
    dx = c[None, :] - c[:, None]
    dy = -(r[None, :] - r[:, None])
    if angle_degrees is None:
        angle_degrees = MODE_ANGLES.get(mode)
    if angle_degrees is None:
        kernel = rho_along ** np.hypot(dx, dy)
    else:
        theta = np.deg2rad(angle_degrees)
        along = np.abs(dx * np.cos(theta) + dy * np.sin(theta))
        across = np.abs(-dx * np.sin(theta) + dy * np.cos(theta))
        kernel = rho_along ** along * rho_across ** across
    s = _std_profile(mode, n, sigma, ramp)
    return s[:, None] * kernel * s[None, :]


def _factor(cov: np.ndarray) -> np.ndarray:
    if not np.any(cov):
        return np.zeros_like(cov)
    jitter = 1e-10 * float(np.max(np.diag(cov)))
    return np.linalg.cholesky(cov + jitter * np.eye(cov.shape[0]))


def round_half_away(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def synth_residuals(mode: str, count: int, n: int, params: SynthParams | None = None,
                    seed: int = 0) -> ResidualDataset:
    """Seeded synthetic residual blocks for one mode."""
    params = SynthParams() if params is None else params
    check_mode(mode)
    if count < 1:
        raise InvalidParams("count must be at least 1")
    if n not in BLOCK_SIZES:
        raise InvalidParams(f"block size must be one of {BLOCK_SIZES}, got {n}")
    if seed < 0:
        raise InvalidParams("seed must be non-negative")
    params.validate()

    main = covariance(mode, n, params.rho_along, params.rho_across, params.sigma,
                      params.ramp, params.angle_degrees)
    factors = [_factor(main)]
    weight = 0.0
    if params.mixture is not None:
        m = params.mixture
        weight = m.weight
        factors.append(_factor(covariance(
            mode, n,
            params.rho_along if m.rho_along is None else m.rho_along,
            params.rho_across if m.rho_across is None else m.rho_across,
            params.sigma if m.sigma is None else m.sigma,
            params.ramp, m.angle_degrees)))

    midx = mode_index(mode)
    size = n * n
    z = np.empty((count, size))
    comp = np.zeros(count, dtype=np.int64)
    for b in range(count):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(midx, b))))
        u = rng.random()
        z[b] = rng.standard_normal(size)
        comp[b] = 1 if u < weight else 0

    x = np.empty((count, size))
    for k, f in enumerate(factors):
        sel = comp == k
        x[sel] = z[sel] @ f.T
    blocks = np.clip(round_half_away(x), -SAMPLE_LIMIT, SAMPLE_LIMIT).astype(np.int16)
    source = {"kind": "synth", "seed": int(seed), "params": asdict(params)}
    return ResidualDataset(n, mode, blocks.reshape(count, n, n), source)


# -- RSD1 ----------------------------------------------------------------------


def dataset_to_bytes(ds: ResidualDataset) -> bytes:
    label = ds.mode.encode("utf-8")
    header = DATASET_MAGIC + struct.pack("<BII", DATASET_VERSION, ds.block_size, len(ds))
    header += struct.pack("<H", len(label)) + label
    return header + np.ascontiguousarray(ds.blocks, dtype="<i2").tobytes()


def dataset_from_bytes(data: bytes, path=None) -> ResidualDataset:
    if len(data) < 4 or data[:4] != DATASET_MAGIC:
        raise BadMagic("not an RSD1 residual dataset")
    fixed = struct.calcsize("<BIIH")
    if len(data) < 4 + fixed:
        raise TruncatedFile("header is incomplete")
    version, n, m, label_len = struct.unpack_from("<BIIH", data, 4)
    if version != DATASET_VERSION:
        raise UnsupportedVersion(f"RSD1 version {version} is not supported")
    pos = 4 + fixed
    if len(data) < pos + label_len:
        raise TruncatedFile("mode label is incomplete")
    mode = data[pos:pos + label_len].decode("utf-8")
    pos += label_len
    need = m * n * n * 2
    if len(data) - pos < need:
        raise TruncatedFile(f"expected {need} payload bytes, found {len(data) - pos}")
    blocks = np.frombuffer(data, dtype="<i2", count=m * n * n, offset=pos).astype(np.int16)
    source = {"kind": "file", "path": str(path)} if path is not None else {}
    return ResidualDataset(n, mode, blocks.reshape(m, n, n), source)


def write_dataset(ds: ResidualDataset, path) -> None:
    atomic_write_bytes(path, dataset_to_bytes(ds))


def read_dataset(path) -> ResidualDataset:
    return dataset_from_bytes(Path(path).read_bytes(), path)


def ingest_raw(path, n: int, mode: str) -> ResidualDataset:
    """Read a headerless dump of consecutive row-major ``n x n`` i16 LE blocks."""
    check_mode(mode)
    data = Path(path).read_bytes()
    block_bytes = n * n * 2
    if len(data) == 0 or len(data) % block_bytes:
        raise BadLength(f"file length {len(data)} is not a positive multiple of {block_bytes}")
    blocks = np.frombuffer(data, dtype="<i2").astype(np.int16).reshape(-1, n, n)
    return ResidualDataset(n, mode, blocks, {"kind": "ingested", "path": str(path)})
