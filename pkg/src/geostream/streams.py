"""Row streams: replayable sources with a pass counter, the on-disk matrix
formats and the synthetic dataset generators."""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import ConfigError, FormatError, IoError, PassBudgetExceededError
from .linalg import as_matrix

MAGIC = b"GSTRM1"


class RowSource:
    """Replayable row stream. Every full iteration counts as one pass;
    starting a pass beyond ``pass_cap`` raises."""

    def __init__(self, rows: Iterable, pass_cap: int | None = None) -> None:
        self._rows = as_matrix(np.asarray(list(rows) if not hasattr(rows, "shape") else rows))
        self.pass_cap = pass_cap
        self.passes = 0

    @property
    def shape(self) -> tuple[int, int]:
        return self._rows.shape

    def __iter__(self) -> Iterator[np.ndarray]:
        if self.pass_cap is not None and self.passes >= self.pass_cap:
            raise PassBudgetExceededError(f"pass cap {self.pass_cap} reached",
                                          cap=self.pass_cap)
        self.passes += 1
        yield from self._rows


def write_matrix(path: str | Path, A, fmt: str = "text") -> None:
    M = as_matrix(A)
    try:
        if fmt == "binary":
            with open(path, "wb") as fh:
                fh.write(MAGIC + struct.pack("<QQ", *M.shape))
                fh.write(np.ascontiguousarray(M, dtype="<f8").tobytes())
        elif fmt == "text":
            np.savetxt(path, M, fmt="%.17g")
        else:
            raise ConfigError(f"unknown format {fmt!r}")
    except OSError as exc:
        raise IoError(str(exc)) from exc


def read_matrix(path: str | Path, fmt: str | None = None) -> np.ndarray:
    """Read either format; ``fmt=None`` sniffs the binary magic."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    if fmt == "binary" or (fmt is None and raw.startswith(MAGIC)):
        if not raw.startswith(MAGIC) or len(raw) < 22:
            raise FormatError("missing binary header")
        n, d = struct.unpack_from("<QQ", raw, len(MAGIC))
        body = raw[22:]
        if len(body) != 8 * n * d:
            raise FormatError(f"expected {n * d} values, found {len(body) // 8}")
        return as_matrix(np.frombuffer(body, dtype="<f8").reshape(n, d).astype(float))
    try:
        rows = [[float(t) for t in line.split()] for line in raw.decode().splitlines()
                if line.strip()]
    except (UnicodeDecodeError, ValueError) as exc:
        raise FormatError(f"unparseable text matrix: {exc}") from exc
    if not rows:
        return np.zeros((0, 0))
    if len({len(r) for r in rows}) != 1:
        raise FormatError("ragged rows in text matrix")
    return as_matrix(np.array(rows))


def random_int(n: int, d: int, M: int, rng: np.random.Generator) -> np.ndarray:
    """Entries uniform on ``{-M, ..., M}``."""
    _check_sizes(n, d)
    return rng.integers(-M, M + 1, size=(n, d)).astype(float)


def scaled_identity(d: int, levels: int, base: float = 2.0) -> np.ndarray:
    """Stacked copies ``I, base I, base^2 I, ...``: after the first block every
    row stays in the span while its scale keeps growing."""
    _check_sizes(levels, d)
    return np.vstack([base ** i * np.eye(d) for i in range(levels)])


def sphere(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    _check_sizes(n, d)
    X = rng.standard_normal((n, d))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def clustered(n: int, d: int, rng: np.random.Generator, clusters: int = 4,
              spread: float = 0.05) -> np.ndarray:
    _check_sizes(n, d)
    centers = rng.standard_normal((clusters, d))
    labels = rng.integers(0, clusters, size=n)
    return centers[labels] + spread * rng.standard_normal((n, d))


def _check_sizes(*sizes: int) -> None:
    if any(s <= 0 for s in sizes):
        raise ConfigError("sizes must be positive")
