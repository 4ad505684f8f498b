"""Partially observed third-order tensors: data model, text IO, norms, errors.

A tensor is stored sparsely as a list of ((i, j, k), value) observations with
1-based indices.  All types are immutable after construction; operations are
pure functions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np

Index = tuple[int, int, int]
Entry = tuple[Index, float]


class TensorFormatError(ValueError):
    """A tensor file or entry list failed validation.

    ``line`` is the 1-based line number in the offending file, when known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class ObservedTensor:
    """A partially observed tensor of shape ``dims`` with entries on the
    observation set Omega.

    ``entries`` keeps the construction order (deterministic downstream
    ordering relies on this).  Indices are 1-based, values finite floats.
    """

    dims: tuple[int, int, int]
    entries: tuple[Entry, ...]

    def __post_init__(self):
        n1, n2, n3 = self.dims
        if not (n1 >= 1 and n2 >= 1 and n3 >= 1):
            raise TensorFormatError(f"dimensions must be positive, got {self.dims}")
        if len(self.entries) == 0:
            raise TensorFormatError("at least one observed entry is required")
        seen = set()
        for (i, j, k), v in self.entries:
            if not (1 <= i <= n1 and 1 <= j <= n2 and 1 <= k <= n3):
                raise TensorFormatError(f"index ({i},{j},{k}) out of range for dims {self.dims}")
            if (i, j, k) in seen:
                raise TensorFormatError(f"duplicate entry at ({i},{j},{k})")
            if not math.isfinite(v):
                raise TensorFormatError(f"non-finite value at ({i},{j},{k})")
            seen.add((i, j, k))

    @property
    def nobs(self) -> int:
        return len(self.entries)

    @cached_property
    def value_map(self) -> dict[Index, float]:
        return {ijk: v for ijk, v in self.entries}

    @cached_property
    def index_array(self) -> np.ndarray:
        """Observation indices as an (m, 3) int array, 1-based, entry order."""
        arr = np.array([ijk for ijk, _ in self.entries], dtype=np.int64)
        arr.flags.writeable = False
        return arr

    @cached_property
    def value_array(self) -> np.ndarray:
        arr = np.array([v for _, v in self.entries], dtype=np.float64)
        arr.flags.writeable = False
        return arr


@dataclass(frozen=True)
class SliceIndex:
    """Per-slice observation supports: for each k, the list Omega_k of (i, j)
    pairs sorted lexicographically."""

    dims: tuple[int, int, int]
    slices: tuple[tuple[tuple[int, int], ...], ...]

    @property
    def counts(self) -> tuple[int, ...]:
        """Cardinalities m_k of the slice supports."""
        return tuple(len(s) for s in self.slices)

    @property
    def empty_slices(self) -> tuple[int, ...]:
        """1-based k with no observations; their c_k is unrecoverable."""
        return tuple(k + 1 for k, s in enumerate(self.slices) if len(s) == 0)


@dataclass(frozen=True)
class RankOneCompletion:
    """A rank-1 completion a (x) b (x) c with its fit quality on Omega.

    ``a`` and ``b`` are unit vectors; ``c`` carries the magnitude.  ``err_rel``
    is absent when the observed tensor is identically zero on Omega, and
    ``err_rat`` is absent unless a ground-truth noise norm is known.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    err_abs: float
    err_rel: Optional[float]
    err_rat: Optional[float] = None
    singular: bool = False

    def __post_init__(self):
        for name in ("a", "b", "c"):
            v = np.asarray(getattr(self, name), dtype=np.float64)
            v.flags.writeable = False
            object.__setattr__(self, name, v)
        for name in ("a", "b"):
            nrm = np.linalg.norm(getattr(self, name))
            if abs(nrm - 1.0) > 1e-9:
                raise ValueError(f"{name} must be a unit vector, got norm {nrm}")
        if self.err_abs < 0:
            raise ValueError("err_abs must be nonnegative")


def load_tensor(path) -> ObservedTensor:
    """Read a tensor file.

    Format: first non-comment line ``n1 n2 n3``; each following non-comment
    line ``i j k value``; '#' starts a comment.  Errors carry the offending
    line number.
    """
    dims = None
    entries: list[Entry] = []
    seen: dict[Index, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            toks = text.split()
            if dims is None:
                if len(toks) != 3:
                    raise TensorFormatError("expected 'n1 n2 n3' header", lineno)
                try:
                    dims = tuple(int(t) for t in toks)
                except ValueError:
                    raise TensorFormatError(f"bad dimension in {toks!r}", lineno) from None
                if any(n < 1 for n in dims):
                    raise TensorFormatError(f"dimensions must be positive, got {dims}", lineno)
                continue
            if len(toks) != 4:
                raise TensorFormatError("expected 'i j k value'", lineno)
            try:
                i, j, k = (int(t) for t in toks[:3])
                v = float(toks[3])
            except ValueError:
                raise TensorFormatError(f"could not parse entry {text!r}", lineno) from None
            n1, n2, n3 = dims
            if not (1 <= i <= n1 and 1 <= j <= n2 and 1 <= k <= n3):
                raise TensorFormatError(f"index ({i},{j},{k}) out of range for dims {dims}", lineno)
            if (i, j, k) in seen:
                raise TensorFormatError(
                    f"duplicate entry at ({i},{j},{k}), first seen on line {seen[(i, j, k)]}", lineno)
            if not math.isfinite(v):
                raise TensorFormatError(f"non-finite value at ({i},{j},{k})", lineno)
            seen[(i, j, k)] = lineno
            entries.append(((i, j, k), v))
    if dims is None:
        raise TensorFormatError("empty file: missing 'n1 n2 n3' header")
    if not entries:
        raise TensorFormatError("no observed entries")
    return ObservedTensor(dims=dims, entries=tuple(entries))


def save_tensor(tensor: ObservedTensor, path) -> None:
    """Write a tensor file readable by :func:`load_tensor`.

    Values are emitted with 17 significant digits so a round trip is
    bit-exact.
    """
    n1, n2, n3 = tensor.dims
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{n1} {n2} {n3}\n")
        for (i, j, k), v in tensor.entries:
            fh.write(f"{i} {j} {k} {v:.17g}\n")


def omega_slices(tensor: ObservedTensor) -> SliceIndex:
    """Group the observation set by third index into Omega_k lists, each
    sorted lexicographically in (i, j)."""
    n3 = tensor.dims[2]
    buckets: list[list[tuple[int, int]]] = [[] for _ in range(n3)]
    for (i, j, k), _ in tensor.entries:
        buckets[k - 1].append((i, j))
    return SliceIndex(
        dims=tensor.dims,
        slices=tuple(tuple(sorted(b)) for b in buckets),
    )


def omega_norm(tensor: ObservedTensor,
               evaluator: Optional[Callable[[int, int, int], float]] = None) -> float:
    """Omega-restricted Frobenius norm sqrt(sum of X_ijk^2 over Omega).

    With ``evaluator=None`` this is the norm of the observed data itself;
    otherwise ``evaluator(i, j, k)`` supplies X on Omega.
    """
    if evaluator is None:
        return float(np.linalg.norm(tensor.value_array))
    total = 0.0
    for (i, j, k), _ in tensor.entries:
        x = evaluator(i, j, k)
        total += x * x
    return math.sqrt(total)


def completion_errors(tensor: ObservedTensor, a: np.ndarray, b: np.ndarray,
                      c: np.ndarray) -> tuple[float, Optional[float]]:
    """Absolute and relative completion errors of a (x) b (x) c on Omega.

    Returns (err_abs, err_rel); err_rel is None when the observed data is
    identically zero.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if (len(a), len(b), len(c)) != tensor.dims:
        raise ValueError(f"factor lengths {(len(a), len(b), len(c))} do not match dims {tensor.dims}")
    idx = tensor.index_array
    model = a[idx[:, 0] - 1] * b[idx[:, 1] - 1] * c[idx[:, 2] - 1]
    err_abs = float(np.linalg.norm(tensor.value_array - model))
    data_norm = float(np.linalg.norm(tensor.value_array))
    err_rel = err_abs / data_norm if data_norm > 0 else None
    return err_abs, err_rel
