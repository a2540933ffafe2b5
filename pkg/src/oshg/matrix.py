"""Dense float64 matrix substrate and a portable deterministic RNG.

Every embedding, incidence block, and parameter in this package is a plain
C-order ``numpy.ndarray`` of float64.  The helpers here enforce that
contract (finite values, 2-D shape) so downstream modules can assume it.

Randomness goes through :class:`Rng`, a counter-based splitmix64 stream.
It is implemented directly on uint64 arithmetic instead of
``numpy.random`` so that identical seeds give bit-identical streams on
every platform and numpy version.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError

__all__ = [
    "Rng",
    "as_matrix",
    "matmul",
    "cosine_similarity_matrix",
    "glorot_init",
    "l2_normalize_rows",
]

# splitmix64 constants (Steele, Lea & Flood 2014).  GAMMA advances the
# counter, MIX1/MIX2 are the finalizer multipliers.
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_SPAWN_SALT = np.uint64(0xD1B54A32D192ED03)
_U64_MASK = 0xFFFFFFFFFFFFFFFF
_INV_2_53 = float(2.0**-53)


def _mix64(z: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer on a uint64 array (wrapping arithmetic)."""
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


class Rng:
    """Counter-based splitmix64 stream.

    Output ``k`` of a stream seeded with ``s`` is ``mix64(s + (k+1)*GAMMA)``,
    so the stream is a pure function of ``(seed, position)`` and advancing
    it never touches global state.
    """

    def __init__(self, seed: int):
        self._seed = np.uint64(int(seed) & _U64_MASK)
        self._pos = 0

    @property
    def seed(self) -> int:
        return int(self._seed)

    def spawn(self, tag: int) -> "Rng":
        """Derive an independent child stream for subsystem ``tag``."""
        with np.errstate(over="ignore"):
            salted = np.uint64((int(tag) + 1) & _U64_MASK) * _SPAWN_SALT
            return Rng(int(_mix64(self._seed ^ salted)))

    def next_u64(self, n: int) -> np.ndarray:
        """Next ``n`` raw 64-bit words of the stream."""
        idx = np.arange(self._pos + 1, self._pos + n + 1, dtype=np.uint64)
        self._pos += n
        with np.errstate(over="ignore"):
            return _mix64(self._seed + idx * _GAMMA)

    def uniform(self, *shape: int) -> np.ndarray:
        """float64 samples in [0, 1) with 53-bit resolution."""
        n = int(np.prod(shape)) if shape else 1
        u = (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * _INV_2_53
        return u.reshape(shape) if shape else u[0]

    def normal(self, *shape: int) -> np.ndarray:
        """Standard normal samples via Box-Muller (pairs drawn per output)."""
        n = int(np.prod(shape)) if shape else 1
        # u1 shifted into (0, 1] so log() is finite.
        u1 = ((self.next_u64(n) >> np.uint64(11)).astype(np.float64) + 1.0) * _INV_2_53
        u2 = (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * _INV_2_53
        z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
        return z.reshape(shape) if shape else z[0]

    def integers(self, high: int, size: int) -> np.ndarray:
        """``size`` ints uniform on [0, high) (modulo method; bias is
        negligible for high << 2**64 and irrelevant to determinism)."""
        if high <= 0:
            raise ValueError("high must be positive")
        return (self.next_u64(size) % np.uint64(high)).astype(np.int64)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n)."""
        perm = np.arange(n, dtype=np.int64)
        if n < 2:
            return perm
        draws = self.next_u64(n - 1)
        for i in range(n - 1, 0, -1):
            j = int(draws[n - 1 - i] % np.uint64(i + 1))
            perm[i], perm[j] = perm[j], perm[i]
        return perm

    def choice(self, n: int, size: int) -> np.ndarray:
        """``size`` distinct indices sampled from range(n)."""
        if size > n:
            raise ValueError("cannot sample more indices than exist")
        return self.permutation(n)[:size]


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and return ``a`` as a 2-D C-order float64 array.

    Raises :class:`ShapeError` for wrong rank and ``ValueError`` for
    non-finite entries.
    """
    m = np.ascontiguousarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite values")
    return m


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with shape validation and finite-output check."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    out = a @ b
    if not np.all(np.isfinite(out)):
        raise ValueError("matmul overflowed to non-finite values")
    return out


def l2_normalize_rows(a: np.ndarray) -> np.ndarray:
    """Rows scaled to unit L2 norm; all-zero rows stay zero."""
    a = np.asarray(a, dtype=np.float64)
    norms = np.linalg.norm(a, axis=-1, keepdims=True)
    safe = np.where(norms == 0.0, 1.0, norms)
    return a / safe


def cosine_similarity_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarities, ``out[i, j] = cos(a[i], b[j])``.

    Rows with zero norm are treated as similarity 0 against everything,
    so zero-padded feature slots never poison a similarity matrix with
    NaN.
    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"feature dims differ: {a.shape[1]} vs {b.shape[1]}")
    return l2_normalize_rows(a) @ l2_normalize_rows(b).T


def glorot_init(rng: Rng, rows: int, cols: int, gain: float = 1.0) -> np.ndarray:
    """Uniform Glorot initialization in ``±gain * sqrt(6 / (rows + cols))``."""
    if rows < 1 or cols < 1:
        raise ShapeError("glorot_init needs rows, cols >= 1")
    limit = gain * np.sqrt(6.0 / (rows + cols))
    return (rng.uniform(rows, cols) * 2.0 - 1.0) * limit
