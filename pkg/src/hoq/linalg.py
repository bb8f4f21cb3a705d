"""Complex matrices, density matrices, the Löwner order and quantum operations.

Matrices are plain ``numpy`` complex arrays.  Multi-qubit systems use the
lexicographic basis ordering, so the first qubit is the most significant bit
of a basis index and ``tensor(a, b)`` is the Kronecker product.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np

DEFAULT_TOL = 1e-9


class DimensionError(ValueError):
    """Raised when matrix shapes do not fit together."""


class OrderError(ValueError):
    """Raised when a chain is not increasing in the Löwner order."""


def as_matrix(m) -> np.ndarray:
    """Coerce ``m`` into a 2-d complex array (scalars become 1x1)."""
    a = np.asarray(m, dtype=complex)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {a.shape}")
    return a


def _square(m: np.ndarray) -> np.ndarray:
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"matrix is not square: {m.shape}")
    return m


def dagger(m) -> np.ndarray:
    return as_matrix(m).conj().T


def tensor(a, b) -> np.ndarray:
    """Kronecker product under the lexicographic convention."""
    return np.kron(as_matrix(a), as_matrix(b))


def tensor_all(ms) -> np.ndarray:
    return reduce(tensor, ms, np.ones((1, 1), dtype=complex))


def identity(n: int) -> np.ndarray:
    return np.eye(n, dtype=complex)


def is_hermitian(m, tol: float = DEFAULT_TOL) -> bool:
    m = _square(m)
    return bool(np.allclose(m, m.conj().T, atol=tol, rtol=0.0))


def is_positive(m, tol: float = DEFAULT_TOL) -> bool:
    """Hermitian with all eigenvalues at least ``-tol``."""
    m = _square(m)
    if not is_hermitian(m, tol):
        return False
    if m.shape[0] == 0:
        return True
    h = (m + m.conj().T) / 2
    return bool(np.linalg.eigvalsh(h).min() >= -tol)


def is_density(m, tol: float = DEFAULT_TOL) -> bool:
    """Positive with trace at most one (a possibly sub-normalised state)."""
    m = _square(m)
    return is_positive(m, tol) and float(np.trace(m).real) <= 1.0 + tol


def validate_density(m, tol: float = DEFAULT_TOL) -> np.ndarray:
    m = _square(m)
    if not is_density(m, tol):
        raise ValueError("not a density matrix")
    return m


def trace(m) -> float:
    return float(np.trace(as_matrix(m)).real)


def loewner_leq(a, b, tol: float = DEFAULT_TOL) -> bool:
    """``a ⊑ b`` iff ``b - a`` is positive."""
    a, b = _square(a), _square(b)
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return is_positive(b - a, tol)


def trace_norm(m) -> float:
    """Sum of singular values."""
    return float(np.linalg.svd(as_matrix(m), compute_uv=False).sum())


def ket(bits: str) -> np.ndarray:
    """Column vector of a computational basis state, e.g. ``ket("01")``."""
    v = np.zeros((2 ** len(bits), 1), dtype=complex)
    v[int(bits, 2) if bits else 0, 0] = 1.0
    return v


def pure(vec) -> np.ndarray:
    """``|v><v|`` for a column (or flat) vector ``vec``."""
    v = np.asarray(vec, dtype=complex).reshape(-1, 1)
    return v @ v.conj().T


def n_qubits(dim: int) -> int:
    """Number of qubits of a ``dim``-dimensional space; error if not a power of two."""
    k = int(dim).bit_length() - 1
    if dim < 1 or 1 << k != dim:
        raise DimensionError(f"{dim} is not a power of two")
    return k


def basis_projector(n: int, i: int, bit: int) -> np.ndarray:
    """The 2^(n-1) x 2^n matrix ``<bit_i|`` removing qubit ``i`` (1-based) of ``n``."""
    if not 1 <= i <= n:
        raise DimensionError(f"qubit index {i} out of range for {n} qubits")
    bra = ket(str(bit)).conj().T
    parts = [identity(2)] * (i - 1) + [bra] + [identity(2)] * (n - i)
    return tensor_all(parts)


def project(rho, i: int, bit: int) -> np.ndarray:
    """``<bit_i| rho |bit_i>``: measure qubit ``i`` and drop it (unnormalised)."""
    rho = _square(rho)
    e = basis_projector(n_qubits(rho.shape[0]), i, bit)
    return e @ rho @ e.conj().T


@dataclass(frozen=True)
class QuantumOp:
    """A quantum operation in operator-sum form ``rho -> sum E rho E^†``."""

    in_dim: int
    out_dim: int
    kraus: tuple = field(default=())

    def __post_init__(self):
        ks = tuple(as_matrix(k) for k in self.kraus)
        for k in ks:
            if k.shape != (self.out_dim, self.in_dim):
                raise DimensionError(
                    f"Kraus matrix {k.shape} does not fit {self.in_dim}->{self.out_dim}"
                )
        object.__setattr__(self, "kraus", ks)

    @classmethod
    def from_kraus(cls, kraus) -> "QuantumOp":
        ks = [as_matrix(k) for k in kraus]
        if not ks:
            raise DimensionError("cannot infer dimensions of an empty Kraus list")
        out_dim, in_dim = ks[0].shape
        return cls(in_dim, out_dim, tuple(ks))

    @classmethod
    def identity(cls, n: int) -> "QuantumOp":
        return cls(n, n, (identity(n),))

    @classmethod
    def unitary(cls, u) -> "QuantumOp":
        u = _square(u)
        return cls(u.shape[0], u.shape[0], (u,))

    @classmethod
    def zero(cls, m: int, n: int) -> "QuantumOp":
        return cls(m, n, ())

    def is_trace_nonincreasing(self, tol: float = DEFAULT_TOL) -> bool:
        return loewner_leq(m_matrix(self), identity(self.in_dim), tol)

    def __call__(self, rho) -> np.ndarray:
        return apply_qo(self, rho)


def apply_qo(e: QuantumOp, rho) -> np.ndarray:
    rho = _square(rho)
    if rho.shape[0] != e.in_dim:
        raise DimensionError(f"state of dimension {rho.shape[0]} fed to a {e.in_dim}-input QO")
    out = np.zeros((e.out_dim, e.out_dim), dtype=complex)
    for k in e.kraus:
        out += k @ rho @ k.conj().T
    return out


def qo_compose(f: QuantumOp, e: QuantumOp) -> QuantumOp:
    """``f ∘ e``: run ``e`` first."""
    if e.out_dim != f.in_dim:
        raise DimensionError(f"cannot compose {e.out_dim}-output with {f.in_dim}-input")
    return QuantumOp(e.in_dim, f.out_dim, tuple(fk @ ek for fk in f.kraus for ek in e.kraus))


def qo_sum(*ops: QuantumOp) -> QuantumOp:
    """Pointwise sum (concatenated Kraus lists); may break the trace condition."""
    first = ops[0]
    for o in ops:
        if (o.in_dim, o.out_dim) != (first.in_dim, first.out_dim):
            raise DimensionError("summands have different dimensions")
    return QuantumOp(first.in_dim, first.out_dim, tuple(k for o in ops for k in o.kraus))


def m_matrix(e: QuantumOp) -> np.ndarray:
    """``M(E) = sum E^† E``; independent of the Kraus representation."""
    out = np.zeros((e.in_dim, e.in_dim), dtype=complex)
    for k in e.kraus:
        out += k.conj().T @ k
    return out


def chain_sup(chain, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Numeric supremum of a Löwner-increasing chain.

    Walks the chain, checking monotonicity, and returns the first element whose
    trace-norm distance to its successor drops below ``tol`` (or the last one).
    For an increasing chain that distance is exactly the trace difference.
    """
    chain = [_square(c) for c in chain]
    if not chain:
        raise ValueError("empty chain")
    for a, b in zip(chain, chain[1:]):
        if not loewner_leq(a, b, tol):
            raise OrderError("chain is not increasing in the Löwner order")
    for a, b in zip(chain, chain[1:]):
        if trace_norm(b - a) < tol:
            return b
    return chain[-1]


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None,
                   trace_value: float | None = None) -> np.ndarray:
    """A random density matrix; handy for tests and fuzzing."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    t = rng.uniform(0.0, 1.0) if trace_value is None else trace_value
    return rho / np.trace(rho).real * t


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_qo(m: int, n: int, rng: np.random.Generator, nkraus: int = 2) -> QuantumOp:
    """A random trace-nonincreasing QO from ``m`` to ``n`` dimensions."""
    ks = [rng.normal(size=(n, m)) + 1j * rng.normal(size=(n, m)) for _ in range(nkraus)]
    s = sum(k.conj().T @ k for k in ks)
    top = np.linalg.eigvalsh(s).max()
    scale = rng.uniform(0.2, 1.0) / np.sqrt(top)
    return QuantumOp(m, n, tuple(k * scale for k in ks))
