"""Hilbert-space bookkeeping, operators, density matrices and Liouvillians.

Vectorisation is column-major throughout: ``vec(A X B) = (B.T kron A) vec(X)``,
so ``vec(rho) = rho.reshape(-1, order="F")``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np
import scipy.sparse as sp

HERMITIAN_RTOL = 1e-12
STATE_ATOL = 1e-10
POSITIVITY_ATOL = 1e-8


class SpaceMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class HilbertSpace:
    """Four-level emitter followed by zero, one or two truncated Fock factors."""

    factors: tuple[int, ...]

    def __post_init__(self):
        factors = tuple(int(f) for f in self.factors)
        object.__setattr__(self, "factors", factors)
        if not factors or factors[0] != 4:
            raise ValueError(f"first factor must be the 4-level system, got {factors}")
        if len(factors) > 3:
            raise ValueError(f"at most two cavity factors allowed, got {len(factors) - 1}")
        if any(f < 2 for f in factors[1:]):
            raise ValueError(f"cavity factors need dimension >= 2, got {factors}")

    @property
    def dim(self) -> int:
        return int(np.prod(self.factors))

    @property
    def n_cavities(self) -> int:
        return len(self.factors) - 1

    def identity(self) -> np.ndarray:
        return np.eye(self.dim, dtype=complex)


@dataclass(frozen=True, eq=False)
class Operator:
    space: HilbertSpace
    matrix: np.ndarray
    hermitian: bool = False

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        if m.shape != (self.space.dim, self.space.dim):
            raise SpaceMismatchError(
                f"matrix shape {m.shape} does not match space dimension {self.space.dim}"
            )
        if self.hermitian and not is_hermitian(m):
            raise ValueError("operator flagged Hermitian but max|A - A^dag| exceeds tolerance")

    @property
    def dag(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T, self.hermitian)

    def __matmul__(self, other: "Operator") -> "Operator":
        _same_space(self, other)
        return Operator(self.space, self.matrix @ other.matrix)

    def __add__(self, other: "Operator") -> "Operator":
        _same_space(self, other)
        return Operator(self.space, self.matrix + other.matrix,
                        self.hermitian and other.hermitian)

    def __sub__(self, other: "Operator") -> "Operator":
        _same_space(self, other)
        return Operator(self.space, self.matrix - other.matrix,
                        self.hermitian and other.hermitian)

    def __mul__(self, c) -> "Operator":
        herm = self.hermitian and np.isreal(c)
        return Operator(self.space, c * self.matrix, bool(herm))

    __rmul__ = __mul__

    def __neg__(self) -> "Operator":
        return Operator(self.space, -self.matrix, self.hermitian)


def is_hermitian(m: np.ndarray, rtol: float = HERMITIAN_RTOL) -> bool:
    scale = np.max(np.abs(m)) if m.size else 0.0
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= rtol * max(scale, 1e-300))


def _same_space(*ops):
    spaces = {op.space for op in ops}
    if len(spaces) > 1:
        raise SpaceMismatchError(f"operators live on different spaces: {spaces}")


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, positive operator on a composite space.

    Construction validates the invariants unless ``check=False``.
    """

    space: HilbertSpace
    matrix: np.ndarray
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        if m.shape != (self.space.dim, self.space.dim):
            raise SpaceMismatchError(
                f"matrix shape {m.shape} does not match space dimension {self.space.dim}"
            )
        if self.check:
            herm = hermiticity_error(m)
            if herm > STATE_ATOL:
                raise ValueError(f"density matrix not Hermitian (max|rho - rho^dag| = {herm:.3g})")
            tr = abs(np.trace(m) - 1.0)
            if tr > STATE_ATOL:
                raise ValueError(f"density matrix trace deviates from 1 by {tr:.3g}")
            lam = min_eigenvalue(m)
            if lam < -POSITIVITY_ATOL:
                raise ValueError(f"density matrix has negative eigenvalue {lam:.3g}")

    @classmethod
    def from_vector(cls, space: HilbertSpace, vec: np.ndarray, check: bool = True):
        return cls(space, unvec(vec, space.dim), check=check)

    @property
    def vec(self) -> np.ndarray:
        return vec(self.matrix)

    def expect(self, op: Operator | np.ndarray) -> complex:
        m = op.matrix if isinstance(op, Operator) else op
        return complex(np.trace(m @ self.matrix))


def hermiticity_error(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.conj().T), initial=0.0))


def min_eigenvalue(m: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])


def vec(m: np.ndarray) -> np.ndarray:
    return np.asarray(m).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v).reshape(dim, dim, order="F")


def basis_projector(i: int, j: int, dim: int = 4) -> np.ndarray:
    """|i><j| with 1-based level labels, matching sigma_ij."""
    m = np.zeros((dim, dim), dtype=complex)
    m[i - 1, j - 1] = 1.0
    return m


def annihilation(n_max: int) -> np.ndarray:
    """Truncated ladder operator on ``n_max + 1`` Fock states, a[n-1, n] = sqrt(n)."""
    if int(n_max) != n_max or n_max < 1:
        raise ValueError(f"photon cutoff must be an integer >= 1, got {n_max}")
    return np.diag(np.sqrt(np.arange(1, n_max + 1)), 1).astype(complex)


def embed(op: np.ndarray | Operator, which_factor: int, space: HilbertSpace) -> Operator:
    """Return I x ... x op x ... x I in the factor ordering of ``space``."""
    m = op.matrix if isinstance(op, Operator) else np.asarray(op, dtype=complex)
    if not 0 <= which_factor < len(space.factors):
        raise IndexError(f"factor index {which_factor} out of range for {space.factors}")
    d = space.factors[which_factor]
    if m.shape != (d, d):
        raise SpaceMismatchError(
            f"operator of shape {m.shape} cannot act on factor {which_factor} of dimension {d}"
        )
    mats = [np.eye(f, dtype=complex) for f in space.factors]
    mats[which_factor] = m
    return Operator(space, reduce(np.kron, mats))


def ptrace_emitter(rho: np.ndarray, space: HilbertSpace) -> np.ndarray:
    """Trace out every cavity factor, leaving the 4x4 emitter state."""
    rest = space.dim // 4
    return np.einsum("ikjk->ij", np.asarray(rho).reshape(4, rest, 4, rest))


def vacuum_state(emitter: np.ndarray, space: HilbertSpace) -> DensityMatrix:
    """Emitter state (4x4) tensored with the vacuum of every cavity mode."""
    rest = space.dim // 4
    vac = np.zeros((rest, rest), dtype=complex)
    vac[0, 0] = 1.0
    return DensityMatrix(space, np.kron(np.asarray(emitter, dtype=complex), vac))


# --- superoperators ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Superoperator:
    """Generator acting on column-vectorised operators (stored sparse, CSR)."""

    space: HilbertSpace
    matrix: sp.csr_matrix

    def __post_init__(self):
        object.__setattr__(self, "matrix", sp.csr_matrix(self.matrix, dtype=complex))
        n = self.space.dim ** 2
        if self.matrix.shape != (n, n):
            raise SpaceMismatchError(f"superoperator shape {self.matrix.shape} != ({n}, {n})")

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(rho), self.space.dim)

    def __add__(self, other: "Superoperator") -> "Superoperator":
        if other.space != self.space:
            raise SpaceMismatchError("superoperators live on different spaces")
        return Superoperator(self.space, self.matrix + other.matrix)

    def __mul__(self, c) -> "Superoperator":
        return Superoperator(self.space, self.matrix * c)

    __rmul__ = __mul__


Channel = tuple[float, Operator]


def _spkron(a, b):
    return sp.kron(sp.csr_matrix(a), sp.csr_matrix(b), format="csr")


def commutator_superop(h: np.ndarray) -> sp.csr_matrix:
    """Matrix of rho -> -i[h, rho]."""
    d = h.shape[0]
    eye = sp.identity(d, dtype=complex, format="csr")
    return -1j * (_spkron(eye, h) - _spkron(h.T, eye))


def dissipator_superop(rate: float, o: np.ndarray) -> sp.csr_matrix:
    """Matrix of rho -> (rate/2) (2 O rho O^dag - {O^dag O, rho})."""
    d = o.shape[0]
    eye = sp.identity(d, dtype=complex, format="csr")
    odo = o.conj().T @ o
    return rate * (_spkron(o.conj(), o) - 0.5 * _spkron(eye, odo) - 0.5 * _spkron(odo.T, eye))


def liouvillian(h: Operator, collapse_ops: Sequence[Channel] = ()) -> Superoperator:
    """Lindblad generator; a channel ``(r, O)`` adds ``(r/2) L_O`` with r the population rate."""
    if not is_hermitian(h.matrix):
        raise ValueError("Hamiltonian is not Hermitian")
    mat = commutator_superop(h.matrix)
    for rate, o in collapse_ops:
        if o.space != h.space:
            raise SpaceMismatchError("collapse operator lives on a different space")
        if rate < 0:
            raise ValueError(f"negative channel rate {rate}")
        if rate:
            mat = mat + dissipator_superop(rate, o.matrix)
    return Superoperator(h.space, mat)


def lindblad_rhs(h: np.ndarray, channels: Sequence[tuple[float, np.ndarray]],
                 rho: np.ndarray) -> np.ndarray:
    """Directly assembled master-equation right-hand side (no vectorisation)."""
    out = -1j * (h @ rho - rho @ h)
    for rate, o in channels:
        od = o.conj().T
        out = out + 0.5 * rate * (2 * o @ rho @ od - od @ o @ rho - rho @ od @ o)
    return out


def trace_functional(dim: int) -> np.ndarray:
    """Row vector t with t . vec(rho) = Tr(rho)."""
    return vec(np.eye(dim, dtype=complex))
