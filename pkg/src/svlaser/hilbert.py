"""Truncated-Fock-space linear algebra: operators, states, tensor products, partial traces.

Everything is dense ``complex128``.  The truncation dimension is small enough
(dims <= a few hundred) that dense BLAS beats any sparse bookkeeping, and the
truncation edge stays observable through explicit tail monitors.

Conventions
-----------
* Fock levels run ``|0> .. |dim-1>``.
* Composite spaces are atom-major: ``tensor(atom_op, field_op)`` maps the pair
  ``(i_atom, n_field)`` to the flat index ``i_atom * dim_field + n_field``.
* The squeeze operator is ``S(xi) = expm((conj(xi) a^2 - xi a^dag^2) / 2)`` with
  ``xi = r e^{i phi}``, so ``S(r)|0>`` has quadrature variances ``e^{-2r}/4``
  and ``e^{+2r}/4`` and mean occupation ``sinh^2 r``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm as _expm

from .errors import (
    InvalidSpaceError,
    NumericDomainError,
    ShapeMismatchError,
    StateValidationError,
    TruncationWarning,
)

# Validation tolerances (absolute).
HERMITIAN_OP_TOL = 1e-12
STATE_NORM_TOL = 1e-10
TRACE_TOL = 1e-8
HERMITIAN_STATE_TOL = 1e-10
POSITIVITY_TOL = 1e-8

# Population allowed in the top 10% of Fock levels before a run is declared
# truncation-limited.
TAIL_FRACTION = 0.1
TAIL_TOL = 1e-6


@dataclass(frozen=True)
class FockSpace:
    """A bosonic mode truncated to the lowest ``dim`` number states."""

    dim: int

    def __post_init__(self):
        if not isinstance(self.dim, (int, np.integer)) or self.dim < 2:
            raise InvalidSpaceError(f"Fock space needs dim >= 2, got {self.dim!r}")

    def levels(self) -> np.ndarray:
        return np.arange(self.dim)


def _as_matrix(obj) -> np.ndarray:
    """Accept an Operator, DensityMatrix, or bare ndarray and return the ndarray."""
    m = getattr(obj, "matrix", obj)
    return np.asarray(m, dtype=complex)


class Operator:
    """A dense operator on one (possibly composite) truncated space.

    ``hermitian=True`` is a promise checked at construction (within 1e-12).
    Instances are immutable and safe to share across threads.
    """

    __slots__ = ("matrix", "hermitian")

    def __init__(self, matrix, hermitian: bool = False):
        m = np.array(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ShapeMismatchError(f"operator must be square, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise NumericDomainError("operator entries must be finite")
        if hermitian and np.max(np.abs(m - m.conj().T)) > HERMITIAN_OP_TOL:
            raise StateValidationError(
                "operator flagged hermitian deviates from M = M^dag beyond 1e-12"
            )
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "hermitian", bool(hermitian))

    def __setattr__(self, name, value):
        raise AttributeError("Operator is immutable")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    # space_dim is the contract-level name for the carrier dimension
    space_dim = dim

    def dag(self) -> "Operator":
        return Operator(self.matrix.conj().T, hermitian=self.hermitian)

    def __matmul__(self, other):
        o = _as_matrix(other)
        if o.shape[0] != self.dim:
            raise ShapeMismatchError("operator dimensions do not match")
        if isinstance(other, Operator):
            return Operator(self.matrix @ o)
        return self.matrix @ o

    def __add__(self, other) -> "Operator":
        return Operator(self.matrix + _as_matrix(other))

    def __sub__(self, other) -> "Operator":
        return Operator(self.matrix - _as_matrix(other))

    def __mul__(self, scalar) -> "Operator":
        return Operator(self.matrix * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "Operator":
        return Operator(-self.matrix)

    def __repr__(self):
        return f"Operator(dim={self.dim}, hermitian={self.hermitian})"


class StateVector:
    """A normalized pure state. Euclidean norm must be 1 within 1e-10."""

    __slots__ = ("amplitudes",)

    def __init__(self, amplitudes, normalize: bool = False):
        v = np.array(amplitudes, dtype=complex).ravel()
        if not np.all(np.isfinite(v)):
            raise NumericDomainError("state amplitudes must be finite")
        nrm = np.linalg.norm(v)
        if normalize:
            if nrm == 0.0:
                raise StateValidationError("cannot normalize the zero vector")
            v = v / nrm
        elif abs(nrm - 1.0) > STATE_NORM_TOL:
            raise StateValidationError(f"state norm {nrm!r} deviates from 1 beyond 1e-10")
        v.setflags(write=False)
        object.__setattr__(self, "amplitudes", v)

    def __setattr__(self, name, value):
        raise AttributeError("StateVector is immutable")

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    space_dim = dim

    def overlap(self, other: "StateVector") -> complex:
        return np.vdot(self.amplitudes, other.amplitudes)

    def to_density_matrix(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))

    def __repr__(self):
        return f"StateVector(dim={self.dim})"


class DensityMatrix:
    """A mixed state: unit trace (1e-8), Hermitian (1e-10), eigenvalues >= -1e-8."""

    __slots__ = ("matrix",)

    def __init__(self, matrix, check_positivity: bool = True):
        m = np.array(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ShapeMismatchError(f"density matrix must be square, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise NumericDomainError("density-matrix entries must be finite")
        tr = np.trace(m)
        if abs(tr - 1.0) > TRACE_TOL:
            raise StateValidationError(f"trace {tr!r} deviates from 1 beyond 1e-8")
        if np.max(np.abs(m - m.conj().T)) > HERMITIAN_STATE_TOL:
            raise StateValidationError("density matrix deviates from Hermiticity beyond 1e-10")
        if check_positivity:
            evals = np.linalg.eigvalsh((m + m.conj().T) / 2.0)
            if evals[0] < -POSITIVITY_TOL:
                raise StateValidationError(
                    f"minimum eigenvalue {evals[0]:.3e} below positivity tolerance -1e-8"
                )
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __setattr__(self, name, value):
        raise AttributeError("DensityMatrix is immutable")

    @classmethod
    def from_pure(cls, psi: StateVector) -> "DensityMatrix":
        return psi.to_density_matrix()

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    space_dim = dim

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim})"


# ---------------------------------------------------------------------------
# operator zoo
# ---------------------------------------------------------------------------

def identity(space: FockSpace | int) -> Operator:
    dim = space.dim if isinstance(space, FockSpace) else int(space)
    return Operator(np.eye(dim, dtype=complex), hermitian=True)


def annihilation(space: FockSpace) -> Operator:
    """Ladder-down operator: <n-1| a |n> = sqrt(n) on the superdiagonal."""
    n = np.sqrt(np.arange(1, space.dim, dtype=float))
    return Operator(np.diag(n, k=1))


def creation(space: FockSpace) -> Operator:
    return annihilation(space).dag()


def number(space: FockSpace) -> Operator:
    return Operator(np.diag(np.arange(space.dim, dtype=float)), hermitian=True)


def parity(space: FockSpace) -> Operator:
    """exp(i pi a^dag a): diagonal (+1, -1, +1, ...)."""
    return Operator(np.diag((-1.0) ** np.arange(space.dim)), hermitian=True)


def fock_state(space: FockSpace, n: int) -> StateVector:
    if not 0 <= n < space.dim:
        raise ShapeMismatchError(f"Fock level {n} outside 0..{space.dim - 1}")
    v = np.zeros(space.dim, dtype=complex)
    v[n] = 1.0
    return StateVector(v)


def vacuum_state(space: FockSpace) -> StateVector:
    return fock_state(space, 0)


def commutator(x, y) -> Operator:
    xm, ym = _as_matrix(x), _as_matrix(y)
    return Operator(xm @ ym - ym @ xm)


def matrix_exponential(op) -> Operator:
    """Dense expm via scaling-and-squaring; ~1e-10 relative for well-conditioned input."""
    m = _as_matrix(op)
    if not np.all(np.isfinite(m)):
        raise NumericDomainError("matrix exponential of non-finite input")
    return Operator(_expm(m))


def displacement(space: FockSpace, alpha: complex) -> Operator:
    """D(alpha) = expm(alpha a^dag - conj(alpha) a).

    Soft bound: |alpha|^2 << dim, otherwise the displaced vacuum leaks into the
    truncation edge (a warning is emitted past tail population 1e-8).
    """
    a = annihilation(space).matrix
    d = _expm(alpha * a.conj().T - np.conj(alpha) * a)
    _warn_on_tail(d[:, 0], space.dim, f"displacement(alpha={alpha!r})")
    return Operator(d)


def squeeze(space: FockSpace, xi: complex) -> Operator:
    """S(xi) = expm((conj(xi) a^2 - xi a^dag^2) / 2) with xi = r e^{i phi}.

    Soft bound: e^{2|xi|} << dim. S(r)|0> has <a^dag a> = sinh^2 r and
    quadrature variances (e^{-2r}/4, e^{+2r}/4).
    """
    a = annihilation(space).matrix
    a2 = a @ a
    s = _expm((np.conj(xi) * a2 - xi * a2.conj().T) / 2.0)
    _warn_on_tail(s[:, 0], space.dim, f"squeeze(xi={xi!r})")
    return Operator(s)


def _warn_on_tail(column0: np.ndarray, dim: int, what: str, tol: float = 1e-8):
    cut = dim - max(1, int(np.ceil(TAIL_FRACTION * dim)))
    tail = float(np.sum(np.abs(column0[cut:]) ** 2))
    if tail > tol:
        warnings.warn(
            f"{what}: vacuum image keeps {tail:.2e} population in the top 10% of "
            f"levels (dim={dim}); increase the truncation dimension",
            TruncationWarning,
            stacklevel=3,
        )


def evolve_step(H, state, dt: float):
    """One exact exponential step exp(-i H dt) on a StateVector or DensityMatrix."""
    u = _expm(-1j * dt * _as_matrix(H))
    if isinstance(state, StateVector):
        return StateVector(u @ state.amplitudes)
    if isinstance(state, DensityMatrix):
        return DensityMatrix(u @ state.matrix @ u.conj().T)
    s = np.asarray(state, dtype=complex)
    if s.ndim == 1:
        return u @ s
    return u @ s @ u.conj().T


# ---------------------------------------------------------------------------
# composite spaces
# ---------------------------------------------------------------------------

def tensor(left, right) -> Operator:
    """Kronecker product, atom-major: index = i_left * dim_right + i_right."""
    lm, rm = _as_matrix(left), _as_matrix(right)
    herm = (
        isinstance(left, Operator) and left.hermitian
        and isinstance(right, Operator) and right.hermitian
    )
    return Operator(np.kron(lm, rm), hermitian=herm)


def tensor_state(left: StateVector, right: StateVector) -> StateVector:
    return StateVector(np.kron(left.amplitudes, right.amplitudes))


def _ptrace(rho: np.ndarray, d_left: int, d_right: int, over: str) -> np.ndarray:
    r = rho.reshape(d_left, d_right, d_left, d_right)
    if over in ("atom", "left"):
        return np.einsum("ajak->jk", r)
    if over in ("field", "right"):
        return np.einsum("ajbj->ab", r)
    raise ValueError(f"unknown subsystem tag {over!r}; use 'atom'/'left' or 'field'/'right'")


def partial_trace(rho, dims: tuple[int, int], over: str) -> DensityMatrix:
    """Trace a bipartite state down to one factor; trace is preserved exactly.

    ``dims = (d_atom, d_field)`` in the atom-major convention of :func:`tensor`;
    ``over`` names the subsystem that is traced out.
    """
    m = _as_matrix(rho)
    d_left, d_right = dims
    if m.shape[0] != d_left * d_right:
        raise ShapeMismatchError(
            f"state dim {m.shape[0]} != d_atom*d_field = {d_left * d_right}"
        )
    return DensityMatrix(_ptrace(m, d_left, d_right, over))


# ---------------------------------------------------------------------------
# truncation monitoring
# ---------------------------------------------------------------------------

def tail_population(state, fraction: float = TAIL_FRACTION) -> float:
    """Population in the top ``fraction`` of Fock levels of a single-mode state."""
    if isinstance(state, StateVector):
        p = np.abs(state.amplitudes) ** 2
    else:
        p = np.real(np.diag(_as_matrix(state)))
    dim = p.shape[0]
    cut = dim - max(1, int(np.ceil(fraction * dim)))
    return float(np.sum(p[cut:]))


def field_tail_population(rho_joint, d_atom: int, d_field: int,
                          fraction: float = TAIL_FRACTION) -> float:
    """Tail population of the field factor of an (atom ⊗ field) joint state."""
    m = _as_matrix(rho_joint)
    field = _ptrace(m, d_atom, d_field, "atom")
    p = np.real(np.diag(field))
    cut = d_field - max(1, int(np.ceil(fraction * d_field)))
    return float(np.sum(p[cut:]))
