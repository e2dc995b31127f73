"""Measured quantities: excitations, quadratures, photon statistics, fidelity, Wigner.

All functions accept a DensityMatrix, StateVector, or bare ndarray (vector or
matrix) and treat it as the state of one field mode unless noted.  Quadratures
follow X1 = (a^dag + a)/2, X2 = (a - a^dag)/2i, so the vacuum variances are
(1/4, 1/4) and squeezing by r gives (e^{-2r}/4, e^{+2r}/4).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ShapeMismatchError, TruncationWarning, UndefinedStatisticError
from .hilbert import (
    FockSpace,
    StateVector,
    _as_matrix,
    annihilation,
    squeeze,
    tail_population,
)

#: mean occupation below which Mandel Q is reported as undefined
MANDEL_MIN_N = 1e-12


def _rho(state) -> np.ndarray:
    """Coerce a StateVector / DensityMatrix / ndarray into a density matrix."""
    if isinstance(state, StateVector):
        v = state.amplitudes
        return np.outer(v, v.conj())
    m = np.asarray(_as_matrix(state), dtype=complex)
    if m.ndim == 1:
        return np.outer(m, m.conj())
    return m


def expectation(state, obs) -> complex:
    """Tr(rho * obs); real within 1e-10 for Hermitian observables."""
    r = _rho(state)
    o = _as_matrix(obs)
    if o.shape[0] != r.shape[0]:
        raise ShapeMismatchError(
            f"observable dim {o.shape[0]} does not match state dim {r.shape[0]}")
    # trace of the product without forming it
    return complex(np.sum(r.T * o))


@lru_cache(maxsize=32)
def _field_ops(dim: int):
    a = annihilation(FockSpace(dim)).matrix
    n = a.conj().T @ a
    x1 = (a.conj().T + a) / 2.0
    x2 = (a - a.conj().T) / 2.0j
    return a, n, n @ n, x1, x1 @ x1, x2, x2 @ x2


def mean_photon_number(state) -> float:
    r = _rho(state)
    _, n, _, _, _, _, _ = _field_ops(r.shape[0])
    return float(np.real(np.sum(r.T * n)))


def quadrature_variances(state) -> tuple[float, float]:
    """(Var X1, Var X2) of the field state."""
    r = _rho(state)
    _, _, _, x1, x1sq, x2, x2sq = _field_ops(r.shape[0])
    m1 = np.real(np.sum(r.T * x1))
    m2 = np.real(np.sum(r.T * x2))
    v1 = np.real(np.sum(r.T * x1sq)) - m1 * m1
    v2 = np.real(np.sum(r.T * x2sq)) - m2 * m2
    return float(v1), float(v2)


def photon_distribution(state) -> np.ndarray:
    """Diagonal of rho in the Fock basis; sums to 1 within 1e-8 for valid states."""
    return np.real(np.diag(_rho(state))).copy()


def mandel_q(state) -> float:
    """(Var n)/<n> - 1: zero for Poissonian light, -1 for a Fock state."""
    r = _rho(state)
    _, n, nsq, _, _, _, _ = _field_ops(r.shape[0])
    mean = float(np.real(np.sum(r.T * n)))
    if mean <= MANDEL_MIN_N:
        raise UndefinedStatisticError(
            f"Mandel Q undefined at <n> = {mean:.3e} (needs <n> > 0)")
    var = float(np.real(np.sum(r.T * nsq))) - mean * mean
    return var / mean - 1.0


@lru_cache(maxsize=32)
def squeezed_vacuum_vector(dim: int, r: float) -> np.ndarray:
    """S(r)|0> amplitudes (real), cached per (dim, r)."""
    v = squeeze(FockSpace(dim), r).matrix[:, 0].copy()
    v.setflags(write=False)
    return v


def fidelity_to_state(state, psi: np.ndarray) -> float:
    """<psi| rho |psi> for a pure reference state."""
    r = _rho(state)
    if psi.shape[0] != r.shape[0]:
        raise ShapeMismatchError("reference state dim does not match")
    return float(np.real(psi.conj() @ r @ psi))


def fidelity_to_squeezed_vacuum(state, r: float) -> float:
    """Overlap of the state with the ideal squeezed vacuum of degree r.

    For the vacuum input this equals 1/cosh(r); for rho = S(r)|0><0|S^dag(r)
    it is 1 up to truncation noise.
    """
    rho = _rho(state)
    return fidelity_to_state(rho, squeezed_vacuum_vector(rho.shape[0], float(r)))


def coherence_elements(state, pairs) -> dict[tuple[int, int], complex]:
    """Selected Fock-basis matrix elements rho_{i,j}."""
    r = _rho(state)
    out = {}
    for i, j in pairs:
        if not (0 <= i < r.shape[0] and 0 <= j < r.shape[0]):
            raise ShapeMismatchError(f"index pair ({i}, {j}) outside dim {r.shape[0]}")
        out[(i, j)] = complex(r[i, j])
    return out


# ---------------------------------------------------------------------------
# Wigner function
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WignerGrid:
    """W(x + i p) sampled on a rectangular phase-space grid.

    ``values[ix, ip]`` is W at alpha = x[ix] + 1j * p[ip]; with the X1/X2
    quadrature convention above, the x-marginal of W is the X1 distribution.
    """

    x: np.ndarray
    p: np.ndarray
    values: np.ndarray

    def integral(self) -> float:
        dx = self.x[1] - self.x[0]
        dp = self.p[1] - self.p[0]
        return float(np.sum(self.values) * dx * dp)

    def marginal_x(self) -> np.ndarray:
        dp = self.p[1] - self.p[0]
        return np.sum(self.values, axis=1) * dp

    def marginal_variance_x(self) -> float:
        dx = self.x[1] - self.x[0]
        px = self.marginal_x()
        norm = np.sum(px) * dx
        mean = np.sum(self.x * px) * dx / norm
        return float(np.sum((self.x - mean) ** 2 * px) * dx / norm)


@lru_cache(maxsize=8)
def _displacement_eig(dim: int):
    # a^dag - a is anti-Hermitian: i(a^dag - a) = V diag(w) V^dag with real w,
    # so exp(r(a^dag - a)) = V diag(exp(-i r w)) V^dag for any radius r
    a = annihilation(FockSpace(dim)).matrix
    w, v = np.linalg.eigh(1j * (a.conj().T - a))
    return w, v, v.conj().T


def wigner(state, half_width: float = 3.0, points: int = 121) -> WignerGrid:
    """Displaced-parity Wigner function W(alpha) = (2/pi) Tr[rho D(alpha) P D^dag(alpha)].

    Evaluated exactly at the truncation level via the eigendecomposition of
    the displacement generator (no characteristic-function transform, hence no
    grid artifacts).  Emits a truncation warning when the grid corners push
    the displaced state toward the edge of the Fock space.
    """
    rho = _rho(state)
    dim = rho.shape[0]
    _, n_op, nsq, _, _, _, _ = _field_ops(dim)
    mean_n = float(np.real(np.sum(rho.T * n_op)))
    var_n = max(float(np.real(np.sum(rho.T * nsq))) - mean_n ** 2, 0.0)
    corner = 2.0 * half_width ** 2  # |alpha_max|^2 at the grid corner
    # the displaced state at the corner needs |alpha|^2 + ~3|alpha| levels on
    # top of the state's own support to stay clear of the truncation edge
    need = corner + 3.0 * np.sqrt(corner) + mean_n + 3.0 * np.sqrt(var_n)
    if need > 0.9 * dim or tail_population(rho) > 1e-8:
        warnings.warn(
            "Wigner grid extends close to or beyond the reliable Fock support; "
            "increase the truncation dimension or shrink the grid",
            TruncationWarning, stacklevel=2)

    # spectral weights of rho (drop numerically empty components)
    evals, evecs = np.linalg.eigh((rho + rho.conj().T) / 2.0)
    keep = evals > 1e-14
    weights = evals[keep]
    cols = evecs[:, keep] * np.sqrt(weights)

    w, v, vh = _displacement_eig(dim)
    parity = (-1.0) ** np.arange(dim)
    xs = np.linspace(-half_width, half_width, points)
    ps = np.linspace(-half_width, half_width, points)
    out = np.empty((points, points), dtype=float)
    levels = np.arange(dim)
    for ix, xv in enumerate(xs):
        for ip, pv in enumerate(ps):
            r = np.hypot(xv, pv)
            phi = np.arctan2(pv, xv)
            # D^dag(alpha) u = R(phi) V diag(e^{+i r w}) V^dag R(-phi) u; the
            # leading R(phi) is a pure per-level phase and drops from |.|^2
            m = vh @ (np.exp(-1j * phi * levels)[:, None] * cols)
            m = v @ (np.exp(1j * r * w)[:, None] * m)
            out[ix, ip] = np.sum(parity @ (np.abs(m) ** 2))
    return WignerGrid(x=xs, p=ps, values=(2.0 / np.pi) * out)


# ---------------------------------------------------------------------------
# observer factories for the dynamics engines
# ---------------------------------------------------------------------------

def field_observers(dim: int, fidelity_r: float | None = None,
                    coherences=((0, 8), (4, 6))) -> dict:
    """Standard observer set for field-only density-matrix evolutions."""
    _, n, nsq, x1, x1sq, x2, x2sq = _field_ops(dim)

    def tr(op):
        return lambda rho: float(np.real(np.sum(rho.T * op)))

    obs = {
        "mean_photon_number": tr(n),
        "mean_photon_number_sq": tr(nsq),
        "var_x1": lambda rho: float(np.real(np.sum(rho.T * x1sq))
                                    - np.real(np.sum(rho.T * x1)) ** 2),
        "var_x2": lambda rho: float(np.real(np.sum(rho.T * x2sq))
                                    - np.real(np.sum(rho.T * x2)) ** 2),
        "tail_population": lambda rho: tail_population(rho),
    }
    if fidelity_r is not None:
        sv = squeezed_vacuum_vector(dim, float(fidelity_r))
        obs["fidelity_squeezed_vacuum"] = lambda rho: float(np.real(sv.conj() @ rho @ sv))
    for (i, j) in coherences or ():
        obs[f"coherence_{i}{j}_abs"] = (lambda rho, i=i, j=j: float(abs(rho[i, j])))
    return obs


def joint_pure_observers(n_atom_levels: int, dim: int, excited_level: int = 1) -> dict:
    """Observer set for pure states on an (atom ⊗ field) space."""
    _, n, _, x1, x1sq, x2, x2sq = _field_ops(dim)
    eye_a = np.eye(n_atom_levels, dtype=complex)
    proj_e = np.zeros((n_atom_levels, n_atom_levels), dtype=complex)
    proj_e[excited_level, excited_level] = 1.0

    def lift(op):
        return np.kron(eye_a, op)

    nn, xx1, xx1s, xx2, xx2s = lift(n), lift(x1), lift(x1sq), lift(x2), lift(x2sq)
    ee = np.kron(proj_e, np.eye(dim, dtype=complex))
    tail = np.zeros(dim)
    tail[dim - max(1, int(np.ceil(0.1 * dim))):] = 1.0
    tt = lift(np.diag(tail))

    def ev(op):
        return lambda psi: float(np.real(psi.conj() @ (op @ psi)))

    return {
        "mean_photon_number": ev(nn),
        "excited_population": ev(ee),
        "var_x1": lambda psi: float(np.real(psi.conj() @ (xx1s @ psi))
                                    - np.real(psi.conj() @ (xx1 @ psi)) ** 2),
        "var_x2": lambda psi: float(np.real(psi.conj() @ (xx2s @ psi))
                                    - np.real(psi.conj() @ (xx2 @ psi)) ** 2),
        "tail_population": ev(tt),
    }
