"""Hamiltonians and Lindblad generators of the squeezed-vacuum laser construction.

Contents
--------
* the driven three-level Lambda system (interaction picture, explicitly
  time-dependent through the classical drive phases),
* the bilinear effective coupling g (A sigma_+ + A^dag sigma_-) it reduces to,
* the laser rate equation with gain / 4th-order saturation / cavity loss, all
  written in the transformed mode operators,
* the per-atom dissipative step used by the sequential-injection protocol,
* the engineered-reservoir master equation used as a comparison baseline.

Atom bases are atom-major in every joint space (see ``hilbert.tensor``):
three-level ordering |g>=0, |e>=1, |i>=2; the effective two-level space keeps
|g>=0, |e>=1 (the intermediate level is adiabatically eliminated and never
appears there).

All right-hand sides accept and return bare complex ndarrays so integrators
can stay allocation-light; wrap results in DensityMatrix only at boundaries.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .algebra import BogoliubovPair
from .errors import UnphysicalParameterError
from .hilbert import FockSpace, Operator, annihilation, identity, tensor
from .hilbert import _as_matrix

# three-level ordering
LVL_G, LVL_E, LVL_I = 0, 1, 2

#: factor by which each scale separation delta >> Omega >> nbar*lambda must
#: hold before the adiabatic-elimination regime warning fires
REGIME_FACTOR = 5.0


def atom_sigma(r: int, s: int, levels: int = 3) -> Operator:
    """|r><s| on a ``levels``-dimensional atom."""
    m = np.zeros((levels, levels), dtype=complex)
    m[r, s] = 1.0
    return Operator(m, hermitian=(r == s))


@dataclass(frozen=True)
class LambdaSystemParams:
    """Drive/detuning set of the Lambda scheme, in units of the Raman coupling.

    The constructor enforces the constraint set the scheme is engineered
    around: equal Raman couplings, pairwise-balanced drive strengths
    (Omega_g1 = Omega_g2 = -Omega_e1 = -Omega_e2, which cancels the Stark
    shifts of |g> and |e>), matched detunings delta_g1 = delta_g2 =
    delta_e1/kappa = delta_e2/kappa, and cavity detunings Delta_g = delta_e1,
    Delta_e = delta_g1.  Use :meth:`from_detunings` to build a consistent set
    from the four free numbers.
    """

    lambda_g: float
    lambda_e: float
    Omega_g1: float
    Omega_g2: float
    Omega_e1: float
    Omega_e2: float
    delta_g1: float
    delta_g2: float
    delta_e1: float
    delta_e2: float
    Delta_g: float
    Delta_e: float
    # absolute frequencies; gauge choices that drop out of the interaction picture
    omega: float = 0.0
    omega_0: float = 0.0
    omega_i: float = 0.0
    omega_g1: float = field(default=0.0)
    omega_g2: float = field(default=0.0)
    omega_e1: float = field(default=0.0)
    omega_e2: float = field(default=0.0)
    nbar_estimate: float = 1.0

    def __post_init__(self):
        rel = 1e-12 * max(1.0, abs(self.delta_g1))

        def check(name, a, b):
            if abs(a - b) > rel:
                raise UnphysicalParameterError(
                    f"Lambda-scheme constraint violated: {name} ({a!r} != {b!r})")

        check("lambda_g = lambda_e", self.lambda_g, self.lambda_e)
        check("Omega_g1 = Omega_g2", self.Omega_g1, self.Omega_g2)
        check("Omega_g1 = -Omega_e1", self.Omega_g1, -self.Omega_e1)
        check("Omega_g1 = -Omega_e2", self.Omega_g1, -self.Omega_e2)
        check("delta_g1 = delta_g2", self.delta_g1, self.delta_g2)
        check("delta_e1 = delta_e2", self.delta_e1, self.delta_e2)
        check("Delta_g = delta_e1", self.Delta_g, self.delta_e1)
        check("Delta_e = delta_g1", self.Delta_e, self.delta_g1)
        if not 0.0 < self.delta_e1 <= self.delta_g1:
            raise UnphysicalParameterError(
                "need 0 < delta_e1 <= delta_g1 so that kappa = delta_e1/delta_g1 is in (0, 1]")
        if self.kappa >= 1.0:
            raise UnphysicalParameterError("kappa = delta_e1/delta_g1 must be < 1")
        lam = abs(self.lambda_g)
        om = abs(self.Omega_g1)
        if om > 0 and self.delta_e1 < REGIME_FACTOR * om:
            warnings.warn(
                f"adiabatic regime marginal: delta_e1={self.delta_e1} is not >> "
                f"Omega={om}", UserWarning, stacklevel=2)
        if lam > 0 and om > 0 and om < REGIME_FACTOR * self.nbar_estimate * lam:
            warnings.warn(
                f"adiabatic regime marginal: Omega={om} is not >> nbar*lambda="
                f"{self.nbar_estimate * lam}", UserWarning, stacklevel=2)

    @classmethod
    def from_detunings(cls, delta_g1: float, delta_e1: float, Omega: float,
                       lam: float = 1.0, omega: float = 0.0,
                       nbar_estimate: float = 1.0) -> "LambdaSystemParams":
        """Fill the full constrained record from the four free parameters.

        Absolute frequencies are fixed by the gauge omega_ground = 0 and the
        supplied cavity frequency; only detunings enter the interaction-picture
        Hamiltonian.
        """
        omega_i = omega + delta_e1             # Delta_g = omega_i - omega
        omega_0 = delta_g1 + omega_i - omega   # Delta_e = omega_0 + omega - omega_i
        return cls(
            lambda_g=lam, lambda_e=lam,
            Omega_g1=Omega, Omega_g2=Omega, Omega_e1=-Omega, Omega_e2=-Omega,
            delta_g1=delta_g1, delta_g2=delta_g1,
            delta_e1=delta_e1, delta_e2=delta_e1,
            Delta_g=delta_e1, Delta_e=delta_g1,
            omega=omega, omega_0=omega_0, omega_i=omega_i,
            omega_g1=delta_g1 + omega_i, omega_g2=omega_i - delta_g1,
            omega_e1=omega_i - omega_0 - delta_e1, omega_e2=delta_e1 + omega_i - omega_0,
            nbar_estimate=nbar_estimate,
        )

    @property
    def kappa(self) -> float:
        return self.delta_e1 / self.delta_g1

    @property
    def coupling_g(self) -> float:
        """Effective bilinear coupling sqrt(1-kappa^2) * lambda * Omega_g1 / delta_e1."""
        k = self.kappa
        return math.sqrt(1.0 - k * k) * self.lambda_g * self.Omega_g1 / self.delta_e1


@dataclass(frozen=True)
class EffectiveParams:
    """Coupling and mixing angle of the bilinear interaction g(A sigma_+ + A^dag sigma_-)."""

    g: float
    kappa: float

    def __post_init__(self):
        if not 0.0 <= self.kappa < 1.0:
            raise UnphysicalParameterError(f"kappa={self.kappa!r} outside [0, 1)")

    @classmethod
    def from_lambda(cls, params: LambdaSystemParams) -> "EffectiveParams":
        return cls(g=params.coupling_g, kappa=params.kappa)

    @property
    def squeeze_r(self) -> float:
        return math.atanh(self.kappa)


@dataclass(frozen=True)
class LaserRateParams:
    """Gain / saturation / loss coefficients of the laser rate equation.

    ``gain_A = 2 R (g/gamma)^2`` and ``saturation_B = 4 gain_A (g/gamma)^2``
    when derived from the pumping rate R = K p; ``loss_C = omega/Q`` is taken
    directly.  All rates share the time unit of g.
    """

    gain_A: float
    saturation_B: float
    loss_C: float
    pump_R: float
    injection_K: float
    excite_p: float
    gamma: float
    quality_Q: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.excite_p <= 1.0:
            raise UnphysicalParameterError(f"excite_p={self.excite_p!r} outside [0, 1]")
        if min(self.gain_A, self.saturation_B, self.loss_C, self.pump_R,
               self.injection_K, self.gamma) < 0:
            raise UnphysicalParameterError("laser rates must be non-negative")
        if abs(self.pump_R - self.injection_K * self.excite_p) > 1e-9 * max(1.0, self.pump_R):
            raise UnphysicalParameterError("pump_R must equal injection_K * excite_p")

    @classmethod
    def from_pump(cls, pump_R: float, gamma: float, loss_C: float, g: float = 1.0,
                  excite_p: float = 1.0, quality_Q: float | None = None) -> "LaserRateParams":
        gain = 2.0 * pump_R * (g / gamma) ** 2
        return cls(
            gain_A=gain,
            saturation_B=4.0 * gain * (g / gamma) ** 2,
            loss_C=loss_C,
            pump_R=pump_R,
            injection_K=pump_R / excite_p,
            excite_p=excite_p,
            gamma=gamma,
            quality_Q=quality_Q,
        )


@dataclass(frozen=True)
class EngineeredReservoirParams:
    """Rates of the engineered (Gamma, jump A) and residual (Gamma_tilde, jump a) channels."""

    Gamma: float
    Gamma_tilde: float

    def __post_init__(self):
        if self.Gamma <= 0:
            raise UnphysicalParameterError("Gamma must be > 0")
        if self.Gamma_tilde < 0:
            raise UnphysicalParameterError("Gamma_tilde must be >= 0")

    @property
    def regime_ok(self) -> bool:
        """True where the engineered channel clearly dominates (Gamma >> Gamma_tilde)."""
        return self.Gamma_tilde <= 0.2 * self.Gamma


# ---------------------------------------------------------------------------
# Hamiltonians
# ---------------------------------------------------------------------------

def full_hamiltonian_terms(params: LambdaSystemParams,
                           space: FockSpace) -> list[tuple[float, np.ndarray]]:
    """Harmonic decomposition H(t) = sum_j exp(i w_j t) M_j of the Lambda system.

    The list is closed under Hermitian pairing ((-w, M^dag) accompanies every
    (w, M)), so the reconstructed operator is Hermitian at every t.  Frequency
    bookkeeping (interaction picture, drive phases zero at t = 0):

        lambda a sigma_ig  rotates at +Delta_g,
        lambda a sigma_ie  rotates at -Delta_e,
        Omega_g1 sigma_ig  at -delta_g1,  Omega_g2 sigma_ig at +delta_g2,
        Omega_e1 sigma_ie  at +delta_e1,  Omega_e2 sigma_ie at -delta_e2.
    """
    a = annihilation(space).matrix
    eye_f = np.eye(space.dim, dtype=complex)
    sig_ig = atom_sigma(LVL_I, LVL_G).matrix
    sig_ie = atom_sigma(LVL_I, LVL_E).matrix

    half = [
        (+params.Delta_g, params.lambda_g * np.kron(sig_ig, a)),
        (-params.Delta_e, params.lambda_e * np.kron(sig_ie, a)),
        (-params.delta_g1, params.Omega_g1 * np.kron(sig_ig, eye_f)),
        (+params.delta_g2, params.Omega_g2 * np.kron(sig_ig, eye_f)),
        (+params.delta_e1, params.Omega_e1 * np.kron(sig_ie, eye_f)),
        (-params.delta_e2, params.Omega_e2 * np.kron(sig_ie, eye_f)),
    ]
    terms = []
    for w, m in half:
        terms.append((w, m))
        terms.append((-w, m.conj().T))
    return terms


def full_hamiltonian(params: LambdaSystemParams, space: FockSpace, t: float) -> Operator:
    """Interaction-picture Lambda-system Hamiltonian at time t (Hermitian)."""
    d = 3 * space.dim
    h = np.zeros((d, d), dtype=complex)
    for w, m in full_hamiltonian_terms(params, space):
        h += np.exp(1j * w * t) * m
    return Operator(h, hermitian=True)


def effective_hamiltonian(eff: EffectiveParams, pair: BogoliubovPair) -> Operator:
    """g (A sigma_+ + A^dag sigma_-) on the two-level-atom ⊗ field space.

    Commutes with the generalized excitation sigma_+ sigma_- + A^dag A, and
    reduces to the resonant Jaynes-Cummings exchange at kappa = 0.
    """
    sig_p = atom_sigma(LVL_E, LVL_G, levels=2).matrix   # |e><g|
    sig_m = sig_p.conj().T
    h = eff.g * (np.kron(sig_p, pair.A.matrix) + np.kron(sig_m, pair.A_dagger.matrix))
    return Operator(h, hermitian=True)


def generalized_excitation(pair: BogoliubovPair) -> Operator:
    """sigma_+ sigma_- + A^dag A on the joint two-level space (conserved by the coupling)."""
    proj_e = atom_sigma(LVL_E, LVL_E, levels=2)
    n_a = Operator(pair.A_dagger.matrix @ pair.A.matrix)
    return tensor(proj_e, identity(pair.space)) + tensor(identity(2), n_a)


# ---------------------------------------------------------------------------
# Lindblad generators
# ---------------------------------------------------------------------------

def _dissipator(L: np.ndarray, LdL: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """2 L rho L^dag - L^dag L rho - rho L^dag L (rate factored out by the caller)."""
    return 2.0 * (L @ rho @ L.conj().T) - LdL @ rho - rho @ LdL


def laser_generator(rates: LaserRateParams, pair: BogoliubovPair):
    """Right-hand side of the laser rate equation on the field space.

    Gain (rate A/2, jump A^dag), cavity loss (rate C/2, jump A), and the
    saturation correction exactly as derived to 4th order in the coupling:

        L_B rho = (B/2) [ (1/4) AA^dag (AA^dag rho + 3 rho AA^dag)
                        + (1/4) (rho AA^dag + 3 AA^dag rho) AA^dag
                        - A^dag (AA^dag rho + rho AA^dag) A ]

    The printed operator ordering (mixed 1/4, 3/4 weights) is kept verbatim;
    it is trace-free and Hermiticity-preserving but is not completed beyond
    4th order.
    """
    A = pair.A.matrix
    Ad = pair.A_dagger.matrix
    AAd = A @ Ad
    AdA = Ad @ A
    AAd2 = AAd @ AAd
    half_A = 0.5 * rates.gain_A
    half_B = 0.5 * rates.saturation_B
    half_C = 0.5 * rates.loss_C

    def rhs(rho: np.ndarray) -> np.ndarray:
        out = half_A * _dissipator(Ad, AAd, rho)
        out += half_C * _dissipator(A, AdA, rho)
        if half_B != 0.0:
            sym = AAd @ rho + rho @ AAd
            out += half_B * (
                0.25 * (AAd2 @ rho + 3.0 * (AAd @ rho @ AAd))
                + 0.25 * (rho @ AAd2 + 3.0 * (AAd @ rho @ AAd))
                - Ad @ sym @ A
            )
        return out

    return rhs


def laser_rhs(rho, rates: LaserRateParams, pair: BogoliubovPair) -> np.ndarray:
    """Single evaluation of :func:`laser_generator` (field-only density matrix)."""
    return laser_generator(rates, pair)(_as_matrix(rho))


def atom_step_generator(eff: EffectiveParams, loss_C: float, gamma: float,
                        pair: BogoliubovPair):
    """Per-atom joint generator: -i[H_eff, .] + (C/2) D[A_field] + (gamma/2) D[sigma_-].

    Acts on the (two-level atom ⊗ field) space; cavity loss stays on during the
    interaction interval, exactly as the per-atom step is written.
    """
    h = effective_hamiltonian(eff, pair).matrix
    dim_f = pair.space.dim
    eye_f = np.eye(dim_f, dtype=complex)
    A_j = np.kron(np.eye(2, dtype=complex), pair.A.matrix)
    AdA_j = A_j.conj().T @ A_j
    sig_m = np.kron(atom_sigma(LVL_G, LVL_E, levels=2).matrix, eye_f)
    sig_pm = sig_m.conj().T @ sig_m
    half_C = 0.5 * loss_C
    half_g = 0.5 * gamma

    def rhs(rho: np.ndarray) -> np.ndarray:
        out = -1j * (h @ rho - rho @ h)
        if half_C != 0.0:
            out += half_C * _dissipator(A_j, AdA_j, rho)
        if half_g != 0.0:
            out += half_g * _dissipator(sig_m, sig_pm, rho)
        return out

    return rhs


def atom_step_rhs(rho_joint, eff: EffectiveParams, loss_C: float, gamma: float,
                  pair: BogoliubovPair) -> np.ndarray:
    """Single evaluation of :func:`atom_step_generator`."""
    return atom_step_generator(eff, loss_C, gamma, pair)(_as_matrix(rho_joint))


def engineered_reservoir_generator(res: EngineeredReservoirParams, pair: BogoliubovPair):
    """(Gamma/2) D[A] + (Gamma_tilde/2) D[a] on the field space.

    At Gamma_tilde = 0 the kernel state of A is an exact fixed point; the
    residual natural-loss channel degrades its steady-state fidelity roughly
    in proportion to Gamma_tilde/Gamma.
    """
    A = pair.A.matrix
    AdA = pair.A_dagger.matrix @ A
    a = annihilation(pair.space).matrix
    ada = a.conj().T @ a
    half_G = 0.5 * res.Gamma
    half_Gt = 0.5 * res.Gamma_tilde

    def rhs(rho: np.ndarray) -> np.ndarray:
        out = half_G * _dissipator(A, AdA, rho)
        if half_Gt != 0.0:
            out += half_Gt * _dissipator(a, ada, rho)
        return out

    return rhs


def engineered_reservoir_rhs(rho, res: EngineeredReservoirParams,
                             pair: BogoliubovPair) -> np.ndarray:
    """Single evaluation of :func:`engineered_reservoir_generator`."""
    return engineered_reservoir_generator(res, pair)(_as_matrix(rho))
