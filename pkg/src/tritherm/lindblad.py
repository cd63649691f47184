"""Liouvillian construction, time evolution, and steady states.

The master equation is integrated in a rotating frame (see
``CompositeOperators.h_static``) with superoperators acting on row-major
vectorized density matrices: vec(rho)[i*dim + j] = rho[i, j], so that
vec(A rho B) = (A kron B^T) vec(rho).

Six thermal jump operators are used: raising and lowering on the g-e and
e-f transmon transitions and on the resonator.  A direct f-g channel is
forbidden by selection rules and never constructed; the fourth retained
transmon level carries no explicit rate and thermalizes only through the
coupling to the lossy resonator.  An optional pure-dephasing channel is
exposed for robustness experiments and is off by default.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .constants import bose_occupation, boltzmann_exponent, rate_from_mhz, kappa_rate_from_mhz
from .hilbert import CompositeOperators, LevelEnergies, validate_density_matrix


class SteadyStateError(RuntimeError):
    """Null space of the Liouvillian is degenerate or the residual is large."""


class IntegrationError(RuntimeError):
    """Adaptive integration failed or violated state invariants."""


@dataclass(frozen=True)
class DissipationSpec:
    """Dissipation rates and bath temperature.

    ``gamma_eg_mhz`` is the zero-temperature e->g relaxation rate 1/T1 in
    MHz (likewise ``gamma_fe_mhz`` for f->e); ``kappa_mhz`` is the resonator
    linewidth kappa/(2 pi) in MHz, or None to derive it from the resonator's
    loaded Q.  ``gamma_phi_mhz`` adds pure dephasing when nonzero.
    """

    gamma_eg_mhz: float
    gamma_fe_mhz: float
    bath_t_mk: float
    kappa_mhz: Optional[float] = None
    gamma_phi_mhz: float = 0.0

    def __post_init__(self):
        for g in (self.gamma_eg_mhz, self.gamma_fe_mhz, self.gamma_phi_mhz):
            if g < 0:
                raise ValueError("rates must be non-negative")
        if self.kappa_mhz is not None and self.kappa_mhz < 0:
            raise ValueError("kappa_mhz must be non-negative")
        if self.bath_t_mk <= 0:
            raise ValueError("bath_t_mk must be positive")

    def resolved_kappa_mhz(self, fr_ghz: float, q_loaded: float) -> float:
        """Linewidth in MHz, derived from Q when not set explicitly.

        When both kappa_mhz and q_loaded are given they must agree within 1%.
        """
        derived = 1e3 * fr_ghz / q_loaded
        if self.kappa_mhz is None:
            return derived
        if abs(self.kappa_mhz - derived) > 0.01 * derived:
            raise ValueError(
                f"kappa_mhz={self.kappa_mhz} inconsistent with "
                f"f_r/Q = {derived:.4f} MHz (must agree within 1%)"
            )
        return self.kappa_mhz


@dataclass(frozen=True)
class ThermalOccupations:
    """Bose-Einstein occupations for the two transmon transitions and the
    resonator at the bath temperature."""

    n_eg: float
    n_fe: float
    n_r: float

    def __post_init__(self):
        for n in (self.n_eg, self.n_fe, self.n_r):
            if n < 0:
                raise ValueError("thermal occupations must be non-negative")


def thermal_occupations(levels: LevelEnergies, fr_ghz: float, t_mk: float) -> ThermalOccupations:
    """n = 1/(exp(h f / k_B T) - 1) per transition and for the resonator.

    The detailed-balance identity n + 1 = n exp(h f / k_B T) is checked to
    1e-12 relative on each occupation.
    """
    occ = ThermalOccupations(
        n_eg=bose_occupation(levels.f_ge_ghz, t_mk),
        n_fe=bose_occupation(levels.f_ef_ghz, t_mk),
        n_r=bose_occupation(fr_ghz, t_mk),
    )
    for n, f in ((occ.n_eg, levels.f_ge_ghz), (occ.n_fe, levels.f_ef_ghz), (occ.n_r, fr_ghz)):
        if n == 0.0:  # deep quantum regime, identity holds in the limit
            continue
        lhs, rhs = n + 1.0, n * np.exp(boltzmann_exponent(f, t_mk))
        if abs(lhs - rhs) > 1e-12 * lhs:
            raise AssertionError("detailed-balance identity violated")
    return occ


def unit_superoperator(op: np.ndarray) -> sp.csr_matrix:
    """Commutator superoperator -i 2 pi (H kron I - I kron H^T) for a
    Hamiltonian given in GHz, acting on row-major vec(rho), time in ns."""
    eye = sp.identity(op.shape[0], format="csr")
    h = sp.csr_matrix(op)
    return (-2j * np.pi) * (sp.kron(h, eye, format="csr") - sp.kron(eye, h.T, format="csr"))


def dissipator_superoperator(lop: np.ndarray) -> sp.csr_matrix:
    """D[L] rho = L rho L+ - (L+L rho + rho L+L)/2 on row-major vec(rho)."""
    l = sp.csr_matrix(lop)
    eye = sp.identity(lop.shape[0], format="csr")
    ldl = (l.conj().T @ l).tocsr()
    out = sp.kron(l, l.conj(), format="csr")
    out = out - 0.5 * (sp.kron(ldl, eye, format="csr") + sp.kron(eye, ldl.T, format="csr"))
    return out.tocsr()


@dataclass
class Liouvillian:
    """Static generator plus jump operators for one system configuration.

    ``jump_operators`` maps channel labels to rate-scaled operators
    (sqrt(rate) absorbed, rates per ns).  ``static_super(frame_ghz)`` builds
    the full static superoperator in the given rotating frame; drives are
    added separately (see ``pulses``).
    """

    ops: CompositeOperators
    dissipation: DissipationSpec
    occupations: ThermalOccupations
    jump_operators: Dict[str, np.ndarray]
    _cache: Dict = field(default_factory=dict, init=False, repr=False)

    def dissipator(self) -> sp.csr_matrix:
        if "diss" not in self._cache:
            out = None
            for lop in self.jump_operators.values():
                d = dissipator_superoperator(lop)
                out = d if out is None else out + d
            self._cache["diss"] = out.tocsr()
        return self._cache["diss"]

    def static_super(self, frame_ghz: float = 0.0) -> sp.csr_matrix:
        key = ("static", frame_ghz)
        if key not in self._cache:
            self._cache[key] = (
                unit_superoperator(self.ops.h_static(frame_ghz)) + self.dissipator()
            ).tocsr()
        return self._cache[key]

    def drive_super(self) -> sp.csr_matrix:
        """Unit-amplitude drive superoperator; multiply by the envelope."""
        if "drive" not in self._cache:
            self._cache["drive"] = unit_superoperator(self.ops.drive_op)
        return self._cache["drive"]


def build_liouvillian(ops: CompositeOperators, dissipation: DissipationSpec) -> Liouvillian:
    """Assemble the six thermal jump operators (plus optional dephasing).

    Raising/lowering pairs share a transition frequency, so their rates obey
    detailed balance by construction: Gamma_up/Gamma_down = n/(n+1).
    """
    levels = ops.levels()
    occ = thermal_occupations(levels, ops.rspec.fr_ghz, dissipation.bath_t_mk)
    g_eg = rate_from_mhz(dissipation.gamma_eg_mhz)
    g_fe = rate_from_mhz(dissipation.gamma_fe_mhz)
    kappa = kappa_rate_from_mhz(
        dissipation.resolved_kappa_mhz(ops.rspec.fr_ghz, ops.rspec.q_loaded)
    )
    jumps = {
        "eg": np.sqrt(g_eg * (occ.n_eg + 1.0)) * ops.sigma(0, 1),
        "ge": np.sqrt(g_eg * occ.n_eg) * ops.sigma(1, 0),
        "fe": np.sqrt(g_fe * (occ.n_fe + 1.0)) * ops.sigma(1, 2),
        "ef": np.sqrt(g_fe * occ.n_fe) * ops.sigma(2, 1),
        "r_down": np.sqrt(kappa * (occ.n_r + 1.0)) * ops.a,
        "r_up": np.sqrt(kappa * occ.n_r) * ops.adag,
    }
    if dissipation.gamma_phi_mhz > 0.0:
        g_phi = rate_from_mhz(dissipation.gamma_phi_mhz)
        jumps["phi"] = np.sqrt(2.0 * g_phi) * np.diag(ops.n_level_vec).astype(complex)
    return Liouvillian(ops, dissipation, occ, jumps)


def evolve(
    rho0: np.ndarray,
    liou: Liouvillian,
    drives: Sequence,
    t_grid: np.ndarray,
    rtol: float = 1e-8,
    atol: float = 1e-10,
    max_step: float = np.inf,
    validate: bool = True,
) -> np.ndarray:
    """Integrate the master equation on ``t_grid`` (ns), returning the
    trajectory as an array of density matrices.

    All drives must share one carrier; the static part is built in that
    rotating frame (bare frame when no drive is given).  States on the grid
    are checked against relaxed invariants (trace 1e-8, hermiticity 1e-10,
    positivity -1e-8).
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) < 2 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be ascending with at least two samples")
    dim = liou.ops.dim
    if rho0.shape != (dim, dim):
        raise ValueError(f"rho0 must be {dim}x{dim}")

    drives = list(drives)
    if drives:
        carriers = {d.carrier_ghz for d in drives}
        if len(carriers) > 1:
            raise ValueError("drives with different carriers need sequential frame changes")
        frame = drives[0].carrier_ghz
    else:
        frame = 0.0
    l_static = liou.static_super(frame)
    l_drive = liou.drive_super() if drives else None

    def rhs(t, v):
        dv = l_static @ v
        if l_drive is not None:
            amp = 0.0
            for d in drives:
                amp += d.value(t)
            if amp != 0.0:
                dv = dv + amp * (l_drive @ v)
        return dv

    sol = solve_ivp(
        rhs, (t_grid[0], t_grid[-1]), rho0.astype(complex).reshape(-1),
        t_eval=t_grid, method="RK45", rtol=rtol, atol=atol, max_step=max_step,
    )
    if not sol.success:
        raise IntegrationError(f"solve_ivp failed: {sol.message}")
    traj = sol.y.T.reshape(len(t_grid), dim, dim)
    if validate:
        for k in range(len(t_grid)):
            try:
                validate_density_matrix(traj[k], herm_tol=1e-10, trace_tol=1e-8, eig_tol=-1e-8)
            except ValueError as exc:
                raise IntegrationError(f"state invariant violated at t={t_grid[k]} ns: {exc}")
    return traj


def steady_state(liou: Liouvillian, frame_ghz: float = 0.0) -> np.ndarray:
    """Drive-off steady state by null-space extraction of the vectorized
    Liouvillian.

    The static generator commutes with the frame transformation, so the
    result does not depend on ``frame_ghz``.  Raises ``SteadyStateError``
    when the null space is not one-dimensional or the residual exceeds
    1e-10 times the generator norm.
    """
    l = liou.static_super(frame_ghz).toarray()
    u, svals, vh = np.linalg.svd(l)
    # numerical-zero floor, not a relaxation-gap bound: slow mixing modes at
    # weak coupling sit orders above eps*|L| and must not trip this
    rank_tol = max(50.0 * np.finfo(float).eps * svals[0], 10.0 * svals[-1])
    if svals[-2] < rank_tol:
        raise SteadyStateError(
            f"degenerate null space: two smallest singular values "
            f"{svals[-1]:.3e}, {svals[-2]:.3e} against norm {svals[0]:.3e}"
        )
    dim = liou.ops.dim
    vec = vh[-1].conj()
    # inverse iteration strips slow-mode contamination when the relaxation
    # gap is only a few decades above the eps floor
    inv_s = 1.0 / np.maximum(svals, np.finfo(float).eps * svals[0])
    for _ in range(2):
        vec = vh.conj().T @ (inv_s * (u.conj().T @ vec))
        vec /= np.linalg.norm(vec)
    rho = vec.reshape(dim, dim)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    w, v = np.linalg.eigh(rho)
    if w[0] < -1e-5:
        raise SteadyStateError(
            f"extracted state has eigenvalue {w[0]:.3e}; null space too "
            f"ill-conditioned (relative gap {svals[-2] / svals[0]:.2e})"
        )
    if w[0] < 0.0:
        # eps/gap extraction error lives in the slow subspace and shows up as
        # a tiny negative part; the true steady state is positive, so clip it
        w = np.clip(w, 0.0, None)
        rho = (v * w) @ v.conj().T
        rho /= np.trace(rho).real
    resid = np.linalg.norm(l @ rho.reshape(-1))
    if resid > 1e-10 * svals[0]:
        raise SteadyStateError(f"steady-state residual {resid:.3e} exceeds 1e-10*|L|")
    validate_density_matrix(rho, herm_tol=1e-12, trace_tol=1e-10, eig_tol=-1e-10)
    return rho


def write_trajectory_csv(path, t_grid: np.ndarray, traj: np.ndarray,
                         ops: CompositeOperators) -> None:
    """Dump level populations and the field amplitude along a trajectory."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_ns", "p_g", "p_e", "p_f", "p_d", "re_a", "im_a"])
        for t, rho in zip(t_grid, traj):
            pops = ops.subpopulations(rho)
            a = np.trace(ops.a @ rho)
            writer.writerow(
                [f"{t:.12g}"] + [f"{p:.12g}" for p in pops[:4]]
                + [f"{a.real:.12g}", f"{a.imag:.12g}"]
            )
