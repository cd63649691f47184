"""Heterodyne readout synthesis: probe evolution, IQ traces, noise, windowing,
and the pure-state-basis population regression.

Dynamics run in the frame rotating at the probe carrier (the resonator
frequency); the intermediate-frequency oscillation is reattached afterwards,
I(t) + iQ(t) = <a>(t) exp(i 2 pi f_IF t).  Noise is modeled post-averaging as
one effective Gaussian per sample and quadrature, matching how the estimator
consumes the data; the shot count is recorded but individual shots are never
drawn.

Trace units are arbitrary but fixed per run by normalizing the pure-state
responses to unit peak magnitude, which puts the default noise level directly
on the scale of the measured responses.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np
from scipy.linalg import expm
from scipy.optimize import nnls

from .constants import TWO_PI
from .hilbert import Populations, ResonatorSpec
from .lindblad import Liouvillian, unit_superoperator


class DegenerateBasisError(RuntimeError):
    """Pure-state responses too collinear for a stable regression."""


@dataclass(frozen=True)
class ReadoutConfig:
    """Probe and digitization settings.

    ``noise_sigma`` is the post-averaging noise standard deviation per sample
    and quadrature, in normalized response units.  ``probe_amplitude_ghz`` is
    chosen so the steady-state photon number stays at or below one.
    """

    probe_duration_ns: float = 2000.0
    if_mhz: float = 50.0
    sample_dt_ns: float = 1.0
    window_start_ns: float = 100.0
    window_end_ns: float = 450.0
    noise_sigma: float = 0.002
    n_averages: int = 60000
    probe_amplitude_ghz: float = 2.5e-4

    def __post_init__(self):
        if not 0.0 <= self.window_start_ns < self.window_end_ns <= self.probe_duration_ns:
            raise ValueError("need 0 <= window_start < window_end <= probe_duration")
        if self.if_mhz <= 0:
            raise ValueError("if_mhz must be positive")
        if self.sample_dt_ns <= 0:
            raise ValueError("sample_dt_ns must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if self.n_averages < 1:
            raise ValueError("n_averages must be at least 1")
        if self.probe_amplitude_ghz < 0:
            raise ValueError("probe_amplitude_ghz must be non-negative")

    @property
    def n_samples(self) -> int:
        return int(round(self.probe_duration_ns / self.sample_dt_ns))

    def time_grid(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.sample_dt_ns

    def check_ring_up(self, rspec: ResonatorSpec) -> Optional[str]:
        """Warning text when the analysis window opens before the resonator
        ring-up time Q/(4 f_r), else None."""
        t_ring = ring_up_ns(rspec)
        if self.window_start_ns < t_ring - 1e-9:
            return (f"analysis window opens at {self.window_start_ns} ns, before the "
                    f"resonator ring-up time {t_ring:.1f} ns; early samples carry "
                    f"transient rather than steady-state contrast")
        return None


def ring_up_ns(rspec: ResonatorSpec) -> float:
    return rspec.q_loaded / (4.0 * rspec.fr_ghz)


@dataclass(frozen=True)
class IQTrace:
    """One averaged heterodyne record: sample times and both quadratures."""

    t_ns: np.ndarray
    i_vals: np.ndarray
    q_vals: np.ndarray
    label: str = ""

    def __post_init__(self):
        if not (len(self.t_ns) == len(self.i_vals) == len(self.q_vals)):
            raise ValueError("t_ns, i_vals, q_vals must have equal lengths")
        if len(self.t_ns) >= 2:
            dt = np.diff(self.t_ns)
            if np.max(np.abs(dt - dt[0])) > 1e-9:
                raise ValueError("sample spacing must be uniform")

    def complex_vals(self) -> np.ndarray:
        return self.i_vals + 1j * self.q_vals

    def scaled(self, factor: float) -> "IQTrace":
        return IQTrace(self.t_ns, self.i_vals * factor, self.q_vals * factor, self.label)


@dataclass(frozen=True)
class PureStateResponses:
    """Reference traces for pure |g>, |e>, |f> initial states."""

    phi_g: IQTrace
    phi_e: IQTrace
    phi_f: IQTrace

    def as_dict(self) -> Dict[str, IQTrace]:
        return {"g": self.phi_g, "e": self.phi_e, "f": self.phi_f}

    def min_pairwise_distance(self) -> float:
        """Smallest max-norm separation |phi_i - phi_j| between basis traces."""
        tr = [t.complex_vals() for t in (self.phi_g, self.phi_e, self.phi_f)]
        seps = [np.max(np.abs(tr[i] - tr[j])) for i in range(3) for j in range(i + 1, 3)]
        return float(min(seps))


def pure_basis_states(liou: Liouvillian) -> Dict[str, np.ndarray]:
    """Vectorized bare-level (x) thermal-resonator states for g, e, f.

    These model preparing the transmon in a definite level while the readout
    resonator stays at its bath occupation.
    """
    ops = liou.ops
    n_r = liou.occupations.n_r
    nres = ops.rspec.n_states
    pn = (n_r / (1.0 + n_r)) ** np.arange(nres)
    pn /= pn.sum()
    out = {}
    for label, k in (("g", 0), ("e", 1), ("f", 2)):
        rho = np.zeros((ops.dim, ops.dim), dtype=complex)
        idx = k * nres + np.arange(nres)
        rho[idx, idx] = pn
        out[label] = rho.reshape(-1)
    return out


def probe_propagator(liou: Liouvillian, config: ReadoutConfig) -> np.ndarray:
    """Dense one-sample propagator exp(L dt) for the probed system in the
    probe (= resonator) frame."""
    fr = liou.ops.rspec.fr_ghz
    l_probe = unit_superoperator(
        config.probe_amplitude_ghz * (liou.ops.a + liou.ops.adag)
    )
    l_ro = (liou.static_super(fr) + l_probe).toarray()
    return expm(l_ro * config.sample_dt_ns)


def synthesize_traces(states: Dict[str, np.ndarray], liou: Liouvillian,
                      config: ReadoutConfig) -> Dict[str, IQTrace]:
    """Probe all ``states`` (vectorized, already in the probe frame) at once.

    One propagator factorization is shared across states; <a> is sampled
    every ``sample_dt_ns`` and the IF oscillation reattached.  Traces are in
    raw (unnormalized) response units.
    """
    ops = liou.ops
    labels = list(states)
    cols = np.stack([states[lab] for lab in labels], axis=1).astype(complex)
    prop = probe_propagator(liou, config)
    a_row = ops.a.T.reshape(-1).astype(complex)  # tr(a rho) = vec(a^T) . vec(rho)
    n = config.n_samples
    raw = np.empty((n, cols.shape[1]), dtype=complex)
    for k in range(n):
        raw[k] = a_row @ cols
        if k + 1 < n:
            cols = prop @ cols
    t = config.time_grid()
    phase = np.exp(1j * TWO_PI * (config.if_mhz * 1e-3) * t)
    iq = raw * phase[:, None]
    return {
        lab: IQTrace(t, iq[:, j].real.copy(), iq[:, j].imag.copy(), label=lab)
        for j, lab in enumerate(labels)
    }


def simulate_readout(rho_init: np.ndarray, liou: Liouvillian, config: ReadoutConfig,
                     label: str = "") -> IQTrace:
    """Heterodyne response of one prepared state under the rectangular probe."""
    vec = rho_init.reshape(-1) if rho_init.ndim == 2 else rho_init
    return synthesize_traces({label: vec}, liou, config)[label]


def pure_state_responses(liou: Liouvillian, config: ReadoutConfig) -> PureStateResponses:
    traces = synthesize_traces(pure_basis_states(liou), liou, config)
    return PureStateResponses(traces["g"], traces["e"], traces["f"])


def normalization_factor(basis: PureStateResponses) -> float:
    """1 / max |phi| over the three pure-state responses (full trace)."""
    peak = max(float(np.max(np.abs(t.complex_vals()))) for t in basis.as_dict().values())
    if peak == 0.0:
        raise ValueError("pure-state responses are identically zero; probe off?")
    return 1.0 / peak


def add_noise(trace: IQTrace, noise_sigma: float, n_averages: int, seed) -> IQTrace:
    """Additive Gaussian noise, std ``noise_sigma`` per sample and quadrature.

    The std is interpreted post-averaging, i.e. already divided by the shot
    count; ``n_averages`` is accepted to document that interpretation.
    Deterministic for a fixed seed.
    """
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be non-negative")
    if noise_sigma == 0.0:
        return trace
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, noise_sigma, size=(2, len(trace.t_ns)))
    return IQTrace(trace.t_ns, trace.i_vals + noise[0], trace.q_vals + noise[1],
                   trace.label)


def window(trace: IQTrace, config: ReadoutConfig,
           rspec: Optional[ResonatorSpec] = None) -> IQTrace:
    """Restrict to the analysis window [window_start, window_end) ns.

    When the resonator spec is supplied, a window opening before ring-up is
    flagged with a warning (the data are kept)."""
    if rspec is not None:
        msg = config.check_ring_up(rspec)
        if msg is not None:
            warnings.warn(msg)
    mask = (trace.t_ns >= config.window_start_ns) & (trace.t_ns < config.window_end_ns)
    if not np.any(mask):
        raise ValueError(
            f"window [{config.window_start_ns}, {config.window_end_ns}) ns contains "
            f"no samples of a {trace.t_ns[0]}..{trace.t_ns[-1]} ns trace"
        )
    return IQTrace(trace.t_ns[mask], trace.i_vals[mask], trace.q_vals[mask], trace.label)


def _design_matrix(basis: PureStateResponses) -> np.ndarray:
    cols = []
    for t in (basis.phi_g, basis.phi_e, basis.phi_f):
        cols.append(np.concatenate([t.i_vals, t.q_vals]))
    return np.stack(cols, axis=1)


def regress_population_vector(measured: IQTrace, basis: PureStateResponses) -> np.ndarray:
    """Unconstrained least-squares decomposition of a trace in the pure-state
    basis, over all window samples and both quadratures."""
    for ref in basis.as_dict().values():
        if len(ref.t_ns) != len(measured.t_ns):
            raise ValueError("measured and basis traces must share the window grid")
    m = _design_matrix(basis)
    cond = np.linalg.cond(m)
    if cond > 1e6:
        raise DegenerateBasisError(
            f"pure-state basis condition number {cond:.3e} exceeds 1e6"
        )
    y = np.concatenate([measured.i_vals, measured.q_vals])
    p, *_ = np.linalg.lstsq(m, y, rcond=None)
    return p


def regress_populations(measured: IQTrace, basis: PureStateResponses,
                        simplex: bool = False) -> Populations:
    """Populations (p_g, p_e, p_f) of a measured trace.

    Default: unconstrained least squares, then snapped onto the population
    simplex (deviations beyond 0.05 raise, since they signal a basis or
    windowing mismatch rather than noise).  With ``simplex=True`` the
    constraint p >= 0, sum p = 1 enters the solve itself.
    """
    if simplex:
        m = _design_matrix(basis)
        cond = np.linalg.cond(m)
        if cond > 1e6:
            raise DegenerateBasisError(
                f"pure-state basis condition number {cond:.3e} exceeds 1e6"
            )
        y = np.concatenate([measured.i_vals, measured.q_vals])
        scale = max(np.max(np.abs(m)), 1e-30)
        lam = 1e6 * scale
        m_aug = np.vstack([m, lam * np.ones((1, 3))])
        y_aug = np.concatenate([y, [lam]])
        p, _ = nnls(m_aug, y_aug)
        return Populations(*(p / p.sum()))
    p = regress_population_vector(measured, basis)
    excess = max(np.max(-p), abs(p.sum() - 1.0))
    if excess > 0.05:
        raise DegenerateBasisError(
            f"unconstrained solution {p} lies {excess:.3f} outside the population "
            f"simplex; traces and basis are inconsistent"
        )
    p = np.clip(p, 0.0, None)
    return Populations(*(p / p.sum()))


def write_trace_csv(path, traces: Sequence[IQTrace]) -> None:
    """Write traces as CSV rows t_ns, I, Q, label with 12 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_ns", "I", "Q", "label"])
        for tr in traces:
            for t, i, q in zip(tr.t_ns, tr.i_vals, tr.q_vals):
                w.writerow([f"{t:.12g}", f"{i:.12g}", f"{q:.12g}", tr.label])


def read_trace_csv(path) -> Dict[str, IQTrace]:
    """Inverse of ``write_trace_csv``; returns traces keyed by label."""
    rows: Dict[str, list] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:4] != ["t_ns", "I", "Q", "label"]:
            raise ValueError(f"unexpected trace header {header}")
        for t, i, q, label in reader:
            rows.setdefault(label, []).append((float(t), float(i), float(q)))
    out = {}
    for label, data in rows.items():
        arr = np.array(data)
        out[label] = IQTrace(arr[:, 0], arr[:, 1], arr[:, 2], label)
    return out
