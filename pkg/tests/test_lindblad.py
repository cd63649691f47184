import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tritherm.constants import GHZ_TO_MK, bose_occupation
from tritherm.hilbert import (
    ResonatorSpec,
    TransmonSpec,
    build_composite_operators,
    thermal_populations,
    validate_density_matrix,
)
from tritherm.lindblad import (
    DissipationSpec,
    Liouvillian,
    SteadyStateError,
    build_liouvillian,
    dissipator_superoperator,
    evolve,
    steady_state,
    thermal_occupations,
    unit_superoperator,
    write_trajectory_csv,
)
from tritherm.pulses import PulseEnvelope

seed = 20260312


def test_thermal_occupation_oracle():
    # frozen Bose factor at the anchor resonator frequency
    levels = build_composite_operators(
        TransmonSpec(0.36, 10.013), ResonatorSpec(4.906, 0.018, n_fock=2)).levels()
    occ = thermal_occupations(levels, 4.906, 160.0)
    assert abs(occ.n_r - 0.2979684788343554) < 1e-12
    # explicit Bose form
    x = 4.906 * GHZ_TO_MK / 160.0
    assert abs(occ.n_r - 1.0 / np.expm1(x)) < 1e-14


def test_occupation_vanishes_at_depth():
    assert bose_occupation(5.0, 1e-4) == 0.0
    assert bose_occupation(5.0, 1.0) < 1e-100


def test_dissipation_spec_validation():
    with pytest.raises(ValueError):
        DissipationSpec(gamma_eg_mhz=-0.1, gamma_fe_mhz=0.1, bath_t_mk=100.0)
    with pytest.raises(ValueError):
        DissipationSpec(gamma_eg_mhz=0.1, gamma_fe_mhz=0.1, bath_t_mk=0.0)
    spec = DissipationSpec(gamma_eg_mhz=0.1, gamma_fe_mhz=0.1, bath_t_mk=100.0)
    # kappa derived from the loaded Q
    assert abs(spec.resolved_kappa_mhz(7.75, 12000.0) - 1e3 * 7.75 / 12000.0) < 1e-12
    consistent = DissipationSpec(0.1, 0.1, 100.0, kappa_mhz=1e3 * 7.75 / 12000.0)
    assert consistent.resolved_kappa_mhz(7.75, 12000.0) == consistent.kappa_mhz
    clash = DissipationSpec(0.1, 0.1, 100.0, kappa_mhz=0.9)
    with pytest.raises(ValueError):
        clash.resolved_kappa_mhz(7.75, 12000.0)


def test_jump_operator_set(small_liou):
    assert set(small_liou.jump_operators) == {"eg", "ge", "fe", "ef", "r_down", "r_up"}
    # raising/lowering rate ratio obeys detailed balance by construction
    occ = small_liou.occupations
    up = np.linalg.norm(small_liou.jump_operators["ge"]) ** 2
    down = np.linalg.norm(small_liou.jump_operators["eg"]) ** 2
    assert abs(up / down - occ.n_eg / (occ.n_eg + 1.0)) < 1e-12
    levels = small_liou.ops.levels()
    assert abs(up / down - np.exp(-levels.f_ge_ghz * GHZ_TO_MK / 100.0)) < 1e-12


def test_dephasing_channel_optional(small_ops):
    spec = DissipationSpec(0.03, 0.06, 100.0, gamma_phi_mhz=0.2)
    liou = build_liouvillian(small_ops, spec)
    assert "phi" in liou.jump_operators
    # dephasing operator is diagonal in the level index
    phi = liou.jump_operators["phi"]
    assert np.max(np.abs(phi - np.diag(np.diag(phi)))) == 0.0


def test_unit_superoperator_is_commutator():
    rng = np.random.default_rng(seed)
    h = rng.normal(size=(6, 6))
    h = h + h.T
    rho = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    lhs = (unit_superoperator(h) @ rho.reshape(-1)).reshape(6, 6)
    rhs = -2j * np.pi * (h @ rho - rho @ h)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_dissipator_superoperator_matches_lindblad_form():
    rng = np.random.default_rng(seed + 1)
    lop = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    rho = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    lhs = (dissipator_superoperator(lop) @ rho.reshape(-1)).reshape(5, 5)
    ldl = lop.conj().T @ lop
    rhs = lop @ rho @ lop.conj().T - 0.5 * (ldl @ rho + rho @ ldl)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_evolve_free_decay(small_liou):
    ops = small_liou.ops
    rho0 = np.zeros((ops.dim, ops.dim), dtype=complex)
    rho0[ops.rspec.n_states, ops.rspec.n_states] = 1.0  # |e, 0>
    t = np.linspace(0.0, 400.0, 9)
    traj = evolve(rho0, small_liou, [], t)
    assert traj.shape == (9, ops.dim, ops.dim)
    for rho in traj:
        assert abs(np.trace(rho).real - 1.0) < 1e-8
    # population flows out of e
    assert ops.subpopulations(traj[-1])[1] < 1.0


def test_evolve_step_insensitive(small_liou):
    ops = small_liou.ops
    rho0 = np.zeros((ops.dim, ops.dim), dtype=complex)
    rho0[0, 0] = 1.0
    drive = PulseEnvelope("gaussian_drive", carrier_ghz=4.98, amplitude=0.005,
                          duration_ns=56.0)
    t = np.array([0.0, 56.0])
    a = evolve(rho0, small_liou, [drive], t, max_step=1.0)[-1]
    b = evolve(rho0, small_liou, [drive], t, max_step=0.5)[-1]
    assert np.max(np.abs(a - b)) < 1e-6


def test_evolve_input_validation(small_liou):
    dim = small_liou.ops.dim
    rho0 = np.eye(dim, dtype=complex) / dim
    with pytest.raises(ValueError):
        evolve(rho0, small_liou, [], np.array([1.0, 0.5]))
    with pytest.raises(ValueError):
        evolve(np.eye(3, dtype=complex) / 3, small_liou, [], np.array([0.0, 1.0]))
    d1 = PulseEnvelope("gaussian_drive", 4.98, 0.001, 56.0)
    d2 = PulseEnvelope("gaussian_drive", 4.50, 0.001, 56.0)
    with pytest.raises(ValueError):
        evolve(rho0, small_liou, [d1, d2], np.array([0.0, 56.0]))


def test_steady_state_boltzmann_weak_coupling():
    # coupling small enough that channel competition cannot shift populations
    ops = build_composite_operators(
        TransmonSpec(0.36, 10.013),
        ResonatorSpec(7.75, 2e-4, n_fock=2, q_loaded=3100.0))
    liou = build_liouvillian(ops, DissipationSpec(0.1, 0.2, 100.0))
    rho = steady_state(liou)
    pops = ops.protocol_populations(rho)
    ref = thermal_populations(ops.levels(), 100.0)
    np.testing.assert_allclose(pops.as_array(), ref.as_array(), atol=1e-6)


def test_steady_state_frame_invariant(small_liou):
    rho0 = steady_state(small_liou, frame_ghz=0.0)
    rhof = steady_state(small_liou, frame_ghz=small_liou.ops.rspec.fr_ghz)
    # thermal state is diagonal, hence static in every rotating frame; the
    # two extractions agree to the null-vector conditioning limit
    assert np.max(np.abs(rho0 - rhof)) < 1e-6


def test_steady_state_residual(small_liou):
    rho = steady_state(small_liou)
    validate_density_matrix(rho)
    l = small_liou.static_super(0.0)
    resid = np.linalg.norm(l @ rho.reshape(-1))
    norm = np.linalg.norm(l.toarray(), 2)
    assert resid < 1e-10 * norm


def test_steady_state_degenerate_raises(small_ops):
    # decoupled resonator leaves the top transmon level dark: |d> x thermal
    # is a second steady state and extraction must refuse to pick one
    ops = build_composite_operators(
        TransmonSpec(0.36, 10.013), ResonatorSpec(7.75, 0.0, n_fock=2))
    liou = build_liouvillian(ops, DissipationSpec(0.03, 0.06, 100.0))
    with pytest.raises(SteadyStateError):
        steady_state(liou)


def test_trajectory_csv(tmp_path, small_liou):
    ops = small_liou.ops
    rho0 = np.zeros((ops.dim, ops.dim), dtype=complex)
    rho0[ops.rspec.n_states, ops.rspec.n_states] = 1.0  # |e, 0>
    t = np.linspace(0.0, 50.0, 6)
    traj = evolve(rho0, small_liou, [], t)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(path, t, traj, ops)
    lines = path.read_text().strip().splitlines()
    assert lines[0].rstrip("\r") == "t_ns,p_g,p_e,p_f,p_d,re_a,im_a"
    assert len(lines) == 7
    first = lines[1].rstrip("\r").split(",")
    assert float(first[0]) == 0.0
    assert abs(float(first[2]) - 1.0) < 1e-10


@settings(max_examples=25, deadline=None)
@given(t_mk=st.floats(20.0, 400.0), f_ghz=st.floats(2.0, 14.0))
def test_bose_factor_detailed_balance(t_mk, f_ghz):
    n = bose_occupation(f_ghz, t_mk)
    x = f_ghz * GHZ_TO_MK / t_mk
    assert n >= 0.0
    assert abs(n / (n + 1.0) - np.exp(-x)) < 1e-13
