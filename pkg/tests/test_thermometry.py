import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import make_synthetic_responses
from tritherm.hilbert import LevelEnergies, Populations
from tritherm.thermometry import (
    COEFFICIENTS,
    DIFFERENCE_PAIRS,
    DegenerateDataError,
    SlopeEstimate,
    SlopeOutOfRangeError,
    attainable_range,
    coefficient_from_populations,
    coefficient_vs_temperature,
    deming_fit,
    difference_pairs,
    estimate_temperature,
    invert_temperature,
)

seed = 20260312

ANCHOR = (6.74, 13.14)


def _slope(coef, value, half=1e-4):
    return SlopeEstimate(coef, None, value, (value - half, value + half), 0.0)


def test_coefficients_from_populations():
    p = Populations(0.8, 0.15, 0.05)
    assert abs(coefficient_from_populations(p, "A") - 13.0 / 15.0) < 1e-14
    assert abs(coefficient_from_populations(p, "B") - 2.0 / 13.0) < 1e-14
    assert abs(coefficient_from_populations(p, "C") - 2.0 / 15.0) < 1e-14
    with pytest.raises(ValueError):
        coefficient_from_populations(p, "D")
    flat = Populations(1 / 3, 1 / 3, 1 / 3)
    with pytest.raises(DegenerateDataError):
        coefficient_from_populations(flat, "A")


def test_coefficient_temperature_limits():
    lv = LevelEnergies.from_frequencies(*ANCHOR)
    t = np.linspace(20.0, 400.0, 40)
    a = [coefficient_vs_temperature(lv, x, "A") for x in t]
    b = [coefficient_vs_temperature(lv, x, "B") for x in t]
    assert np.all(np.diff(a) < 0)  # A falls toward high T
    assert np.all(np.diff(b) > 0)  # B rises from 0
    assert coefficient_vs_temperature(lv, 1.0, "A") > 1.0 - 1e-10
    assert coefficient_vs_temperature(lv, 1.0, "B") < 1e-10
    with pytest.raises(ValueError):
        coefficient_vs_temperature(lv, 0.05, "A")


def test_inversion_anchor_points():
    # frozen against direct Boltzmann-ratio arithmetic on the stated levels
    est = invert_temperature(_slope("A", 0.9936), (5.7, 11.1))
    assert abs(est.t_mk - 54.244218513127876) < 1e-6
    assert abs(est.t_mk - 54.0) < 1.0

    est = invert_temperature(_slope("B", 0.1320), ANCHOR)
    assert abs(est.t_mk - 161.06712993672295) < 1e-6
    assert abs(est.t_mk - 161.0) < 2.0
    lo, hi = est.t_ci95_mk
    assert lo < est.t_mk < hi


def test_inversion_is_exact_round_trip():
    lv = LevelEnergies.from_frequencies(*ANCHOR)
    for coef in COEFFICIENTS:
        for t_true in (40.0, 120.0, 250.0, 700.0):
            val = coefficient_vs_temperature(lv, t_true, coef)
            est = invert_temperature(_slope(coef, val), lv)
            assert abs(est.t_mk - t_true) < 1e-5


def test_inversion_out_of_range():
    with pytest.raises(SlopeOutOfRangeError) as err:
        invert_temperature(_slope("A", 1.2), ANCHOR)
    assert "attainable range" in str(err.value)
    est = invert_temperature(_slope("A", 1.2), ANCHOR, clamp=True)
    assert est.t_mk == 1.0  # cold edge of the bracket
    est = invert_temperature(_slope("B", 0.9), ANCHOR, clamp=True)
    assert est.t_mk == 2000.0
    lo, hi = attainable_range(ANCHOR, "A")
    assert 0.0 < lo < hi < 1.0 + 1e-12


def test_deming_exact_collinear():
    x = np.linspace(-1.0, 1.0, 41)
    fit = deming_fit(x, 0.37 * x + 0.05)
    assert abs(fit.slope - 0.37) < 1e-12
    assert abs(fit.intercept - 0.05) < 1e-12
    assert fit.residual_rms < 1e-12


def test_deming_axis_swap_reciprocal():
    # delta = 1 treats both axes symmetrically: swapping x and y inverts
    # the slope exactly
    rng = np.random.default_rng(seed)
    x = rng.normal(size=200)
    y = 0.8 * x + rng.normal(scale=0.3, size=200)
    ab = deming_fit(x, y).slope
    ba = deming_fit(y, x).slope
    assert abs(ab * ba - 1.0) < 1e-12


def test_deming_beats_ols_attenuation():
    rng = np.random.default_rng(seed + 2)
    lam = 0.8834
    x = rng.uniform(-0.042, 0.042, size=2000)
    nx = x + rng.normal(scale=0.002, size=x.size)
    ny = lam * x + rng.normal(scale=0.002, size=x.size)
    fit = deming_fit(nx, ny)
    ols = np.sum(nx * ny) / np.sum(nx * nx)
    # OLS attenuates toward zero; errors-in-variables does not
    assert abs(fit.slope - lam) < abs(ols - lam)


def test_deming_bootstrap_ci():
    rng = np.random.default_rng(seed + 3)
    x = rng.uniform(-1.0, 1.0, size=300)
    y = 0.5 * x + rng.normal(scale=0.05, size=300)
    a = deming_fit(x, y, n_bootstrap=400, rng=np.random.default_rng(11))
    b = deming_fit(x, y, n_bootstrap=400, rng=np.random.default_rng(11))
    assert a.ci95 == b.ci95
    assert a.ci95[0] < a.slope < a.ci95[1]
    assert a.ci95[0] < 0.5 < a.ci95[1]


def test_deming_rejects_degenerate_data():
    with pytest.raises(DegenerateDataError):
        deming_fit(np.zeros(50), np.zeros(50))
    with pytest.raises(ValueError):
        deming_fit(np.array([1.0, 2.0]), np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        deming_fit(np.arange(5.0), np.arange(5.0), variance_ratio_delta=0.0)


def test_nine_difference_pairs_structure():
    responses, _ = make_synthetic_responses()
    pairs = difference_pairs(responses)
    assert len(pairs) == 9
    per_coef = {c: [] for c in COEFFICIENTS}
    for xs, ys, coef, direction in pairs:
        assert len(xs) == len(ys) == 350
        per_coef[coef].append(direction)
    for coef in COEFFICIENTS:
        assert sorted(per_coef[coef]) == ["ef", "ge", "gf"]


def test_pair_slopes_match_population_algebra():
    responses, levels = make_synthetic_responses(t_mk=120.0)
    from tritherm.hilbert import thermal_populations

    p = thermal_populations(levels, 120.0)
    report = estimate_temperature(responses, levels)
    for est in report.pair_slopes:
        want = coefficient_from_populations(p, est.coefficient)
        assert abs(est.value - want) < 1e-10
    assert report.consistency < 1e-10


def test_estimate_recovers_synthetic_temperature():
    responses, levels = make_synthetic_responses(t_mk=120.0)
    report = estimate_temperature(responses, levels)
    for coef in COEFFICIENTS:
        assert abs(report.temperature(coef).t_mk - 120.0) < 0.01
    # single-quadrature fit sees the same collinear geometry
    report_i = estimate_temperature(responses, levels, quadratures="I")
    for coef in COEFFICIENTS:
        assert abs(report_i.temperature(coef).t_mk - 120.0) < 0.01
    assert report.as_dict()["quadratures"] == "IQ"


def test_estimate_aggregation_modes():
    responses, levels = make_synthetic_responses(t_mk=90.0)
    a = estimate_temperature(responses, levels, aggregation="mean")
    b = estimate_temperature(responses, levels, aggregation="inverse_variance")
    for coef in COEFFICIENTS:
        assert abs(a.temperature(coef).t_mk - b.temperature(coef).t_mk) < 0.02
    with pytest.raises(ValueError):
        estimate_temperature(responses, levels, aggregation="median")


def test_estimate_report_dict_keys():
    responses, levels = make_synthetic_responses()
    d = estimate_temperature(responses, levels).as_dict()
    for coef in COEFFICIENTS:
        assert f"T_{coef}_mK" in d
        assert f"lambda_{coef}" in d
    assert len(d["pair_slopes"]) == 9
    assert "consistency_C_vs_AB" in d


def test_sequence_responses_reject_mislabeled_slot():
    responses, _ = make_synthetic_responses()
    traces = responses.as_dict()
    from tritherm.thermometry import SequenceResponses

    swapped = dict(traces)
    swapped["x2"], swapped["y1"] = traces["y1"], traces["x2"]
    with pytest.raises(ValueError):
        SequenceResponses.from_dict(swapped)
    with pytest.raises(ValueError):
        SequenceResponses.from_dict({k: traces[k] for k in ("x0", "x1")})


@st.composite
def ordered_triples(draw):
    p_g = draw(st.floats(0.40, 0.97))
    split = draw(st.floats(0.60, 0.95))
    p_e = (1.0 - p_g) * split
    p_f = 1.0 - p_g - p_e
    assume(p_g - p_e > 1e-3 and p_e - p_f > 1e-3 and p_f > 1e-6)
    return Populations(p_g, p_e, p_f)


@settings(max_examples=200, deadline=None)
@given(p=ordered_triples())
def test_coefficient_identity(p):
    a = coefficient_from_populations(p, "A")
    b = coefficient_from_populations(p, "B")
    c = coefficient_from_populations(p, "C")
    assert abs(c - a * b) < 1e-12
    assert 0.0 < a < 1.0
    assert b > 0.0


@settings(max_examples=50, deadline=None)
@given(t_mk=st.floats(20.0, 800.0), coef=st.sampled_from(COEFFICIENTS))
def test_slope_temperature_round_trip(t_mk, coef):
    lv = LevelEnergies.from_frequencies(*ANCHOR)
    val = coefficient_vs_temperature(lv, t_mk, coef)
    est = invert_temperature(_slope(coef, val), lv)
    assert abs(est.t_mk - t_mk) < 1e-4


@settings(max_examples=40, deadline=None)
@given(slope=st.floats(0.05, 5.0), offset=st.floats(-2.0, 2.0))
def test_deming_recovers_exact_lines(slope, offset):
    x = np.linspace(-1.0, 1.0, 25)
    fit = deming_fit(x, slope * x + offset)
    assert abs(fit.slope - slope) < 1e-10
    assert abs(fit.intercept - offset) < 1e-10
