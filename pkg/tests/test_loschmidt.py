from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nhdqpt.loschmidt import (
    KGrid,
    Normalization,
    QuenchScenario,
    TGrid,
    amplitude_bio,
    amplitude_bio_infT,
    amplitude_bio_pure,
    amplitude_from_coupling,
    amplitude_nonbio,
    coupling,
    echo_series,
    evolution_operator,
    expectation_P0,
    oracle_amplitude,
    oracle_evolution,
    rate_function,
)
from nhdqpt.nhband import bilinear_dot, energy, make_ssh
from nhdqpt.qstate import Formulation, InitialStateSpec, ParticipationProbs, StateKind, mixed_nk, participation

from conftest import random_vec, ssh_quench


def test_identical_pure_quench_is_a_phase():
    h = np.array([1.0, 0, 0])
    a = amplitude_bio(h, h, 1.0, 0.7)
    assert a == pytest.approx(np.exp(0.7j), abs=1e-15)
    assert amplitude_nonbio(h, h, ParticipationProbs(0, 1), 0.7) == pytest.approx(np.exp(0.7j), abs=1e-15)


def test_infinite_temperature_is_cosine(rng):
    h0, h1 = random_vec(rng), random_vec(rng)
    e1 = energy(h1)
    assert amplitude_bio(h0, h1, 0.0, 1.3) == pytest.approx(np.cos(e1 * 1.3), abs=1e-15)
    assert amplitude_bio_infT(h1, 0) == 1
    assert amplitude_bio_infT(h1, 2.0) == pytest.approx(np.cos(2 * e1))


def test_pure_wrapper_is_bitwise(rng):
    h0, h1 = random_vec(rng), random_vec(rng)
    assert amplitude_bio_pure(h0, h1, 0.9) == amplitude_bio(h0, h1, 1.0, 0.9)


def test_ssh_pure_amplitude_against_oracle():
    k = np.array(np.pi)
    h0, h1 = make_ssh(2.2, 1, 1.5)(k), make_ssh(2.2, 1, 0)(k)
    a = amplitude_bio_pure(h0, h1, 1.0)
    dot = bilinear_dot(h0, h1) / (energy(h0) * energy(h1))
    assert a == pytest.approx(np.cos(1.2) + 1j * np.sin(1.2) * dot, abs=1e-14)
    assert a == pytest.approx(oracle_amplitude(h0, h1, (0, 1), Formulation.BIORTHOGONAL, 1.0), abs=1e-12)


def test_ssh_expectation_vanishes_at_zone_edge():
    k = np.array(np.pi)
    h0, h1 = make_ssh(0.6, 1, 1.5)(k), make_ssh(0.6, 1, 0)(k)
    probs = ParticipationProbs(0, 1)
    assert abs(expectation_P0(h0, h1, probs)) < 1e-15
    for t in (0.5, 3.0):
        assert amplitude_nonbio(h0, h1, probs, t) == pytest.approx(np.cos(0.4 * t), abs=1e-14)


def test_identical_hermitian_expectation_is_minus_one(rng):
    h = rng.uniform(-1, 1, 3)
    assert expectation_P0(h, h, ParticipationProbs(0, 1)) == pytest.approx(-1)


def test_chiral_expectation_is_real(rng):
    for _ in range(200):
        h0 = random_vec(rng)
        h0[2] = 0
        h1 = rng.uniform(-1, 1, 3)
        h1[2] = 0
        if np.abs(energy(h0)) < 0.1 or np.abs(energy(h1)) < 0.1:
            continue
        assert abs(expectation_P0(h0, h1, ParticipationProbs(0, 1)).imag) < 1e-10


def test_expectation_rejects_zero_weights():
    with pytest.raises(ValueError):
        expectation_P0(np.array([1, 0, 0]), np.array([0, 1, 0]), ParticipationProbs(0.5, -0.5))


def test_hermitian_formulations_coincide(rng):
    for _ in range(500):
        h0, h1 = rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3)
        pp = rng.uniform(0, 1)
        probs = ParticipationProbs(pp, 1 - pp)
        t = rng.uniform(0, 5)
        bio = amplitude_bio(h0, h1, probs.p_minus - probs.p_plus, t)
        assert abs(bio - amplitude_nonbio(h0, h1, probs, t)) < 1e-10


def _random_state(rng, formulation):
    kind = rng.choice(["pure", "gibbs", "custom"])
    if kind == "pure":
        return InitialStateSpec(StateKind.PURE_GROUND, formulation)
    if kind == "gibbs":
        return InitialStateSpec(StateKind.GIBBS, formulation, beta=float(rng.uniform(0.1, 5)))
    pp = complex(rng.uniform(0, 1), rng.uniform(-0.3, 0.3))
    pm = complex(rng.uniform(0, 1), rng.uniform(-0.3, 0.3))
    return InitialStateSpec(StateKind.CUSTOM, formulation, custom=lambda k: (pp, pm))


def test_analytic_amplitudes_match_oracle(rng):
    worst = 0.0
    for i in range(1000):
        formulation = Formulation.BIORTHOGONAL if i % 2 else Formulation.NON_BIORTHOGONAL
        h0, h1 = random_vec(rng), random_vec(rng)
        spec = _random_state(rng, formulation)
        probs = participation(spec, h0, np.array(0.0))
        t = rng.uniform(0, 5)
        if formulation is Formulation.BIORTHOGONAL:
            a = amplitude_bio(h0, h1, mixed_nk(probs), t)
        else:
            a = amplitude_nonbio(h0, h1, probs, t)
        worst = max(worst, abs(a - oracle_amplitude(h0, h1, probs, formulation, t)))
    assert worst < 1e-9


def test_evolution_operator_constructions_agree(rng):
    for _ in range(200):
        h1 = random_vec(rng)
        t = rng.uniform(0, 5)
        assert np.abs(evolution_operator(h1, t) - oracle_evolution(h1, t)).max() < 1e-10


def test_oracle_trace_at_time_zero(rng):
    h0, h1 = random_vec(rng), random_vec(rng)
    probs = (0.3 + 0.1j, 0.5 - 0.2j)
    raw = oracle_amplitude(h0, h1, probs, Formulation.BIORTHOGONAL, 0.0, normalize=False)
    assert raw == pytest.approx(0.8 - 0.1j, abs=1e-12)
    assert oracle_amplitude(h0, h1, probs, Formulation.NON_BIORTHOGONAL, 0.0) == pytest.approx(1, abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 5))
def test_branch_flip_invariance(seed, t):
    rng = np.random.default_rng(seed)
    h0, h1 = random_vec(rng), random_vec(rng)
    probs = participation(InitialStateSpec(StateKind.GIBBS, beta=0.8), h0)
    for formulation in Formulation:
        c = coupling(h0, h1, probs, formulation)
        c_flip = coupling(h0, h1, probs, formulation, e1=-energy(h1))
        a = amplitude_from_coupling(energy(h1), c, t)
        b = amplitude_from_coupling(-energy(h1), c_flip, t)
        assert abs(a - b) < 1e-14 * max(1.0, abs(a))


def test_gibbs_limits_of_amplitude(rng):
    for _ in range(100):
        # Hermitian models with |h| <= 1 keep the O(β h0) high-temperature error below β
        h0 = rng.uniform(-1, 1, 3)
        h0 /= max(1.0, np.linalg.norm(h0))
        if energy(h0).real < 0.2:
            continue
        h1 = rng.uniform(-1, 1, 3)
        t = rng.uniform(0, 5)
        nk_cold = participation(InitialStateSpec(StateKind.GIBBS, beta=50), h0)
        assert abs(amplitude_bio(h0, h1, mixed_nk(nk_cold), t) - amplitude_bio_pure(h0, h1, t)) < 1e-8
        nk_hot = participation(InitialStateSpec(StateKind.GIBBS, beta=1e-6), h0)
        assert abs(amplitude_bio(h0, h1, mixed_nk(nk_hot), t) - np.cos(energy(h1) * t)) < 1e-6


def small(scenario_kw=None, **kw):
    return ssh_quench(k_grid=KGrid(101), t_grid=TGrid(60, 6.0), **kw)


def test_amplitudes_equal_one_at_time_zero():
    for formulation in Formulation:
        for kind in (StateKind.PURE_GROUND, StateKind.GIBBS, StateKind.INFINITE_T):
            s = small(t1=0.6, formulation=formulation, kind=kind, beta=1.0)
            series = echo_series(s, Normalization.NONE)
            assert np.abs(series.amplitude[0] - 1).max() < 1e-14


def test_hermitian_normalizations_agree():
    s = small(t1=0.6, gamma0=0.0, kind=StateKind.GIBBS, beta=0.7, formulation=Formulation.BIORTHOGONAL)
    echoes = [echo_series(s, n).echo for n in Normalization]
    assert np.abs(echoes[0] - echoes[1]).max() < 1e-10
    assert np.abs(echoes[0] - echoes[2]).max() < 1e-10


def test_self_norm_echo_is_bounded():
    for t1 in (0.6, 2.2):
        s = small(t1=t1, gamma1=0.3)
        echo = echo_series(s, Normalization.SELF_NORM).echo
        assert echo.min() >= 0 and echo.max() <= 1 + 1e-9


def test_normalized_echoes_start_at_one():
    for formulation in Formulation:
        for norm in (Normalization.SELF_NORM, Normalization.BIORTHO_NORM):
            s = small(t1=0.6, gamma1=0.3, formulation=formulation)
            assert np.abs(echo_series(s, norm).echo[0] - 1).max() < 1e-12


def test_unnormalised_echo_follows_growth_envelope():
    s = small(t1=0.6, gamma1=0.3)
    series = echo_series(s, Normalization.NONE)
    e1 = energy(s.h1_model(series.k))
    growth = np.exp(2 * np.abs(e1.imag)[None, :] * series.t[:, None])
    # |cos + i sin c|² is bounded by (1 + |c|)² times the growth envelope
    assert np.all(series.echo <= 4 * growth + 1e-9)
    assert series.echo.max() > 1.5


def test_biortho_norm_differs_from_plain_by_a_positive_factor():
    s = small(t1=0.6, gamma1=0.3, formulation=Formulation.BIORTHOGONAL)
    plain = echo_series(s, Normalization.NONE).echo
    norm = echo_series(s, Normalization.BIORTHO_NORM).echo
    ratio = plain / norm
    assert np.all(ratio > 0) and np.all(np.isfinite(ratio))
    assert np.abs(norm[0] - 1).max() < 1e-12


def test_onsite_shift_cancels_under_self_norm():
    s = small(t1=0.6, gamma1=0.3)
    shifted = QuenchScenario(s.h0_model, s.h1_model, s.state, s.k_grid, s.t_grid, onsite1=-0.4j)
    a = echo_series(s, Normalization.SELF_NORM).echo
    b = echo_series(shifted, Normalization.SELF_NORM).echo
    assert np.abs(a - b).max() < 1e-12
    plain = echo_series(shifted, Normalization.NONE).echo
    assert np.allclose(plain, echo_series(s, Normalization.NONE).echo * np.exp(-0.8 * s.t_grid.points())[:, None])


def test_identical_hermitian_quench_has_zero_rate():
    s = ssh_quench(0.6, gamma0=0.0, gamma1=0.0, k_grid=KGrid(201), t_grid=TGrid(100, 10.0))
    lam = rate_function(echo_series(s, Normalization.SELF_NORM))
    assert np.abs(lam).max() < 1e-12


def test_rate_is_non_negative_for_pure_self_norm():
    s = small(t1=0.6, gamma1=0.3)
    assert rate_function(echo_series(s)).min() >= -1e-12


def test_rate_drops_excluded_points():
    s = small(t1=0.6)
    series = echo_series(s)
    lam = rate_function(series)
    echo = series.echo.copy()
    echo[:, 3] = np.nan
    from dataclasses import replace

    lam2 = rate_function(replace(series, echo=echo))
    keep = np.delete(series.echo, 3, axis=1)
    assert np.allclose(lam2, -np.mean(np.log(keep), axis=1) / 2)
    assert not np.allclose(lam, lam2)


def test_rate_clamps_zero_echo():
    s = small(t1=0.6)
    series = echo_series(s)
    from dataclasses import replace

    echo = series.echo.copy()
    echo[5, 0] = 0.0
    clamped = replace(series, echo=echo)
    assert clamped.clamped_cells == 1
    assert np.isfinite(rate_function(clamped)).all()


def test_threads_do_not_change_results():
    s = ssh_quench(0.6, k_grid=KGrid(301), t_grid=TGrid(400, 16.0))
    a = echo_series(s, threads=1, chunk=37)
    b = echo_series(s, threads=4, chunk=50)
    assert np.array_equal(a.echo, b.echo)
    assert np.array_equal(rate_function(a), rate_function(b))


def test_grid_validation():
    with pytest.raises(ValueError):
        KGrid(2)
    with pytest.raises(ValueError, match="tMax must be > 0"):
        TGrid(10, 0.0)


def test_identical_nonhermitian_quench_is_flat_while_growth_is_moderate():
    # roundoff in the decaying band grows like e^{2|Im ε| t}; at t = 4 that is ~1e5
    for formulation in Formulation:
        s = ssh_quench(0.6, gamma0=1.5, gamma1=1.5, formulation=formulation, t_grid=TGrid(400, 4.0))
        assert np.abs(rate_function(echo_series(s))).max() < 1e-10
