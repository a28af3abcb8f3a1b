import math

import numpy as np
import pytest

from mechcat import fock, verify
from mechcat.algebra import canonicalize, symmetrized_expand
from mechcat.errors import IllConditioned, RankDeficient
from mechcat.herald import ProtocolParams, heralded_moment_table, pure_cat_state
from mechcat.opensystem import EnvParams, evolve_moments
from mechcat.verify import (
    PORTS,
    Pathway,
    PhaseSet,
    VerificationStudy,
    default_phase_sets,
    exact_port_moments,
    port_observable,
    recover_moments,
    run_verification,
    sample_port_shots,
    synthesize_dataset,
)

PHI = math.pi
ENV = EnvParams(omega_m=2 * math.pi * 1e6, q_factor=1e5, nbar_bath=1000.0)


def evolved_table(mu=0.5, phi=PHI, nbar=0.1, order=8, configuration="parallel"):
    params = ProtocolParams(mu=mu, phi=phi, nbar_1=nbar, nbar_2=nbar, configuration=configuration)
    return evolve_moments(heralded_moment_table(params, order), ENV)


def test_port_coefficients_single_pulse():
    pathway = Pathway(pulses=frozenset({"m1_t0"}), chi=2.0, phi=0.7)
    form = port_observable(pathway, "A")
    assert form.signal == {"X1": pytest.approx(2.0 * 0.5)}
    # every port carries exactly one unit of vacuum noise
    assert np.sum(np.abs(form.noise_coeffs) ** 2) == pytest.approx(1.0)


def test_port_coefficients_full_pathway():
    phi = 1.3
    pathway = Pathway(phases=PhaseSet(), chi=1.0, phi=phi)
    form_a = port_observable(pathway, "A")
    e = np.exp(1j * phi)
    assert form_a.signal["X1"] == pytest.approx(0.5)
    assert form_a.signal["P1"] == pytest.approx(0.5)
    assert form_a.signal["X2"] == pytest.approx(0.5 * e)
    assert form_a.signal["P2"] == pytest.approx(0.5 * e)
    form_c = port_observable(pathway, "C")
    signs = np.sign(
        [form_c.noise_coeffs[0].real, form_c.noise_coeffs[1].real,
         (form_c.noise_coeffs[2] / e).real, (form_c.noise_coeffs[3] / e).real]
    )
    assert list(signs) == [1, -1, -1, -1]
    form_d = port_observable(pathway, "D")
    signs_d = np.sign(
        [form_d.noise_coeffs[0].real, form_d.noise_coeffs[1].real,
         (form_d.noise_coeffs[2] / e).real, (form_d.noise_coeffs[3] / e).real]
    )
    assert list(signs_d) == [1, -1, 1, -1]


def test_exact_first_moment_single_pulse():
    table = evolved_table(order=2)
    chi = 1.7
    pathway = Pathway(pulses=frozenset({"m1_t0"}), chi=chi, phi=PHI)
    m = exact_port_moments(pathway, "A", table, 1)
    assert m[0] == pytest.approx(chi * table.value((1, 0, 0, 0)) / 2.0)


def test_exact_third_moment_single_pulse_structure():
    # <P^3> = (chi/2)^3 <X^3> + 3 (chi/2) <X> <N^2>, with <N^2> the
    # unitary-network vacuum variance of the port
    table = evolved_table(mu=0.8, phi=2.0, order=6)
    chi = 1.3
    pathway = Pathway(pulses=frozenset({"m1_t0"}), chi=chi, phi=2.0)
    form = port_observable(pathway, "A")
    nu = form.noise_variance
    m = exact_port_moments(pathway, "A", table, 3)
    x1 = table.value((1, 0, 0, 0))
    x3 = table.value((3, 0, 0, 0))
    expect = (chi / 2) ** 3 * x3 + 3 * (chi / 2) * x1 * nu
    assert m[2] == pytest.approx(expect, rel=1e-12)
    # real pathway (phi = pi): the port noise variance is the full vacuum 1/2
    form_pi = port_observable(Pathway(pulses=frozenset({"m1_t0"}), chi=chi, phi=PHI), "A")
    assert form_pi.noise_variance == pytest.approx(0.5)


def test_odd_port_moments_vanish_on_ground_state():
    from mechcat.herald import thermal_moment_table

    table = thermal_moment_table(0.0, 0.0, 8)
    pathway = Pathway(chi=1.0, phi=PHI)
    m = exact_port_moments(pathway, "A", table, 5)
    assert abs(m[0]) < 1e-14
    assert abs(m[2]) < 1e-14
    assert abs(m[4]) < 1e-14


def test_synthesize_noiseless_equals_exact():
    table = evolved_table()
    pathway = Pathway(chi=1.0, phi=PHI)
    ds = synthesize_dataset(pathway, "B", table, None, None, 4)
    assert np.allclose(ds.sample_moments, exact_port_moments(pathway, "B", table, 4))
    assert np.all(ds.standard_errors == 0)


def test_synthesize_estimator_variance():
    table = evolved_table(mu=1e-3)
    pathway = Pathway(chi=1.0, phi=PHI)
    exact = exact_port_moments(pathway, "A", table, 2)
    n = 10**4
    devs = [
        synthesize_dataset(pathway, "A", table, n, (3, k), 4).sample_moments[0] - exact[0]
        for k in range(1000)
    ]
    var_emp = np.var(np.real(devs)) + np.var(np.imag(devs))
    var_th = abs(exact[1] - exact[0] ** 2) / n
    assert var_emp == pytest.approx(var_th, rel=0.05)


def test_error_scaling_slope():
    table = evolved_table(mu=1e-3)
    pathway = Pathway(chi=1.0, phi=PHI)
    exact = exact_port_moments(pathway, "A", table, 1)[0]
    ns = [10**3, 10**4, 10**5, 10**6]
    means = []
    for n in ns:
        devs = [
            abs(synthesize_dataset(pathway, "A", table, n, (11, k), 4).sample_moments[0] - exact)
            for k in range(100)
        ]
        means.append(np.mean(devs))
    slope = np.polyfit(np.log(ns), np.log(means), 1)[0]
    assert slope == pytest.approx(-0.5, abs=0.1)


def test_per_shot_sampler_matches_moments():
    cfg = fock.FockConfig(24, 24)
    state = pure_cat_state(0.7, PHI, "parallel", cfg)
    pathway = Pathway(chi=1.2, phi=PHI)
    shots = sample_port_shots(pathway, "A", state, 200_000, seed=4)
    from mechcat.algebra import moments_from_state

    table = moments_from_state(state, 8)
    exact = exact_port_moments(pathway, "A", table, 3)
    for d in range(1, 4):
        emp = np.mean(shots**d)
        se = np.std(shots**d) / math.sqrt(len(shots))
        assert abs(emp - exact[d - 1].real) < 5 * se + 1e-12


def test_per_shot_requires_real_pathway():
    cfg = fock.FockConfig(10, 10)
    state = fock.ground_state(cfg)
    pathway = Pathway(phases=PhaseSet(zeta_1=0.3), chi=1.0, phi=PHI)
    with pytest.raises(ValueError):
        sample_port_shots(pathway, "A", state, 10, seed=0)


def test_default_phase_sets_order1_minimal():
    sets = default_phase_sets(1, phi=PHI, margin=0)
    assert len(sets) == 1  # four ports resolve the four first moments


def test_default_phase_sets_span_order4():
    sets = default_phase_sets(4, phi=PHI)
    keys = [k for k in verify._order_keys(4)]
    rows = []
    for ps in sets:
        pathway = Pathway(phases=ps, chi=1.0, phi=PHI)
        for port in PORTS:
            rows.append(verify._coefficient_row(pathway, port, keys, 4))
    rank = np.linalg.matrix_rank(np.array(rows))
    assert rank == len(keys) == 35


@pytest.mark.parametrize("configuration", ["parallel", "series"])
def test_noiseless_recovery_exact(configuration):
    table = evolved_table(configuration=configuration)
    run = run_verification(table, phi=PHI, n_samples=None, target_order=4)
    assert run.max_abs_deviation() < 1e-8


def test_recovered_commutator_identity():
    # <X1^2 P1 X2> = S/3 + i <X1 X2> inside the recovered table
    table = evolved_table()
    run = run_verification(table, phi=PHI, n_samples=None, target_order=4)
    rec = run.recovered_table
    s_sum = sum(rec.evaluate(canonicalize(w)) for w in symmetrized_expand(2, 1, 1, 0))
    assert rec.value((2, 1, 1, 0)) == pytest.approx(
        s_sum / 3.0 + 1j * rec.value((1, 0, 1, 0)), abs=1e-10
    )


def test_port_redundancy_noiseless():
    table = evolved_table()
    study = VerificationStudy(table, phi=PHI, target_order=4)
    full = study.run(None).recovered_table
    drop = [ds for ds in study.run(None).datasets if ds.port != "D"]
    reduced = recover_moments(drop, 4)
    worst = max(abs(full.entries[k] - reduced.entries[k]) for k in full.entries)
    assert worst < 1e-8


def test_rank_deficient_single_phase_set():
    table = evolved_table(order=8)
    study = VerificationStudy(table, phi=PHI, target_order=2, phase_sets=[PhaseSet()])
    with pytest.raises(RankDeficient) as err:
        study.run(None)
    assert err.value.missing_directions


def test_ill_conditioned_family():
    table = evolved_table(order=8)
    sets = [PhaseSet(zeta_1=k * 1e-5, zeta_2=k * 2e-5, zeta_3=k * 3e-5) for k in range(8)]
    study = VerificationStudy(table, phi=PHI, target_order=2, phase_sets=sets)
    with pytest.raises((IllConditioned, RankDeficient)):
        study.run(None)


def test_recovered_errors_scale_and_realness():
    table = evolved_table(mu=1e-3)
    study = VerificationStudy(table, phi=PHI, target_order=4)
    run = study.run(10**6, seed=2)
    rec = run.recovered_table
    assert rec.provenance == "recovered"
    assert rec.n_samples == 10**6
    # Hermitian words real within 3 propagated standard errors
    for key in [(2, 0, 0, 0), (0, 2, 0, 0), (0, 0, 2, 0), (4, 0, 0, 0)]:
        assert abs(rec.entries[key].imag) < 3 * rec.std_errors[key] + 1e-12
    # propagated errors scale as N^{-1/2}
    bigger = study.run(10**8, seed=2).recovered_table
    for key in [(2, 0, 0, 0), (0, 0, 0, 4)]:
        assert rec.std_errors[key] / bigger.std_errors[key] == pytest.approx(10.0, rel=0.05)


def test_sign_stability_small():
    table = evolved_table(mu=1e-3)
    from mechcat.criteria import build_s3

    s3_exact = build_s3(table).value
    study = VerificationStudy(table, phi=PHI, target_order=4)
    agree = sum(
        (build_s3(study.run(10**6, seed=k).recovered_table).value < 0) == (s3_exact < 0)
        for k in range(20)
    )
    assert agree >= 19


def test_json_round_trip_recovered():
    from mechcat.algebra import MomentTable

    table = evolved_table(mu=1e-3)
    study = VerificationStudy(table, phi=PHI, target_order=4)
    rec = study.run(10**5, seed=9).recovered_table
    back = MomentTable.from_json(rec.to_json())
    assert back.provenance == "recovered"
    assert back.n_samples == 10**5
    worst = max(abs(back.entries[k] - rec.entries[k]) for k in rec.entries)
    assert worst < 1e-12


def test_dataset_json_round_trip():
    from mechcat.verify import HomodyneDataset

    table = evolved_table(mu=1e-3)
    pathway = Pathway(phases=PhaseSet(zeta_1=0.5), chi=1.3, phi=PHI)
    ds = synthesize_dataset(pathway, "C", table, 10**5, (5, 1), 4)
    back = HomodyneDataset.from_json(ds.to_json())
    assert back.port == "C"
    assert back.pathway == ds.pathway
    assert back.n_samples == 10**5
    assert back.seed == (5, 1)
    assert np.allclose(back.sample_moments, ds.sample_moments)
    assert np.allclose(back.standard_errors, ds.standard_errors)
