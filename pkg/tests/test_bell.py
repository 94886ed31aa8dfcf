import itertools

import numpy as np
import pytest

from latentq import bell, qmath
from latentq.states_effects import LqtState, Povm, embed_effect
from latentq.theory import ElementaryLabel, LatentConfig, compose_systems, qmap

SQ2 = np.sqrt(2)


def qt_chsh_oracle():
    """CHSH for the same settings, computed on plain two-qubit matrices."""
    z, x = np.diag([1.0, -1.0]), np.array([[0.0, 1.0], [1.0, 0.0]])
    phi = np.array([1, 0, 0, 1]) / SQ2
    a_obs = [z, x]
    b_obs = [(z + x) / SQ2, (z - x) / SQ2]
    e = [[phi @ np.kron(a, b) @ phi for b in b_obs] for a in a_obs]
    return e[0][0] + e[0][1] + e[1][0] - e[1][1]


def test_chsh_reaches_tsirelson(lqt):
    s = bell.chsh_scenario(lqt)
    table = bell.correlations_lqt(s, lqt)
    assert len(table) == 16
    assert abs(bell.chsh_value(table) - 2 * SQ2) < 1e-6
    assert abs(bell.chsh_value(table) - qt_chsh_oracle()) < 1e-12
    assert bell.check_bell_equivalence(s, lqt).passed


def test_chsh_qt_and_lqt_tables_agree(lqt, qt):
    a = bell.correlations_lqt(bell.chsh_scenario(lqt), lqt)
    b = bell.correlations_lqt(bell.chsh_scenario(qt), qt)
    assert a.max_deviation(b) < 1e-12


@pytest.mark.parametrize("seed", range(20))
def test_random_scenarios(lqt, seed):
    rng = np.random.default_rng(seed)
    sizes = [[1, 1], [1, 2], [2, 1], [1, 1, 1]][seed % 4]
    s = bell.random_scenario(lqt, rng, sizes, settings=2, outcomes=int(rng.integers(2, 4))).validate(lqt)
    report = bell.check_bell_equivalence(s, lqt)
    assert report.passed, report
    assert bell.correlations_lqt(s, lqt).normalization_error() < 1e-12


def test_random_scenarios_mixed_labels():
    labels = {"Q": ElementaryLabel("Q", 2), "R": ElementaryLabel("R", 3)}
    cfg = LatentConfig(labels, 2, np.array([[0.6, 0.2j], [-0.2j, 0.4]]), {("Q", "R"): (3, np.eye(3) / 3)})
    rng = np.random.default_rng(3)
    q, r = cfg.system("Q"), cfg.system("R")
    for systems in [(q, r), (r, q), (cfg.system("QR"), q)]:
        parties = [bell.Party(s, (bell.random_povm(s, cfg, rng), bell.random_povm(s, cfg, rng, 3))) for s in systems]
        whole = compose_systems(*systems)
        rho = qmath.random_density(qmap(whole, cfg).total_dim, rng)
        s = bell.Scenario(tuple(parties), LqtState(whole, rho))
        assert bell.check_bell_equivalence(s, cfg).passed


def test_round_trip_through_qt(lqt, rng):
    systems = [lqt.system("Q"), lqt.system("QQ")]
    rho = qmath.random_density(2 * 8, rng)
    lqt_state = bell.from_qt_state(rho, systems, lqt)
    parties = tuple(bell.Party(s, (bell.random_povm(s, lqt, rng),)) for s in systems)
    back, record = bell.to_qt_state(bell.Scenario(parties, lqt_state), lqt)
    assert np.abs(back - rho).max() < 1e-15
    assert len(record.traced) == 2  # two pairs link the parties


def _product_scenario(cfg, rng, party_systems, prep_systems, weights=(1.0,), operational=False):
    parties = []
    for s in party_systems:
        if operational:
            d = qmap(s, cfg).operational_dim
            u = qmath.random_unitary(d, rng)
            p0 = u @ np.diag(np.eye(d)[0]) @ u.conj().T
            ops = [embed_effect(p0, s, cfg).op, embed_effect(np.eye(d) - p0, s, cfg).op]
            parties.append(bell.Party(s, (Povm.from_ops(s, ops), bell.random_povm(s, cfg, rng))))
        else:
            parties.append(bell.Party(s, (bell.random_povm(s, cfg, rng), bell.random_povm(s, cfg, rng))))
    preps = []
    for w in weights:
        parts = tuple(LqtState(p, qmath.random_density(qmap(p, cfg).total_dim, rng)) for p in prep_systems)
        preps.append((w, parts))
    return bell.Scenario(tuple(parties), preparations=tuple(preps))


def test_product_state_table_factorizes(lqt, rng):
    q = lqt.system("Q")
    s = _product_scenario(lqt, rng, [q, q], [q, q])
    table = bell.correlations_lqt(s, lqt)
    ma, mb = bell.correlations_lqt(s, lqt).marginal(0), table.marginal(1)
    for (x, a), p in table.probs.items():
        pa = sum(table[(x, (a[0], b))] for b in range(2))
        pb = sum(table[(x, (b, a[1]))] for b in range(2))
        assert abs(p - pa * pb) < 1e-14
    assert ma.normalization_error() < 1e-14 and mb.normalization_error() < 1e-14


@pytest.mark.parametrize("weights", [(1.0,), (0.3, 0.7)])
def test_crossed_partition_structure(lqt, weights):
    rng = np.random.default_rng(11)
    q, qq = lqt.system("Q"), lqt.system("QQ")
    # parties split Q | QQ, preparations split QQ | Q
    s = _product_scenario(lqt, rng, [q, qq], [qq, q], weights)
    report = bell.check_scenario_structure(s, lqt)
    assert report.passed, report
    assert bell.check_bell_equivalence(s, lqt).passed


def test_structure_with_operational_effects(lqt):
    rng = np.random.default_rng(5)
    q, qq = lqt.system("Q"), lqt.system("QQ")
    s = _product_scenario(lqt, rng, [qq, q], [q, qq], (0.5, 0.5), operational=True)
    assert bell.check_scenario_structure(s, lqt).passed


def test_single_party_is_a_marginal(lqt, rng):
    q = lqt.system("Q")
    st = LqtState(q, qmath.random_density(2, rng))
    p = bell.random_povm(q, lqt, rng, 3)
    s = bell.Scenario((bell.Party(q, (p,)),), st)
    table = bell.correlations_lqt(s, lqt)
    assert len(table) == 3
    for (x, a), v in table.probs.items():
        assert abs(v - np.trace(p.outcomes[a[0]].op @ st.op).real) < 1e-15
    assert bell.check_bell_equivalence(s, lqt).passed


def test_wirings_stay_quantum(lqt):
    rng = np.random.default_rng(21)
    s = bell.random_scenario(lqt, rng, [1, 2], settings=2, outcomes=3)
    wired = bell.wire(bell.wire(s, 0, groups=[[0, 2], [1]]), 1, mix=(0.3, 0, 1))
    assert len(wired.parties[1].settings) == 3
    report = bell.check_bell_equivalence(wired, lqt)
    assert report.passed, report
    # coarse-graining adds up the original entries
    t0, t1 = bell.correlations_lqt(s, lqt), bell.correlations_lqt(wired, lqt)
    for x in itertools.product(range(2), range(2)):
        for b in range(3):
            assert abs(t1[(x, (0, b))] - t0[(x, (0, b))] - t0[(x, (2, b))]) < 1e-14


def test_sampling_stays_below_tsirelson(lqt, qt):
    for cfg in (lqt, qt):
        res = bell.chsh_sampling(cfg, 2000, np.random.default_rng(0))
        assert res.within_bound
        assert 2.0 < res.max_chsh <= bell.TSIRELSON + 1e-6
        assert "not a proof" in res.note


@pytest.mark.parametrize("latent, n, expect", [
    (2, 2, (16, 64)),
    (1, 2, (16, 16)),
    (2, 3, (64, 4096)),
    (1, 3, (64, 64)),
])
def test_tomography_span(latent, n, expect):
    cfg = LatentConfig.simplest(latent)
    assert bell.tomography_span(cfg.system("Q" * n), cfg) == expect


def test_tomography_span_mixed_dims_standard():
    labels = {"Q": ElementaryLabel("Q", 2), "R": ElementaryLabel("R", 3)}
    cfg = LatentConfig(labels, 1)
    assert bell.tomography_span(cfg.system("QR"), cfg) == (36, 36)
    with pytest.raises(ValueError):
        bell.tomography_span(cfg.system("Q"), cfg)


def test_effect_basis_spans_hermitian():
    for d in (2, 3):
        basis = bell.effect_basis(d)
        assert len(basis) == d * d
        assert all(qmath.is_effect(e) for e in basis)
        assert bell._span_rank(basis) == d * d


def test_tomography_witness(lqt):
    w = bell.tomography_violation_witness(lqt)
    assert w.product_deviation < 1e-12
    assert abs(w.trace_distance - 1) < 1e-12
    assert w.success >= 1 - 1e-9
    assert w.pvm.is_pvm()
    assert qmath.is_density(w.state1) and qmath.is_density(w.state2)


def test_no_witness_in_standard_qt(qt):
    assert bell.tomography_violation_witness(qt) is None
    assert bell.tomography_violation_witness(qt, qt.system("QQ")) is None


def test_witness_with_mixed_latent_state():
    xi = np.diag([0.8, 0.2]).astype(complex)
    cfg = LatentConfig.simplest(2, state=xi)
    w = bell.tomography_violation_witness(cfg)
    assert w.product_deviation < 1e-12
    # ξ' is the eigenvector of ξ with the smaller weight
    assert abs(w.success - (1 - 0.5 * 0.2)) < 1e-12


def test_csv_rows(lqt):
    s = bell.chsh_scenario(lqt)
    t = bell.correlations_lqt(s, lqt)
    lines = bell.table_to_csv(t, t).splitlines()
    assert lines[0] == "settings,outcomes,p_lqt,p_qt"
    assert len(lines) == 17
    assert lines[1].startswith("0 0,0 0,")


def test_scenario_validation(lqt, rng):
    q = lqt.system("Q")
    p = bell.Party(q, (bell.random_povm(q, lqt, rng),))
    with pytest.raises(ValueError):
        bell.Scenario((p, p), LqtState(q, np.eye(2) / 2))
    with pytest.raises(ValueError):
        bell.Scenario((p,))
    with pytest.raises(ValueError):
        bell.Party(q, ())
    st = LqtState(q, np.eye(2) / 2)
    with pytest.raises(ValueError):
        bell.Scenario((p,), preparations=((0.5, (st,)),))
    with pytest.raises(ValueError):
        bell.chsh_scenario(LatentConfig.simplest(2, {"T": 3}))
