import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latentq import qmath
from latentq.qmath import KrausMap
from latentq.states_effects import LqtState, compose_states
from latentq.theory import TRIVIAL_SYSTEM, ElementaryLabel, LatentConfig, compose_systems, qmap
from latentq.transforms import (
    LatentTransformation,
    NoisyPermutation,
    apply_noisy_perm,
    elementary,
    generator_deviation,
    identity,
    noisy_perm_channel,
    par_compose,
    preparation,
    random_noisy_perm,
    random_transformation,
    realize,
    seq_compose,
    star,
    star_channel,
    swap_transformation,
)


def _mixed_cfg():
    labels = {"Q": ElementaryLabel("Q", 2), "R": ElementaryLabel("R", 3)}
    return LatentConfig(labels, 2, np.array([[0.7, 0.2], [0.2, 0.3]]), {
        ("Q", "R"): (3, np.diag([0.6, 0.3, 0.1]).astype(complex)),
        ("R", "R"): (2, np.array([[0.5, 0.5j], [-0.5j, 0.5]])),
    })


@pytest.fixture
def mixed_cfg():
    return _mixed_cfg()


def partial_injections(n, m):
    """Every partial injection ``{0..n-1} -> {0..m-1}``."""
    for r in range(min(n, m) + 1):
        for ins in itertools.combinations(range(n), r):
            for outs in itertools.permutations(range(m), r):
                yield dict(zip(ins, outs))


@st.composite
def raw_noisy_perms(draw, max_wires=4):
    """Reduced forms that are not necessarily canonical."""
    n = draw(st.integers(0, max_wires))
    k = draw(st.integers(0, max_wires))
    w = n + k
    kp = draw(st.integers(0, n))  # reduced form: traced wires come from the inputs
    perm = draw(st.permutations(range(w)))
    fresh_targets = sorted(perm[:k])
    # push the fresh wires' images above k' so nothing fresh is traced at once
    if k and fresh_targets[0] < kp:
        lows = [p for p in perm[k:] if p >= kp]
        highs = [p for p in perm[:k] if p < kp]
        swap = dict(zip(highs, lows[:len(highs)]))
        swap.update({v: u for u, v in swap.items()})
        perm = [swap.get(p, p) for p in perm]
    try:
        return NoisyPermutation(k, kp, tuple(perm))
    except ValueError:
        return NoisyPermutation.from_mapping(n, n, {})


# ------------------------------------------------------------------ noisy permutations


@given(st.integers(0, 4), st.integers(0, 4), st.data())
def test_from_mapping_round_trip(n, m, data):
    mapping = data.draw(st.sampled_from(list(partial_injections(n, m))))
    z = NoisyPermutation.from_mapping(n, m, mapping)
    assert z.is_reduced()
    assert (z.n, z.m) == (n, m)
    assert z.mapping() == mapping
    assert set(z.fresh_outputs()) == set(range(m)) - set(mapping.values())
    assert set(z.traced_inputs()) == set(range(n)) - set(mapping)


@given(raw_noisy_perms())
def test_canonical_keeps_the_partial_injection(z):
    c = z.canonical()
    assert c == z and hash(c) == hash(z)
    assert c.mapping() == z.mapping()
    assert c.canonical().perm == c.perm


def test_reduced_form_required():
    with pytest.raises(ValueError):
        NoisyPermutation(1, 1, (0, 1))  # the fresh wire would be traced immediately
    with pytest.raises(ValueError):
        NoisyPermutation(0, 0, (0, 0))
    with pytest.raises(ValueError):
        NoisyPermutation.from_mapping(2, 2, {0: 1, 1: 1})


def test_composition_of_partial_injections():
    for n, m, r in [(2, 2, 2), (1, 2, 3), (3, 2, 1)]:
        for f in partial_injections(n, m):
            for g in partial_injections(m, r):
                got = NoisyPermutation.from_mapping(m, r, g).after(NoisyPermutation.from_mapping(n, m, f))
                assert got.mapping() == {i: g[p] for i, p in f.items() if p in g}


@settings(max_examples=50)
@given(st.integers(0, 3), st.integers(0, 3), st.integers(0, 3), st.integers(0, 3), st.data())
def test_noisy_perm_category_laws(a, b, c, d, data):
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
    f, g, h = random_noisy_perm(a, b, rng), random_noisy_perm(b, c, rng), random_noisy_perm(c, d, rng)
    assert h.after(g.after(f)) == h.after(g).after(f)
    assert f.after(NoisyPermutation.identity(a)) == f == NoisyPermutation.identity(b).after(f)
    assert h.after(g).is_reduced() and f.parallel(h).is_reduced()
    assert NoisyPermutation.identity(0).parallel(f) == f
    assert f.parallel(g).parallel(h) == f.parallel(g.parallel(h))


def test_reset_idempotent():
    z = NoisyPermutation.reset(1)
    assert z.after(z) == z
    assert z.mapping() == {}
    assert (z.k, z.k_prime) == (1, 1)


# ------------------------------------------------------------------ star product


def test_star_rule_exhaustive():
    for n1, m1, n2, m2 in [(1, 1, 1, 1), (2, 1, 1, 2), (2, 2, 2, 1)]:
        for lf in partial_injections(n1, m1):
            for rf in partial_injections(n2, m2):
                s = star(NoisyPermutation.from_mapping(n1, m1, lf), NoisyPermutation.from_mapping(n2, m2, rf))
                expect = {j * n1 + i: rf[j] * m1 + lf[i] for i in lf for j in rf}
                assert s.mapping() == expect
                assert s.is_reduced()


@settings(max_examples=50)
@given(st.lists(st.integers(0, 2), min_size=6, max_size=6), st.integers(0, 2**32 - 1))
def test_star_functorial(sizes, seed):
    rng = np.random.default_rng(seed)
    a, b, c, x, y, z = sizes
    f1, g1 = random_noisy_perm(a, b, rng), random_noisy_perm(b, c, rng)
    f2, g2 = random_noisy_perm(x, y, rng), random_noisy_perm(y, z, rng)
    assert star(g1.after(f1), g2.after(f2)) == star(g1, g2).after(star(f1, f2))
    assert star(NoisyPermutation.identity(a), NoisyPermutation.identity(x)) == NoisyPermutation.identity(a * x)


def test_star_single_reset_resets_whole_row():
    ident, reset = NoisyPermutation.identity(1), NoisyPermutation.reset(1)
    assert star(reset, ident).mapping() == {}
    assert star(ident, reset).mapping() == {}
    two = star(NoisyPermutation.from_mapping(2, 2, {0: 0}), NoisyPermutation.identity(2))
    # pairs (j, i) with i = 1 are fresh, those with i = 0 survive
    assert two.mapping() == {0: 0, 2: 2}


# ------------------------------------------------------------------ two routes agree


@settings(max_examples=40, deadline=None)
@given(raw_noisy_perms(max_wires=3), st.integers(0, 2**32 - 1))
def test_kraus_route_matches_literal_route(z, seed):
    cfg = _mixed_cfg()
    q, r = cfg.label("Q"), cfg.label("R")
    rng = np.random.default_rng(seed)
    kinds = [(q, q), (r, q), (r, r)]
    # every output wire gets a random pair type; surviving inputs inherit theirs
    out_pairs = [kinds[int(rng.integers(3))] for _ in range(z.m)]
    in_pairs = [kinds[int(rng.integers(3))] for _ in range(z.n)]
    for i, p in z.mapping().items():
        in_pairs[i] = out_pairs[p]
    din = qmath.shape_dim([cfg.latent_dim(*p) for p in in_pairs])
    rho = qmath.random_density(din, rng)
    lit = apply_noisy_perm(z, rho, in_pairs, out_pairs, cfg)
    kraus = noisy_perm_channel(z, in_pairs, out_pairs, cfg)
    assert kraus.is_channel()
    assert np.abs(kraus.apply(rho) - lit).max() < 1e-13
    canon = apply_noisy_perm(z.canonical(), rho, in_pairs, out_pairs, cfg)
    assert np.abs(canon - lit).max() < 1e-13


def test_noisy_perm_channel_rejects_bad_wires(mixed_cfg):
    q, r = mixed_cfg.label("Q"), mixed_cfg.label("R")
    with pytest.raises(ValueError):
        noisy_perm_channel(NoisyPermutation.identity(1), [(q, q)], [(r, q)], mixed_cfg)
    with pytest.raises(ValueError):
        noisy_perm_channel(NoisyPermutation.identity(2), [(q, q)], [(q, q)], mixed_cfg)


# ------------------------------------------------------------------ realization


def test_reset_example(lqt, rng):
    """A reset on one qubit replaces its link to an ancilla qubit by the latent state."""
    q = lqt.label("Q")
    u = qmath.random_unitary(2, rng)
    t = elementary(KrausMap.unitary(u, (2,)), q, reset=True)
    big = realize(t, lqt.system("Q"), lqt)  # canonical factors: [L(1,0), O0, O1]
    rho = qmath.random_density(8, rng)
    xi = lqt.default_state
    reduced = qmath.partial_trace(rho, (2, 2, 2), [1, 2])
    uu = np.kron(u, np.eye(2))
    expect = np.kron(xi, uu @ reduced @ uu.conj().T)
    assert np.abs(big.apply(rho) - expect).max() < 1e-14
    keep = realize(elementary(KrausMap.unitary(u, (2,)), q, reset=False), lqt.system("Q"), lqt)
    full = np.kron(np.eye(2), uu)
    assert np.abs(keep.apply(rho) - full @ rho @ full.conj().T).max() < 1e-14


def test_realize_with_two_ancilla_chars(lqt, rng):
    # N = Q, E = QQ; canonical order [L10, L20, L21, O0, O1, O2]; L10 and L20 link N to E
    t = elementary(KrausMap.identity((2,)), lqt.label("Q"), reset=True)
    big = realize(t, lqt.system("QQ"), lqt)
    xi = lqt.default_state
    rho = qmath.random_density(64, rng)
    reduced = qmath.partial_trace(rho, (2,) * 6, [2, 3, 4, 5])
    expect = qmath.kron(xi, xi, reduced)
    assert np.abs(big.apply(rho) - expect).max() < 1e-14


def test_realize_identity_and_trivial_ancilla(mixed_cfg, rng):
    n = mixed_cfg.system("QR")
    for e in ["", "Q", "R"]:
        ident = realize(identity(n, mixed_cfg), mixed_cfg.system(e), mixed_cfg)
        d = ident.din
        assert qmath.map_deviation(ident, KrausMap.identity((d,)), rng) < 1e-14
    t = random_transformation(n, mixed_cfg.system("RQ"), mixed_cfg, rng)
    assert realize(t, TRIVIAL_SYSTEM, mixed_cfg) is not None
    assert qmath.map_deviation(realize(t, TRIVIAL_SYSTEM, mixed_cfg), t.op_part, rng) == 0.0


def test_realize_is_functorial(lqt, rng):
    e = lqt.system("Q")
    for _ in range(5):
        f = random_transformation(lqt.system("Q"), lqt.system("QQ"), lqt, rng)
        g = random_transformation(lqt.system("QQ"), lqt.system("Q"), lqt, rng)
        whole = realize(seq_compose(g, f), e, lqt)
        steps = realize(g, e, lqt).after(realize(f, e, lqt))
        assert qmath.map_deviation(whole, steps, rng) < 1e-12


def test_preparations_compose_like_states(mixed_cfg, rng):
    for a_sys, b_sys in [("Q", "R"), ("QR", "Q"), ("R", "RQ")]:
        a = qmath.random_density(qmap(mixed_cfg.system(a_sys), mixed_cfg).total_dim, rng)
        b = qmath.random_density(qmap(mixed_cfg.system(b_sys), mixed_cfg).total_dim, rng)
        pa = preparation(a, mixed_cfg.system(a_sys), mixed_cfg)
        pb = preparation(b, mixed_cfg.system(b_sys), mixed_cfg)
        joint = par_compose(pa, pb, mixed_cfg).op_part.apply(np.ones((1, 1)))
        expect = compose_states([LqtState(mixed_cfg.system(a_sys), a), LqtState(mixed_cfg.system(b_sys), b)],
                                mixed_cfg).op
        assert np.abs(joint - expect).max() < 1e-14


def test_elementary_parallel_against_kron(lqt, rng):
    q = lqt.label("Q")
    xi = lqt.default_state
    for ra, rb in itertools.product([False, True], repeat=2):
        ua, ub = qmath.random_unitary(2, rng), qmath.random_unitary(2, rng)
        a = elementary(KrausMap.unitary(ua, (2,)), q, ra)
        b = elementary(KrausMap.unitary(ub, (2,)), q, rb)
        joint = par_compose(a, b, lqt).op_part
        rho = qmath.random_density(8, rng)
        if ra or rb:
            rest = qmath.partial_trace(rho, (2, 2, 2), [1, 2])
            pre = np.kron(xi, rest)
        else:
            pre = rho
        w = qmath.kron(np.eye(2), ua, ub)
        assert np.abs(joint.apply(rho) - w @ pre @ w.conj().T).max() < 1e-14


# ------------------------------------------------------------------ parallel and swap


def test_parallel_units(mixed_cfg, rng):
    n = mixed_cfg.system("QR")
    ii = par_compose(identity(n, mixed_cfg), identity(mixed_cfg.system("R"), mixed_cfg), mixed_cfg)
    big = identity(mixed_cfg.system("QRR"), mixed_cfg)
    assert generator_deviation(ii, big) < 1e-15
    t = random_transformation(n, mixed_cfg.system("R"), mixed_cfg, rng)
    unit = identity(TRIVIAL_SYSTEM, mixed_cfg)
    assert generator_deviation(par_compose(t, unit, mixed_cfg), t) < 1e-15
    assert generator_deviation(par_compose(unit, t, mixed_cfg), t) < 1e-15


def test_channels_compose_to_channels(mixed_cfg, rng):
    a = random_transformation(mixed_cfg.system("Q"), mixed_cfg.system("R"), mixed_cfg, rng, strict=False)
    b = random_transformation(mixed_cfg.system("R"), mixed_cfg.system("Q"), mixed_cfg, rng, strict=False)
    assert a.op_part.is_channel() and b.op_part.is_channel()
    assert seq_compose(b, a).op_part.is_channel()
    assert par_compose(a, b, mixed_cfg).op_part.is_channel()
    assert realize(a, mixed_cfg.system("QR"), mixed_cfg).is_channel()
    c = random_transformation(mixed_cfg.system("Q"), mixed_cfg.system("Q"), mixed_cfg, rng)
    assert par_compose(c, b, mixed_cfg).op_part.is_cptni()


def test_swap_moves_product_states(mixed_cfg, rng):
    for first, second in [("Q", "R"), ("QR", "R"), ("R", "QR"), ("Q", "")]:
        f, s = mixed_cfg.system(first), mixed_cfg.system(second)
        a = LqtState(f, qmath.random_density(qmap(f, mixed_cfg).total_dim, rng))
        b = LqtState(s, qmath.random_density(qmap(s, mixed_cfg).total_dim, rng))
        sw = swap_transformation(f, s, mixed_cfg)
        out = sw.op_part.apply(compose_states([a, b], mixed_cfg).op)
        assert np.abs(out - compose_states([b, a], mixed_cfg).op).max() < 1e-15


def test_swap_with_trivial_and_involution(mixed_cfg):
    n = mixed_cfg.system("QR")
    assert generator_deviation(swap_transformation(n, TRIVIAL_SYSTEM, mixed_cfg), identity(n, mixed_cfg)) == 0.0
    e = mixed_cfg.system("R")
    back = seq_compose(swap_transformation(e, n, mixed_cfg), swap_transformation(n, e, mixed_cfg))
    assert generator_deviation(back, identity(compose_systems(n, e), mixed_cfg)) < 1e-15


def test_swap_against_permutation_operator(lqt):
    # Q ⊠ Q: [L10, O0, O1] -> [L10, O1, O0]
    sw = swap_transformation(lqt.system("Q"), lqt.system("Q"), lqt)
    expect = qmath.permutation_operator((0, 2, 1), (2, 2, 2))
    assert np.array_equal(sw.op_part.kraus[0], expect)


def test_star_channel_intertwines(mixed_cfg, rng):
    a = random_transformation(mixed_cfg.system("Q"), mixed_cfg.system("R"), mixed_cfg, rng)
    b = random_transformation(mixed_cfg.system("R"), mixed_cfg.system("RQ"), mixed_cfg, rng)
    ab, ba = par_compose(a, b, mixed_cfg), par_compose(b, a, mixed_cfg)
    lhs = seq_compose(swap_transformation(a.output_system, b.output_system, mixed_cfg), ab)
    rhs = seq_compose(ba, swap_transformation(a.input_system, b.input_system, mixed_cfg))
    assert generator_deviation(lhs, rhs, rng) < 1e-12
    assert star_channel(a, b, mixed_cfg).is_channel()


# ------------------------------------------------------------------ misc


def test_generator_deviation(lqt, rng):
    q = lqt.system("Q")
    t = random_transformation(q, q, lqt, rng)
    assert generator_deviation(t, t) == 0.0
    other = LatentTransformation(q, q, t.op_part, NoisyPermutation.reset(1) if t.latent_part.mapping()
                                 else NoisyPermutation.identity(1))
    assert generator_deviation(t, other) == float("inf")
    scaled = LatentTransformation(q, q, KrausMap(t.op_part.input_shape, t.op_part.output_shape,
                                                 0.5 * t.op_part.kraus), t.latent_part)
    assert 0 < generator_deviation(t, scaled) < float("inf")
    assert generator_deviation(t, identity(lqt.system("QQ"), lqt)) == float("inf")


def test_construction_errors(lqt, rng):
    q, qq = lqt.system("Q"), lqt.system("QQ")
    with pytest.raises(ValueError):
        LatentTransformation(q, qq, KrausMap.identity((2,)), NoisyPermutation.identity(1))
    with pytest.raises(ValueError):
        LatentTransformation(q, q, KrausMap.identity((3,)), NoisyPermutation.identity(1)).validate(lqt)
    with pytest.raises(ValueError):
        LatentTransformation(q, q, KrausMap.unitary(2 * np.eye(2), (2,)), NoisyPermutation.identity(1)).validate(lqt)
    t = random_transformation(q, qq, lqt, rng)
    with pytest.raises(ValueError):
        seq_compose(t, t)
    with pytest.raises(ValueError):
        par_compose(t, t, lqt, mutation="no_such_bug")


def test_random_transformation_links_same_labels(mixed_cfg, rng):
    inp, out = mixed_cfg.system("QR"), mixed_cfg.system("RQ")
    for _ in range(20):
        t = random_transformation(inp, out, mixed_cfg, rng).validate(mixed_cfg)
        assert all(inp[i] == out[p] for i, p in t.latent_part.mapping().items())
