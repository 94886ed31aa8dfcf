"""Randomised, realization-level checks of the composition axioms.

Every equality between transformations is tested as equality of the quantum
operations they induce next to each ancilla in the pool.  Maps are compared on
random low-rank probe inputs (max-abs entry difference of the outputs), which
separates distinct linear maps with probability one and avoids forming Choi
matrices of size ``dim^2``.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import qmath
from .states_effects import compose_states, LqtState
from .strings import times_symmetry_perm
from .theory import LatentConfig, SystemString, TRIVIAL_SYSTEM, compose_systems, qmap
from . import transforms as tf
from .transforms import LatentTransformation

DEFAULT_TOL = 1e-9


@dataclass
class CheckReport:
    check_name: str
    trials: int
    max_deviation: float
    tolerance: float
    passed: bool
    seed: int
    witness: dict | None = None
    skipped: int = 0  # (trial, ancilla) combinations above the dimension cap

    def __post_init__(self):
        self.passed = bool(self.max_deviation < self.tolerance)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


@dataclass
class TheoryUnderTest:
    cfg: LatentConfig
    ancilla_pool: tuple[SystemString, ...] = ()
    seed: int = 0
    trials: int = 100
    tol: float = DEFAULT_TOL
    mutation: str | None = None
    max_dim: int = 256

    def __post_init__(self):
        pool = tuple(self.ancilla_pool)
        if TRIVIAL_SYSTEM not in pool:
            pool = (TRIVIAL_SYSTEM,) + pool
        self.ancilla_pool = pool
        tf._check_mutation(self.mutation)
        if not self.cfg.labels:
            raise ValueError("configuration has no labels")

    @classmethod
    def default(cls, cfg: LatentConfig, **kw) -> "TheoryUnderTest":
        """Pool ``{ε, B, BB}`` for the alphabetically first label ``B``; realizations
        above ``max_dim`` are skipped and counted."""
        base = cfg.label(sorted(cfg.labels)[0])
        return cls(cfg, (TRIVIAL_SYSTEM, SystemString((base,)), SystemString((base, base))), **kw)

    @property
    def base(self):
        return self.cfg.label(sorted(self.cfg.labels)[0])

    def system(self, n: int) -> SystemString:
        return SystemString((self.base,) * n)

    def rng(self, name: str) -> np.random.Generator:
        return np.random.default_rng([self.seed, zlib.crc32(name.encode())])

    # composition with the theory's mutation switched in
    def par(self, a, b):
        return tf.par_compose(a, b, self.cfg, self.mutation)

    def seq(self, g, f):
        return tf.seq_compose(g, f, self.mutation)

    def swap(self, a, b):
        return tf.swap_transformation(a, b, self.cfg, self.mutation)

    def ident(self, s):
        return tf.identity(s, self.cfg)

    def random(self, n_in: int, n_out: int, rng) -> LatentTransformation:
        return tf.random_transformation(self.system(n_in), self.system(n_out), self.cfg, rng)


class _Tracker:
    def __init__(self, tut: TheoryUnderTest, name: str):
        self.tut, self.name = tut, name
        self.rng = tut.rng(name)
        self.worst = 0.0
        self.witness = None
        self.skipped = 0

    def record(self, dev: float, **info) -> None:
        if dev > self.worst:
            self.worst = dev
            if dev >= self.tut.tol:
                self.witness = {"deviation": dev, **{k: repr(v) for k, v in info.items()}}

    def same_realization(self, s: LatentTransformation, t: LatentTransformation, trial: int,
                         what: str = "") -> None:
        if (s.input_system, s.output_system) != (t.input_system, t.output_system):
            self.record(float("inf"), trial=trial, what=what, reason="type mismatch")
            return
        cfg = self.tut.cfg
        for anc in self.tut.ancilla_pool:
            din = qmap(compose_systems(s.input_system, anc), cfg).total_dim
            dout = qmap(compose_systems(s.output_system, anc), cfg).total_dim
            if max(din, dout) > self.tut.max_dim:
                self.skipped += 1
                continue
            dev = qmath.map_deviation(tf.realize(s, anc, cfg), tf.realize(t, anc, cfg), self.rng)
            self.record(dev, trial=trial, what=what, ancilla=anc)

    def matches_product(self, whole: LatentTransformation, steps: Sequence[LatentTransformation],
                        trial: int, what: str = "") -> None:
        """``realize(whole, E)`` against the product of ``realize(step, E)`` (first step first)."""
        cfg = self.tut.cfg
        for anc in self.tut.ancilla_pool:
            dims = [qmap(compose_systems(t.input_system, anc), cfg).total_dim for t in steps]
            dims.append(qmap(compose_systems(steps[-1].output_system, anc), cfg).total_dim)
            if max(dims) > self.tut.max_dim:
                self.skipped += 1
                continue
            maps = [tf.realize(t, anc, cfg) for t in steps]
            target = tf.realize(whole, anc, cfg)
            dev = 0.0
            for _ in range(3):
                a = self.rng.normal(size=(target.din, 2)) + 1j * self.rng.normal(size=(target.din, 2))
                a /= np.linalg.norm(a)
                rho = maps[0].apply_factored(a)
                for m in maps[1:]:
                    rho = m.apply(rho)
                dev = max(dev, float(np.max(np.abs(target.apply_factored(a) - rho))))
            self.record(dev, trial=trial, what=what, ancilla=anc)

    def report(self) -> CheckReport:
        return CheckReport(self.name, self.tut.trials, self.worst, self.tut.tol, True,
                           self.tut.seed, self.witness, self.skipped)


def check_interchange(tut: TheoryUnderTest) -> CheckReport:
    """``(b∘a) ⊠ (d∘c) = (b⊠d) ∘ (a⊠c)``."""
    tr = _Tracker(tut, "interchange")
    r = tr.rng
    for trial in range(tut.trials):
        x, y, z = (int(k) for k in r.choice([0, 1, 1, 1], 3))
        u, v, w = (int(k) for k in r.choice([0, 1, 1, 1], 3))
        a, b = tut.random(x, y, r), tut.random(y, z, r)
        c, d = tut.random(u, v, r), tut.random(v, w, r)
        lhs = tut.par(tut.seq(b, a), tut.seq(d, c))
        rhs = tut.seq(tut.par(b, d), tut.par(a, c))
        tr.same_realization(lhs, rhs, trial, "interchange")
    return tr.report()


def check_assoc_parallel(tut: TheoryUnderTest) -> CheckReport:
    """``(a⊠b)⊠c = a⊠(b⊠c)``, including the case where two factors are identities."""
    tr = _Tracker(tut, "assoc_parallel")
    r = tr.rng
    types = [(1, 1), (0, 1), (1, 0)]
    for trial in range(tut.trials):
        parts = [types[int(i)] for i in r.integers(0, 3, 3)]
        ts = [tut.random(n, m, r) for n, m in parts]
        if trial % 4 == 3:
            ts[1], ts[2] = tut.ident(tut.system(1)), tut.ident(tut.system(1))
        a, b, c = ts
        tr.same_realization(tut.par(tut.par(a, b), c), tut.par(a, tut.par(b, c)), trial)
    return tr.report()


def check_assoc_sequential(tut: TheoryUnderTest) -> CheckReport:
    """``c∘(b∘a) = (c∘b)∘a`` on single and two-label systems (including swaps),
    and both agree with composing the realized quantum operations."""
    tr = _Tracker(tut, "assoc_sequential")
    r = tr.rng
    for trial in range(tut.trials):
        n = 1 + trial % 2
        maps = []
        for _ in range(3):
            if n == 2 and r.random() < 0.3:
                maps.append(tut.swap(tut.system(1), tut.system(1)))
            else:
                maps.append(tut.random(n, n, r))
        a, b, c = maps
        whole = tut.seq(c, tut.seq(b, a))
        tr.same_realization(whole, tut.seq(tut.seq(c, b), a), trial, "associativity")
        if trial % 5 == 0:
            tr.matches_product(whole, [a, b, c], trial, "functoriality")
    return tr.report()


def check_identity_laws(tut: TheoryUnderTest) -> CheckReport:
    """``I∘T = T = T∘I`` and ``I_A ⊠ I_B = I_AB``."""
    tr = _Tracker(tut, "identity_laws")
    r = tr.rng
    for trial in range(tut.trials):
        n, m = int(r.integers(0, 3)), int(r.integers(0, 3))
        t = tut.random(n, m, r)
        tr.same_realization(tut.seq(tut.ident(t.output_system), t), t, trial, "left")
        tr.same_realization(tut.seq(t, tut.ident(t.input_system)), t, trial, "right")
        if trial % 10 == 0:
            a, b = tut.system(n), tut.system(m)
            tr.same_realization(tut.par(tut.ident(a), tut.ident(b)),
                                tut.ident(compose_systems(a, b)), trial, "parallel")
    return tr.report()


def check_unit_laws(tut: TheoryUnderTest) -> CheckReport:
    """``T ⊠ I_I = T = I_I ⊠ T``."""
    tr = _Tracker(tut, "unit_laws")
    r = tr.rng
    unit = tut.ident(TRIVIAL_SYSTEM)
    for trial in range(tut.trials):
        t = tut.random(int(r.integers(0, 3)), int(r.integers(0, 3)), r)
        tr.same_realization(tut.par(t, unit), t, trial, "right unit")
        tr.same_realization(tut.par(unit, t), t, trial, "left unit")
    return tr.report()


def check_swap(tut: TheoryUnderTest) -> CheckReport:
    """Naturality, hexagon and involution of the swap."""
    tr = _Tracker(tut, "swap")
    r = tr.rng
    for trial in range(tut.trials):
        x, y, u, v = (int(k) for k in r.integers(0, 2, 4))
        a, b = tut.random(x, y, r), tut.random(u, v, r)
        lhs = tut.seq(tut.swap(a.output_system, b.output_system), tut.par(a, b))
        rhs = tut.seq(tut.par(b, a), tut.swap(a.input_system, b.input_system))
        tr.same_realization(lhs, rhs, trial, "naturality")
        sa, sb = tut.system(x), tut.system(u)
        twice = tut.seq(tut.swap(sb, sa), tut.swap(sa, sb))
        tr.same_realization(twice, tut.ident(compose_systems(sa, sb)), trial, "involution")
        if trial % 5 == 0:
            sa, sb, sc = (tut.system(int(k)) for k in r.integers(0, 2, 3))
            big = tut.swap(sa, compose_systems(sb, sc))
            steps = tut.seq(tut.par(tut.ident(sb), tut.swap(sa, sc)),
                            tut.par(tut.swap(sa, sb), tut.ident(sc)))
            tr.same_realization(big, steps, trial, "hexagon")
    return tr.report()


def check_bifunctoriality(tut: TheoryUnderTest) -> CheckReport:
    """Sliding: ``(a⊠I)∘(I⊠b) = a⊠b = (I⊠b)∘(a⊠I)`` and ``(g∘f)⊠I = (g⊠I)∘(f⊠I)``."""
    tr = _Tracker(tut, "bifunctoriality")
    r = tr.rng
    for trial in range(tut.trials):
        x, y, u, v = (int(k) for k in r.choice([0, 1, 1], 4))
        a, b = tut.random(x, y, r), tut.random(u, v, r)
        ab = tut.par(a, b)
        first_b = tut.seq(tut.par(a, tut.ident(b.output_system)), tut.par(tut.ident(a.input_system), b))
        first_a = tut.seq(tut.par(tut.ident(a.output_system), b), tut.par(a, tut.ident(b.input_system)))
        tr.same_realization(first_b, ab, trial, "slide b first")
        tr.same_realization(first_a, ab, trial, "slide a first")
        if trial % 4 == 0:
            g = tut.random(y, int(r.integers(0, 2)), r)
            e = tut.system(1)
            lhs = tut.par(tut.seq(g, a), tut.ident(e))
            rhs = tut.seq(tut.par(g, tut.ident(e)), tut.par(a, tut.ident(e)))
            tr.same_realization(lhs, rhs, trial, "sequential")
    return tr.report()


def check_family_coherence(tut: TheoryUnderTest) -> CheckReport:
    """The ancilla family is consistent.

    ``realize(t ⊠ I_E, ε) = realize(t, E)``, and enlarging the ancilla by a
    fresh system whose new links sit in their latent states commutes with ``t``.
    """
    tr = _Tracker(tut, "family_coherence")
    r = tr.rng
    cfg = tut.cfg
    extra = tut.system(1)
    for trial in range(tut.trials):
        t = tut.random(int(r.integers(0, 3)), int(r.integers(0, 3)), r)
        for anc in tut.ancilla_pool:
            big_in = compose_systems(t.input_system, anc, extra)
            big_out = compose_systems(t.output_system, anc, extra)
            if max(qmap(big_in, cfg).total_dim, qmap(big_out, cfg).total_dim) > tut.max_dim:
                tr.skipped += 1
                continue
            lhs = tf.realize(tut.par(t, tut.ident(anc)), TRIVIAL_SYSTEM, cfg)
            rhs = tf.realize(t, anc, cfg)
            tr.record(qmath.map_deviation(lhs, rhs, r), trial=trial, what="t⊠I_E", ancilla=anc)

            small_in = compose_systems(t.input_system, anc)
            rho = qmath.random_density(qmap(small_in, cfg).total_dim, r)
            sigma = qmath.random_density(qmap(extra, cfg).total_dim, r)
            embedded = compose_states([LqtState(small_in, rho), LqtState(extra, sigma)], cfg).op
            out_big = tf.realize(t, compose_systems(anc, extra), cfg).apply(embedded)
            small_out = tf.realize(t, anc, cfg).apply(rho)
            expect = compose_states([LqtState(compose_systems(t.output_system, anc), small_out),
                                     LqtState(extra, sigma)], cfg).op
            tr.record(float(np.max(np.abs(out_big - expect))), trial=trial, what="ξ-embedding",
                      ancilla=anc)
    return tr.report()


def check_intertwining(tut: TheoryUnderTest) -> CheckReport:
    """Cross-pair actions of ``a ⊠ b`` and ``b ⊠ a`` agree up to the pair flip."""
    tr = _Tracker(tut, "intertwining")
    r = tr.rng
    cfg = tut.cfg
    for trial in range(tut.trials):
        n1, m1, n2, m2 = (int(k) for k in r.integers(0, 3, 4))
        a, b = tut.random(n1, m1, r), tut.random(n2, m2, r)
        ab = tf.star_channel(a, b, cfg, tut.mutation)  # N2×N1 -> M2×M1
        ba = tf.star_channel(b, a, cfg, tut.mutation)  # N1×N2 -> M1×M2
        flip_in = times_symmetry_perm(a.input_system.chars("B"), b.input_system.chars("A")).images
        flip_out = times_symmetry_perm(a.output_system.chars("B"), b.output_system.chars("A")).images
        # flip_in maps N1×N2 order to N2×N1 order
        lhs = ab.conjugated(flip_in, qmath.invert_perm(flip_out), ba.input_shape, ba.output_shape)
        tr.record(qmath.map_deviation(lhs, ba, r), trial=trial, a=a, b=b)
    return tr.report()


CHECKS: dict[str, Callable[[TheoryUnderTest], CheckReport]] = {
    "interchange": check_interchange,
    "assoc_parallel": check_assoc_parallel,
    "assoc_sequential": check_assoc_sequential,
    "identity_laws": check_identity_laws,
    "unit_laws": check_unit_laws,
    "swap": check_swap,
    "bifunctoriality": check_bifunctoriality,
    "family_coherence": check_family_coherence,
    "intertwining": check_intertwining,
}


def run_suite(tut: TheoryUnderTest, names: Sequence[str] | None = None) -> list[CheckReport]:
    names = list(CHECKS) if names is None else list(names)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise KeyError(f"unknown checks {unknown}")
    return [CHECKS[n](tut) for n in names]


def suite_to_json(reports: Sequence[CheckReport], seed: int, **extra) -> str:
    doc = {"seed": seed, "checks": [r.to_dict() for r in reports],
           "all_pass": all(r.passed for r in reports), **extra}
    return json.dumps(doc, sort_keys=True, indent=2, default=_jsonable)


def _jsonable(x):
    if isinstance(x, float) and not np.isfinite(x):
        return str(x)
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(f"cannot serialise {type(x)}")
