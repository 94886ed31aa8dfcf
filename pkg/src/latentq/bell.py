"""Bell-like scenarios, their correlation tables, and the local-tomography demo.

The LQT table of a scenario is computed with composed effects paired against
the shared state.  The reference tables are plain quantum mechanics: a state on
the tensor product of the parties' spaces and Kronecker products of the local
measurement operators.  The translation between the two works by tracking
factors by their global position, independently of the composition code.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import qmath
from .states_effects import LqtEffect, LqtState, Povm, coarse_grain, compose_effects, compose_states, mix_povms, pair
from .theory import LatentConfig, SystemString, compose_systems, qmap
from .verify import CheckReport

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
TSIRELSON = float(2 * np.sqrt(2))


@dataclass(frozen=True, eq=False)
class Party:
    system: SystemString
    settings: tuple[Povm, ...]

    def __post_init__(self):
        object.__setattr__(self, "settings", tuple(self.settings))
        if not self.settings:
            raise ValueError("a party needs at least one setting")
        for p in self.settings:
            if p.system != self.system:
                raise ValueError(f"setting on {p.system!r} given to a party on {self.system!r}")


Mixture = tuple[tuple[float, tuple[LqtState, ...]], ...]


@dataclass(frozen=True, eq=False)
class Scenario:
    """Parties measuring a shared state.

    The state is either given outright or as a convex mixture of ⊠-products of
    component states (``preparations``); the latter keeps the preparation
    structure visible for :func:`check_scenario_structure`.
    """

    parties: tuple[Party, ...]
    shared_state: LqtState | None = None
    preparations: Mixture | None = None

    def __post_init__(self):
        object.__setattr__(self, "parties", tuple(self.parties))
        if not self.parties:
            raise ValueError("a scenario needs at least one party")
        if (self.shared_state is None) == (self.preparations is None):
            raise ValueError("give exactly one of shared_state and preparations")
        whole = self.system
        if self.shared_state is not None and self.shared_state.system != whole:
            raise ValueError(f"shared state lives on {self.shared_state.system!r}, parties on {whole!r}")
        if self.preparations is not None:
            preps = tuple((float(w), tuple(parts)) for w, parts in self.preparations)
            for w, parts in preps:
                if w < 0:
                    raise ValueError("mixture weights must be non-negative")
                if compose_systems(*(p.system for p in parts)) != whole:
                    raise ValueError("preparation components do not compose to the parties' system")
            if abs(sum(w for w, _ in preps) - 1) > qmath.ATOL:
                raise ValueError("mixture weights must sum to 1")
            object.__setattr__(self, "preparations", preps)

    @property
    def system(self) -> SystemString:
        return compose_systems(*(p.system for p in self.parties))

    def state(self, cfg: LatentConfig) -> LqtState:
        if self.shared_state is not None:
            return self.shared_state
        op = sum(w * compose_states(list(parts), cfg).op for w, parts in self.preparations)
        return LqtState(self.system, op)

    def validate(self, cfg: LatentConfig) -> "Scenario":
        for p in self.parties:
            for s in p.settings:
                s.validate(cfg)
        if self.shared_state is not None:
            self.shared_state.validate(cfg)
        else:
            for _, parts in self.preparations:
                for st in parts:
                    st.validate(cfg)
        return self

    def setting_tuples(self):
        return itertools.product(*(range(len(p.settings)) for p in self.parties))

    def outcome_tuples(self, x: Sequence[int]):
        return itertools.product(*(range(len(p.settings[xi])) for p, xi in zip(self.parties, x)))


@dataclass
class CorrelationTable:
    """``P(a | x)`` keyed by ``(settings, outcomes)`` in lexicographic order."""

    probs: dict[tuple[tuple[int, ...], tuple[int, ...]], float]

    def __len__(self) -> int:
        return len(self.probs)

    def __getitem__(self, key):
        return self.probs[key]

    def keys(self):
        return self.probs.keys()

    def max_deviation(self, other: "CorrelationTable") -> float:
        if self.probs.keys() != other.probs.keys():
            raise ValueError("tables have different index sets")
        return max((abs(v - other.probs[k]) for k, v in self.probs.items()), default=0.0)

    def normalization_error(self, total: float = 1.0) -> float:
        sums: dict = {}
        for (x, _), v in self.probs.items():
            sums[x] = sums.get(x, 0.0) + v
        return max(abs(s - total) for s in sums.values())

    def correlator(self, x: Sequence[int]) -> float:
        """``Σ (-1)^{Σ a} P(a|x)`` for two-outcome settings."""
        x = tuple(x)
        return sum((-1) ** sum(a) * v for (xx, a), v in self.probs.items() if xx == x)

    def marginal(self, party: int) -> "CorrelationTable":
        """One party's statistics, with every other party at setting 0."""
        merged: dict = {}
        for (x, a), v in self.probs.items():
            if all(xi == 0 for i, xi in enumerate(x) if i != party):
                k = ((x[party],), (a[party],))
                merged[k] = merged.get(k, 0.0) + v
        return CorrelationTable(merged)


def chsh_value(table: CorrelationTable) -> float:
    return (table.correlator((0, 0)) + table.correlator((0, 1))
            + table.correlator((1, 0)) - table.correlator((1, 1)))


def correlations_lqt(s: Scenario, cfg: LatentConfig) -> CorrelationTable:
    state = s.state(cfg)
    probs = {}
    for x in s.setting_tuples():
        for a in s.outcome_tuples(x):
            effects = [p.settings[xi].outcomes[ai] for p, xi, ai in zip(s.parties, x, a)]
            probs[(x, a)] = pair(compose_effects(effects, cfg), state)
    return CorrelationTable(probs)


def correlations_qt(rho: np.ndarray, s: Scenario) -> CorrelationTable:
    """Standard-QT table: ``Tr(rho (Π_1 ⊗ … ⊗ Π_n))`` on the parties' own spaces."""
    rho = qmath.as_matrix(rho)
    probs = {}
    for x in s.setting_tuples():
        for a in s.outcome_tuples(x):
            ops = [p.settings[xi].outcomes[ai].op for p, xi, ai in zip(s.parties, x, a)]
            probs[(x, a)] = qmath.born(qmath.kron(*ops), rho)
    return CorrelationTable(probs)


# --------------------------------------------------------------------------
# position bookkeeping shared by the translations below


def _party_of(systems: Sequence[SystemString]) -> list[int]:
    return [k for k, s in enumerate(systems) for _ in range(len(s))]


def _party_grouping(systems: Sequence[SystemString], cfg: LatentConfig):
    """Canonical factors of the composite, split into the parties' own spaces and cross pairs.

    Returns ``(shape, own, cross)``: ``own`` lists canonical factor indices in
    the order ``[party 1 latent, party 1 operational, party 2 …]``; ``cross``
    lists the remaining (cross-party latent) factors in canonical order.
    """
    whole = compose_systems(*systems)
    space = qmap(whole, cfg)
    owner = _party_of(systems)
    nl = len(space.latent_pairs)
    own: list[int] = []
    for k in range(len(systems)):
        own += [f for f, (i, j) in enumerate(space.latent_pairs) if owner[i] == owner[j] == k]
        own += [nl + c for c in range(len(whole)) if owner[c] == k]
    cross = [f for f, (i, j) in enumerate(space.latent_pairs) if owner[i] != owner[j]]
    return space.shape, own, cross


@dataclass(frozen=True)
class QtTranslation:
    """How an LQT state was turned into a QT state: traced factors and the reordering of the kept ones."""

    traced: tuple[int, ...]
    kept_order: tuple[int, ...]


def to_qt_state(s: Scenario, cfg: LatentConfig) -> tuple[np.ndarray, QtTranslation]:
    """Trace the cross-party latent factors and regroup the rest party by party."""
    systems = [p.system for p in s.parties]
    shape, own, cross = _party_grouping(systems, cfg)
    kept = sorted(own)
    reduced = qmath.partial_trace(s.state(cfg).op, shape, kept)
    kept_shape = tuple(shape[f] for f in kept)
    perm = [own.index(f) for f in kept]
    rho = qmath.permute_operator(reduced, perm, kept_shape)
    return rho, QtTranslation(tuple(cross), tuple(own))


def from_qt_state(rho, systems: Sequence[SystemString], cfg: LatentConfig) -> LqtState:
    """Put ``rho`` on the parties' own spaces and every cross-party pair in its latent state."""
    rho = qmath.as_matrix(rho)
    whole = compose_systems(*systems)
    space = qmap(whole, cfg)
    shape, own, cross = _party_grouping(systems, cfg)
    xis = [cfg.latent_state(whole[space.latent_pairs[f][0]], whole[space.latent_pairs[f][1]]) for f in cross]
    grouped = qmath.kron(rho, *xis)
    order = own + cross
    grouped_shape = tuple(shape[f] for f in order)
    # grouped factor g is canonical factor order[g]
    return LqtState(whole, qmath.permute_operator(grouped, order, grouped_shape))


def check_bell_equivalence(s: Scenario, cfg: LatentConfig, tol: float = 1e-9,
                           converse: bool = True) -> CheckReport:
    """LQT table vs the QT table of the translated state, and back again."""
    lqt = correlations_lqt(s, cfg)
    rho, _ = to_qt_state(s, cfg)
    qt = correlations_qt(rho, s)
    dev = lqt.max_deviation(qt)
    witness = None
    if converse:
        back = Scenario(s.parties, from_qt_state(rho, [p.system for p in s.parties], cfg))
        dev_back = correlations_lqt(back, cfg).max_deviation(qt)
        if dev_back > dev:
            witness = {"direction": "qt -> lqt", "deviation": dev_back}
        dev = max(dev, dev_back)
    if witness is None and dev >= tol:
        witness = {"direction": "lqt -> qt", "deviation": dev}
    return CheckReport("bell_equivalence", len(lqt), dev, tol, True, 0, witness)


# --------------------------------------------------------------------------
# structure-preserving translation: each latent factor (i, j), i > j, is
# attached to character i; character c then carries [L(c,1)…L(c,c-1), Q_c]


def _extended_keys(chars: Sequence[int]) -> list[tuple]:
    keys = []
    for c in chars:
        keys += [("L", c, j) for j in range(c)]
        keys.append(("O", c))
    return keys


def _move(op: np.ndarray, src_keys: list, src_shape: Sequence[int], dst_keys: list) -> np.ndarray:
    perm = [dst_keys.index(k) for k in src_keys]
    return qmath.permute_operator(op, perm, src_shape)


def _block_keys(offset: int, n: int, space) -> list[tuple]:
    return [("L", offset + i, offset + j) for i, j in space.latent_pairs] + \
        [("O", offset + c) for c in range(n)]


def _qt_component_state(st: LqtState, offset: int, whole: SystemString, cfg: LatentConfig) -> np.ndarray:
    space = qmap(st.system, cfg)
    n = len(st.system)
    chars = range(offset, offset + n)
    keys = _block_keys(offset, n, space)
    shape = list(space.shape)
    ops = [st.op]
    for c in chars:
        for j in range(offset):
            keys.append(("L", c, j))
            shape.append(cfg.latent_dim(whole[c], whole[j]))
            ops.append(cfg.latent_state(whole[c], whole[j]))
    return _move(qmath.kron(*ops), keys, shape, _extended_keys(chars))


def _qt_component_effect(e: LqtEffect, offset: int, whole: SystemString, cfg: LatentConfig) -> np.ndarray:
    space = qmap(e.system, cfg)
    n = len(e.system)
    chars = range(offset, offset + n)
    keys = _block_keys(offset, n, space)
    shape = list(space.shape)
    ops = [e.op]
    for c in chars:
        for j in range(offset):
            d = cfg.latent_dim(whole[c], whole[j])
            keys.append(("L", c, j))
            shape.append(d)
            ops.append(np.eye(d))
    return _move(qmath.kron(*ops), keys, shape, _extended_keys(chars))


def structured_qt_table(s: Scenario, cfg: LatentConfig) -> CorrelationTable:
    """QT table with the same preparation/measurement connectivity as ``s``.

    Every preparation becomes a QT state on its characters' extended spaces and
    every local effect a QT effect on its party's extended spaces; the global
    state is the (mixture of) tensor products of the component states.
    """
    if s.preparations is None:
        raise ValueError("scenario has no product-form preparation")
    whole = s.system
    rho = 0
    for w, parts in s.preparations:
        comps, offset = [], 0
        for st in parts:
            comps.append(_qt_component_state(st, offset, whole, cfg))
            offset += len(st.system)
        rho = rho + w * qmath.kron(*comps)
    offsets = np.cumsum([0] + [len(p.system) for p in s.parties]).tolist()
    probs = {}
    for x in s.setting_tuples():
        for a in s.outcome_tuples(x):
            ops = [_qt_component_effect(p.settings[xi].outcomes[ai], off, whole, cfg)
                   for p, xi, ai, off in zip(s.parties, x, a, offsets)]
            probs[(x, a)] = qmath.born(qmath.kron(*ops), rho)
    return CorrelationTable(probs)


def check_scenario_structure(s: Scenario, cfg: LatentConfig, tol: float = 1e-9) -> CheckReport:
    lqt = correlations_lqt(s, cfg)
    qt = structured_qt_table(s, cfg)
    dev = lqt.max_deviation(qt)
    witness = None if dev < tol else {"deviation": dev}
    return CheckReport("scenario_structure", len(lqt), dev, tol, True, 0, witness)


# --------------------------------------------------------------------------
# wirings


def wire(s: Scenario, party: int, groups: Sequence[Sequence[int]] | None = None,
         mix: tuple[float, int, int] | None = None) -> Scenario:
    """Coarse-grain a party's outcomes and/or add a setting that flips a coin between two others."""
    parties = list(s.parties)
    p = parties[party]
    settings = list(p.settings)
    if mix is not None:
        w, i, j = mix
        settings.append(mix_povms(w, settings[i], settings[j]))
    if groups is not None:
        settings = [coarse_grain(povm, groups) for povm in settings]
    parties[party] = Party(p.system, tuple(settings))
    return Scenario(tuple(parties), s.shared_state, s.preparations)


# --------------------------------------------------------------------------
# CHSH


def observable_pvm(obs: np.ndarray, system: SystemString, cfg: LatentConfig) -> Povm:
    """Two-outcome PVM ``{(1 + A)/2, (1 - A)/2}`` of a ±1 observable on an elementary system."""
    space = qmap(system, cfg)
    if space.latent_shape:
        raise ValueError("observable PVMs are built for elementary systems")
    one = np.eye(space.total_dim)
    return Povm.from_ops(system, [(one + obs) / 2, (one - obs) / 2])


def spin_observable(theta: float, phi: float = 0.0) -> np.ndarray:
    n = (np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta))
    return n[0] * PAULI["X"] + n[1] * PAULI["Y"] + n[2] * PAULI["Z"]


def bell_state(name: str = "phi_plus") -> np.ndarray:
    s = 1 / np.sqrt(2)
    vecs = {
        "phi_plus": [s, 0, 0, s],
        "phi_minus": [s, 0, 0, -s],
        "psi_plus": [0, s, s, 0],
        "psi_minus": [0, s, -s, 0],
    }
    if name not in vecs:
        raise ValueError(f"unknown Bell state {name!r}")
    return qmath.projector(np.array(vecs[name], dtype=complex))


def chsh_scenario(cfg: LatentConfig, label: str | None = None, state: str = "phi_plus") -> Scenario:
    """Tsirelson-optimal settings ``A = Z, X`` and ``B = (Z ± X)/√2`` on a ξ-embedded Bell state."""
    label = label or sorted(cfg.labels)[0]
    q = cfg.system(label)
    if qmap(q, cfg).total_dim != 2:
        raise ValueError("CHSH scenario needs a qubit label")
    z, x = PAULI["Z"], PAULI["X"]
    alice = Party(q, (observable_pvm(z, q, cfg), observable_pvm(x, q, cfg)))
    bob = Party(q, (observable_pvm((z + x) / np.sqrt(2), q, cfg), observable_pvm((z - x) / np.sqrt(2), q, cfg)))
    whole = compose_systems(q, q)
    sigma = from_qt_state(bell_state(state), [q, q], cfg)
    return Scenario((alice, bob), LqtState(whole, sigma.op))


@dataclass
class SamplingResult:
    samples: int
    max_chsh: float
    bound: float
    within_bound: bool
    note: str = "sampling evidence, not a proof"


def chsh_sampling(cfg: LatentConfig, samples: int, rng: np.random.Generator,
                  state: str = "psi_minus", label: str | None = None, slack: float = 1e-6) -> SamplingResult:
    """Largest CHSH value over random projective settings on a ξ-embedded Bell state."""
    label = label or sorted(cfg.labels)[0]
    q = cfg.system(label)
    sigma = from_qt_state(bell_state(state), [q, q], cfg)
    # the pairing is linear in the effect, so correlators follow from composed observables
    basis = {k: LqtEffect(q, v) for k, v in PAULI.items() if k != "I"}
    corr = np.empty((3, 3))
    for i, a in enumerate("XYZ"):
        for j, b in enumerate("XYZ"):
            corr[i, j] = pair(compose_effects([basis[a], basis[b]], cfg), sigma)
    best = -np.inf
    for _ in range(samples):
        v = rng.normal(size=(4, 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        e = v[:2] @ corr @ v[2:].T
        best = max(best, e[0, 0] + e[0, 1] + e[1, 0] - e[1, 1])
    return SamplingResult(samples, float(best), TSIRELSON, bool(best <= TSIRELSON + slack))


# --------------------------------------------------------------------------
# random scenarios


def random_povm(system: SystemString, cfg: LatentConfig, rng: np.random.Generator, outcomes: int = 2) -> Povm:
    d = qmap(system, cfg).total_dim
    weights = rng.random((outcomes, d))
    weights /= weights.sum(axis=0, keepdims=True)
    u = qmath.random_unitary(d, rng)
    return Povm.from_ops(system, [(u * w) @ qmath.dag(u) for w in weights])


def random_scenario(cfg: LatentConfig, rng: np.random.Generator, party_sizes: Sequence[int],
                    settings: int = 2, outcomes: int = 2, label: str | None = None) -> Scenario:
    label = label or sorted(cfg.labels)[0]
    systems = [cfg.system(label * n) for n in party_sizes]
    parties = tuple(Party(s, tuple(random_povm(s, cfg, rng, outcomes) for _ in range(settings))) for s in systems)
    whole = compose_systems(*systems)
    rho = qmath.random_density(qmap(whole, cfg).total_dim, rng)
    return Scenario(parties, LqtState(whole, rho))


# --------------------------------------------------------------------------
# local tomography


def effect_basis(dim: int) -> list[np.ndarray]:
    """``dim²`` effects whose real span is all Hermitian operators.

    Each Hermitian basis element ``H`` is clipped into ``(1 + H/‖H‖)/2``; the
    identity is kept as is so the span still contains it.
    """
    herm = []
    for k in range(dim):
        for l in range(dim):
            m = np.zeros((dim, dim), dtype=complex)
            if k == l:
                m[k, k] = 1
            elif k < l:
                m[k, l] = m[l, k] = 1
            else:
                m[k, l], m[l, k] = 1j, -1j
            herm.append(m)
    one = np.eye(dim, dtype=complex)
    out = [one]
    for h in herm[1:]:
        out.append((one + h / np.linalg.norm(h, 2)) / 2)
    return out


def _span_rank(ops: Sequence[np.ndarray], rel_cutoff: float = 1e-8) -> int:
    vecs = np.array([op.reshape(-1) for op in ops])
    gram = np.real(np.conj(vecs) @ vecs.T)
    w = np.linalg.eigvalsh((gram + gram.T) / 2)
    return int(np.sum(w > rel_cutoff * w.max()))


def product_effects(system: SystemString, cfg: LatentConfig) -> list[LqtEffect]:
    singles = [[LqtEffect(SystemString((lab,)), e) for e in effect_basis(lab.dim)] for lab in system]
    return [compose_effects(list(combo), cfg) for combo in itertools.product(*singles)]


def tomography_span(system: SystemString, cfg: LatentConfig) -> tuple[int, int]:
    """(dimension of the span of product effects, dimension of all Hermitian operators)."""
    if len(system) < 2:
        raise ValueError("local tomography concerns composites of at least two labels")
    span = _span_rank([e.op for e in product_effects(system, cfg)])
    return span, qmap(system, cfg).total_dim ** 2


@dataclass
class TomographyWitness:
    system: SystemString
    state1: np.ndarray
    state2: np.ndarray
    product_deviation: float
    trace_distance: float
    pvm: Povm
    success: float


def tomography_violation_witness(cfg: LatentConfig, system: SystemString | None = None,
                                 rho=None) -> TomographyWitness | None:
    """Two states no product effect tells apart, and a joint PVM that does.

    Both states carry the same operational state ``rho``; they differ only in
    the latent factor of the pair, ``ξ`` versus a state ``ξ'`` orthogonal to
    (or least overlapping with) ``ξ``.  Returns ``None`` when every latent
    factor is one-dimensional.
    """
    if system is None:
        candidates = [(a, b) for a in sorted(cfg.labels) for b in sorted(cfg.labels)]
        chosen = next(((a, b) for a, b in candidates
                       if cfg.latent_dim(cfg.label(a), cfg.label(b)) >= 2), None)
        if chosen is None:
            return None
        system = cfg.system(list(chosen))
    if len(system) != 2:
        raise ValueError("the witness is built on a two-label system")
    dl = cfg.latent_dim(system[0], system[1])
    if dl < 2:
        return None
    xi = cfg.latent_state(system[1], system[0])
    w, v = np.linalg.eigh(xi)
    xi_perp = qmath.projector(v[:, 0])
    space = qmap(system, cfg)
    if rho is None:
        rho = qmath.projector(qmath.ket(0, space.operational_dim))
    s1 = qmath.kron(xi, rho)
    s2 = qmath.kron(xi_perp, rho)
    dev = max(abs(pair(e, LqtState(system, s1)) - pair(e, LqtState(system, s2)))
              for e in product_effects(system, cfg))
    trace_distance = 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(s1 - s2))))
    q = qmath.kron(xi_perp, np.eye(space.operational_dim))
    pvm = Povm.from_ops(system, [np.eye(space.total_dim) - q, q])  # outcome 0 -> state1, 1 -> state2
    success = 0.5 * (pair(pvm.outcomes[0], LqtState(system, s1)) + pair(pvm.outcomes[1], LqtState(system, s2)))
    return TomographyWitness(system, s1, s2, float(dev), trace_distance, pvm, float(success))


def table_to_csv(lqt: CorrelationTable, qt: CorrelationTable | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["settings", "outcomes", "p_lqt"] + (["p_qt"] if qt is not None else []))
    for (x, a), p in lqt.probs.items():
        row = [" ".join(map(str, x)), " ".join(map(str, a)), repr(p)]
        if qt is not None:
            row.append(repr(qt.probs[(x, a)]))
        w.writerow(row)
    return buf.getvalue()
