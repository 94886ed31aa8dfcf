"""Latent quantum transformations and their composition.

A transformation ``N -> M`` is a pair ``(T, S)``: a quantum operation ``T`` on
``qmap(N) -> qmap(M)`` and a noisy permutation ``S`` saying what happens to the
latent factors linking the system to any character of an ancilla.  The
quantum operation seen in presence of an ancilla ``E`` is built by
:func:`realize`.

Wire convention for :class:`NoisyPermutation`: the ``k`` fresh wires sit in
front of the ``n`` input wires; after permuting, the first ``k'`` wires are
traced out and the remaining ``m`` are the outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import qmath
from .qmath import KrausMap
from .strings import LabelledString, PairPermutation, boxplus_symmetry_perm, times_symmetry_perm
from .theory import (
    ElementaryLabel,
    LatentConfig,
    SystemString,
    TRIVIAL_SYSTEM,
    compose_systems,
    composite_layout,
    qmap,
)

MUTATIONS = (
    "omit_single_reset",    # cross pair reset only when *both* sides reset it
    "skip_latent_reorder",  # parallel composition forgets to reorder latent factors
    "frozen_swap_latent",   # swap leaves ancilla-linked latent factors in place
    "no_star",              # parallel composition leaves the cross pairs untouched
    "reversed_latent_seq",  # sequential composition applies latent parts in the wrong order
)


def _check_mutation(mutation: str | None) -> None:
    if mutation is not None and mutation not in MUTATIONS:
        raise ValueError(f"unknown mutation {mutation!r}; choose from {MUTATIONS}")


@dataclass(frozen=True, eq=False)
class NoisyPermutation:
    k: int
    k_prime: int
    perm: tuple[int, ...]

    def __post_init__(self):
        perm = tuple(int(p) for p in self.perm)
        object.__setattr__(self, "perm", perm)
        w = len(perm)
        if not (0 <= self.k <= w and 0 <= self.k_prime <= w):
            raise ValueError(f"k={self.k}, k'={self.k_prime} do not fit {w} wires")
        if sorted(perm) != list(range(w)):
            raise ValueError(f"{perm} is not a permutation of {w} wires")
        for i in range(self.k):
            if perm[i] < self.k_prime:
                raise ValueError("not in reduced form: a fresh wire is traced out immediately")

    @property
    def n(self) -> int:
        return len(self.perm) - self.k

    @property
    def m(self) -> int:
        return len(self.perm) - self.k_prime

    def mapping(self) -> dict[int, int]:
        """Surviving input wire -> output wire (0-based)."""
        k, kp = self.k, self.k_prime
        return {i: self.perm[k + i] - kp for i in range(self.n) if self.perm[k + i] >= kp}

    def fresh_outputs(self) -> tuple[int, ...]:
        return tuple(self.perm[i] - self.k_prime for i in range(self.k))

    def traced_inputs(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.n) if self.perm[self.k + i] < self.k_prime)

    @classmethod
    def from_mapping(cls, n: int, m: int, mapping: dict[int, int]) -> "NoisyPermutation":
        """Canonical reduced form of the partial injection ``mapping``.

        Fresh wires are ordered by the output they feed; traced wires by the
        input they come from.
        """
        mapping = {int(i): int(p) for i, p in mapping.items()}
        if len(set(mapping.values())) != len(mapping):
            raise ValueError("mapping is not injective")
        if any(not (0 <= i < n and 0 <= p < m) for i, p in mapping.items()):
            raise ValueError("mapping out of range")
        traced = [i for i in range(n) if i not in mapping]
        hit = set(mapping.values())
        fresh = [p for p in range(m) if p not in hit]
        k, kp = len(fresh), len(traced)
        perm = [0] * (k + n)
        for slot, p in enumerate(fresh):
            perm[slot] = kp + p
        for slot, i in enumerate(traced):
            perm[k + i] = slot
        for i, p in mapping.items():
            perm[k + i] = kp + p
        return cls(k, kp, tuple(perm))

    @classmethod
    def identity(cls, n: int) -> "NoisyPermutation":
        return cls(0, 0, tuple(range(n)))

    @classmethod
    def reset(cls, n: int = 1) -> "NoisyPermutation":
        """Every wire discarded and replaced by a fresh latent state."""
        return cls.from_mapping(n, n, {})

    def canonical(self) -> "NoisyPermutation":
        return NoisyPermutation.from_mapping(self.n, self.m, self.mapping())

    def signature(self) -> tuple:
        return (self.n, self.m, tuple(sorted(self.mapping().items())))

    def __eq__(self, other) -> bool:
        if not isinstance(other, NoisyPermutation):
            return NotImplemented
        return self.signature() == other.signature()

    def __hash__(self) -> int:
        return hash(self.signature())

    def __repr__(self) -> str:
        return f"NoisyPermutation(k={self.k}, k'={self.k_prime}, perm={self.perm})"

    def after(self, first: "NoisyPermutation") -> "NoisyPermutation":
        """``self ∘ first``."""
        if first.m != self.n:
            raise ValueError(f"cannot compose noisy permutations {first.n}->{first.m} then {self.n}->{self.m}")
        a, b = first.mapping(), self.mapping()
        return NoisyPermutation.from_mapping(first.n, self.m, {i: b[p] for i, p in a.items() if p in b})

    def parallel(self, other: "NoisyPermutation") -> "NoisyPermutation":
        mp = dict(self.mapping())
        mp.update({self.n + i: self.m + p for i, p in other.mapping().items()})
        return NoisyPermutation.from_mapping(self.n + other.n, self.m + other.m, mp)

    def is_reduced(self) -> bool:
        return all(self.perm[i] >= self.k_prime for i in range(self.k))


def star(left: NoisyPermutation, right: NoisyPermutation,
         mutation: str | None = None) -> NoisyPermutation:
    """Action on cross pairs ``(j_N2, i_N1)`` (``j``-major) of running ``left`` on
    the ``N1`` side and ``right`` on the ``N2`` side in parallel.

    A pair survives iff both of its ends survive; an output pair is fresh iff at
    least one of its ends is fresh.
    """
    n1, m1, n2, m2 = left.n, left.m, right.n, right.m
    lm, rm = left.mapping(), right.mapping()
    if mutation == "omit_single_reset" and n1 == m1 and n2 == m2:
        lx = {i: lm.get(i, i) for i in range(n1)}
        rx = {j: rm.get(j, j) for j in range(n2)}
        if len(set(lx.values())) == n1 and len(set(rx.values())) == n2:
            mp = {j * n1 + i: rx[j] * m1 + lx[i]
                  for j in range(n2) for i in range(n1) if i in lm or j in rm}
            return NoisyPermutation.from_mapping(n1 * n2, m1 * m2, mp)
    mp = {j * n1 + i: rm[j] * m1 + lm[i] for j in rm for i in lm}
    return NoisyPermutation.from_mapping(n1 * n2, m1 * m2, mp)


PairLabels = Sequence[tuple[ElementaryLabel, ElementaryLabel]]


def noisy_perm_channel(np_: NoisyPermutation, in_pairs: PairLabels, out_pairs: PairLabels,
                       cfg: LatentConfig) -> KrausMap:
    """Kraus form of a noisy permutation on latent wires of the given pair types.

    Inputs are routed so that survivors come first (ordered by destination) and
    discarded wires last; discarded wires are traced, fresh outputs get their
    latent state, and a final permutation puts everything in output order.
    """
    if (len(in_pairs), len(out_pairs)) != (np_.n, np_.m):
        raise ValueError(f"noisy permutation {np_.n}->{np_.m} applied to {len(in_pairs)}->{len(out_pairs)} wires")
    in_dims = tuple(cfg.latent_dim(a, b) for a, b in in_pairs)
    out_dims = tuple(cfg.latent_dim(a, b) for a, b in out_pairs)
    mp = np_.mapping()
    for i, p in mp.items():
        if in_dims[i] != out_dims[p]:
            raise ValueError(f"latent wire {i} (dim {in_dims[i]}) cannot become output {p} (dim {out_dims[p]})")
    kept = sorted(mp, key=lambda i: mp[i])
    traced = [i for i in range(np_.n) if i not in mp]
    fresh = list(np_.fresh_outputs())
    fresh.sort()
    order = kept + traced
    route = [0] * np_.n
    for pos, i in enumerate(order):
        route[i] = pos
    kept_shape = tuple(in_dims[i] for i in kept)
    stage = KrausMap.permutation(route, in_dims)
    stage = KrausMap.identity(kept_shape).tensor(
        KrausMap.trace_out(tuple(in_dims[i] for i in traced))).after(stage)
    preps = [KrausMap.preparation(cfg.latent_state(*out_pairs[p]), (out_dims[p],)) for p in fresh]
    if preps:
        stage = KrausMap.identity(kept_shape).tensor(*preps).after(stage)
    final = [mp[i] for i in kept] + fresh
    return KrausMap.permutation(final, stage.output_shape).after(stage)


def apply_noisy_perm(np_: NoisyPermutation, rho, in_pairs: PairLabels, out_pairs: PairLabels,
                     cfg: LatentConfig) -> np.ndarray:
    """Literal procedure: prepend fresh latent states, permute, trace the first ``k'`` wires."""
    if (len(in_pairs), len(out_pairs)) != (np_.n, np_.m):
        raise ValueError("arity mismatch")
    rho = qmath.as_matrix(rho)
    k, kp = np_.k, np_.k_prime
    fresh_pairs = [out_pairs[np_.perm[i] - kp] for i in range(k)]
    fresh = [cfg.latent_state(a, b) for a, b in fresh_pairs]
    dims = tuple(cfg.latent_dim(a, b) for a, b in fresh_pairs) + \
        tuple(cfg.latent_dim(a, b) for a, b in in_pairs)
    full = qmath.kron(*fresh, rho)
    if full.shape[0] != qmath.shape_dim(dims):
        raise ValueError("input operator does not match the latent wires")
    moved = qmath.permute_operator(full, np_.perm, dims)
    new_dims = qmath.permuted_shape(np_.perm, dims)
    return qmath.partial_trace(moved, new_dims, range(kp, len(new_dims)))


def _with_shapes(kmap: KrausMap, in_shape, out_shape) -> KrausMap:
    if (kmap.din, kmap.dout) != (qmath.shape_dim(in_shape), qmath.shape_dim(out_shape)):
        raise ValueError(f"map {kmap.din}->{kmap.dout} does not fit {in_shape}->{out_shape}")
    return KrausMap(in_shape, out_shape, kmap.kraus)


@dataclass(frozen=True, eq=False)
class LatentTransformation:
    input_system: SystemString
    output_system: SystemString
    op_part: KrausMap
    latent_part: NoisyPermutation
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.latent_part.n != len(self.input_system) or self.latent_part.m != len(self.output_system):
            raise ValueError(
                f"latent part {self.latent_part.n}->{self.latent_part.m} does not match "
                f"{self.input_system!r} -> {self.output_system!r}"
            )

    def validate(self, cfg: LatentConfig, tol: float = qmath.ATOL) -> "LatentTransformation":
        qi, qo = qmap(self.input_system, cfg), qmap(self.output_system, cfg)
        if (self.op_part.din, self.op_part.dout) != (qi.total_dim, qo.total_dim):
            raise ValueError(
                f"operational part {self.op_part.din}->{self.op_part.dout} does not match "
                f"{qi.total_dim}->{qo.total_dim}"
            )
        if not self.op_part.is_cptni(tol):
            raise ValueError("operational part is not trace non-increasing")
        return self

    def __repr__(self) -> str:
        label = self.name or "T"
        return f"<{label}: {self.input_system!r} -> {self.output_system!r}, {self.latent_part!r}>"


def identity(system: SystemString, cfg: LatentConfig) -> LatentTransformation:
    return LatentTransformation(system, system, KrausMap.identity(qmap(system, cfg).shape),
                                NoisyPermutation.identity(len(system)), "id")


def elementary(op: KrausMap, label: ElementaryLabel, reset: bool) -> LatentTransformation:
    """``(T, Z)`` on one elementary system; ``reset`` replaces every link by a fresh latent state."""
    s = SystemString((label,))
    z = NoisyPermutation.reset(1) if reset else NoisyPermutation.identity(1)
    return LatentTransformation(s, s, op, z, "T1" if reset else "T0")


def preparation(rho, system: SystemString, cfg: LatentConfig) -> LatentTransformation:
    """State as a process from the trivial system; links to ancillas start in their latent states."""
    shape = qmap(system, cfg).shape
    n = len(system)
    return LatentTransformation(TRIVIAL_SYSTEM, system, KrausMap.preparation(rho, shape),
                                NoisyPermutation.from_mapping(0, n, {}), "prep")


def measurement(pi, system: SystemString, cfg: LatentConfig) -> LatentTransformation:
    """Effect as a process to the trivial system; links to ancillas are discarded."""
    shape = qmap(system, cfg).shape
    n = len(system)
    return LatentTransformation(system, TRIVIAL_SYSTEM, KrausMap.effect(pi, shape),
                                NoisyPermutation.from_mapping(n, 0, {}), "effect")


def star_channel(left: LatentTransformation, right: LatentTransformation, cfg: LatentConfig,
                 mutation: str | None = None) -> KrausMap:
    """Channel on ``L(N2×N1) -> L(M2×M1)`` induced by the two latent parts."""
    lay_in = composite_layout(left.input_system, right.input_system, cfg)
    lay_out = composite_layout(left.output_system, right.output_system, cfg)
    s = star(left.latent_part, right.latent_part, mutation)
    return noisy_perm_channel(s, lay_in.cross_labels, lay_out.cross_labels, cfg)


def realize(t: LatentTransformation, ancilla: SystemString, cfg: LatentConfig) -> KrausMap:
    """The quantum operation ``qmap(N ⊞ E) -> qmap(M ⊞ E)`` of ``t ⊠ I_E``."""
    n_sys, m_sys = t.input_system, t.output_system
    qi, qo = qmap(n_sys, cfg), qmap(m_sys, cfg)
    op = _with_shapes(t.op_part, qi.shape, qo.shape)
    if ancilla.is_trivial:
        return op
    lay_in = composite_layout(n_sys, ancilla, cfg)
    lay_out = composite_layout(m_sys, ancilla, cfg)
    parts = [op, KrausMap.identity(qmap(ancilla, cfg).shape)]
    for j in range(len(ancilla)):
        in_pairs = [(ancilla[j], lab) for lab in n_sys]
        out_pairs = [(ancilla[j], lab) for lab in m_sys]
        parts.append(noisy_perm_channel(t.latent_part, in_pairs, out_pairs, cfg))
    grouped = parts[0].tensor(*parts[1:])
    return grouped.conjugated(lay_in.to_grouped, lay_out.to_canonical,
                              lay_in.canonical_shape, lay_out.canonical_shape)


def seq_compose(g: LatentTransformation, f: LatentTransformation,
                mutation: str | None = None) -> LatentTransformation:
    """``g ∘ f`` (apply ``f`` first)."""
    _check_mutation(mutation)
    if f.output_system != g.input_system:
        raise ValueError(f"cannot compose {f.output_system!r} -> {g.input_system!r}")
    op = g.op_part.after(_with_shapes(f.op_part, f.op_part.input_shape, g.op_part.input_shape))
    latent = g.latent_part.after(f.latent_part)
    if mutation == "reversed_latent_seq" and len({f.latent_part.n, f.latent_part.m, g.latent_part.m}) == 1:
        latent = f.latent_part.after(g.latent_part)
    return LatentTransformation(f.input_system, g.output_system, op, latent,
                                f"({g.name}∘{f.name})")


def par_compose(a: LatentTransformation, b: LatentTransformation, cfg: LatentConfig,
                mutation: str | None = None) -> LatentTransformation:
    """``a ⊠ b``: own parts act independently, cross pairs follow the star product."""
    _check_mutation(mutation)
    decomposition = None
    if mutation == "skip_latent_reorder":
        n = len(a.input_system) + len(b.input_system)
        decomposition = PairPermutation.identity(n * (n - 1) // 2)
    lay_in = composite_layout(a.input_system, b.input_system, cfg, decomposition)
    if mutation == "skip_latent_reorder":
        m = len(a.output_system) + len(b.output_system)
        decomposition = PairPermutation.identity(m * (m - 1) // 2)
    lay_out = composite_layout(a.output_system, b.output_system, cfg, decomposition)
    ta = _with_shapes(a.op_part, qmap(a.input_system, cfg).shape, qmap(a.output_system, cfg).shape)
    tb = _with_shapes(b.op_part, qmap(b.input_system, cfg).shape, qmap(b.output_system, cfg).shape)
    cross = None
    if mutation == "no_star" and lay_in.cross_shape == lay_out.cross_shape:
        cross = KrausMap.identity(lay_in.cross_shape)
    if cross is None:
        s = star(a.latent_part, b.latent_part, mutation)
        cross = noisy_perm_channel(s, lay_in.cross_labels, lay_out.cross_labels, cfg)
    grouped = ta.tensor(tb, cross)
    op = grouped.conjugated(lay_in.to_grouped, lay_out.to_canonical,
                            lay_in.canonical_shape, lay_out.canonical_shape)
    return LatentTransformation(compose_systems(a.input_system, b.input_system),
                                compose_systems(a.output_system, b.output_system),
                                op, a.latent_part.parallel(b.latent_part),
                                f"({a.name}⊠{b.name})")


def swap_permutation(first: SystemString, second: SystemString, cfg: LatentConfig) -> tuple[int, ...]:
    """Factor permutation ``qmap(N1 ⊞ N2) -> qmap(N2 ⊞ N1)`` moving every factor with its characters."""
    lay1 = composite_layout(first, second, cfg)
    lay2 = composite_layout(second, first, cfg)
    n1, n2 = len(first), len(second)
    c1, c2 = n1 * (n1 - 1) // 2, n2 * (n2 - 1) // 2
    # grouped1 = [L11, O1, L22, O2, X(N2×N1)] -> grouped2 = [L22, O2, L11, O1, X(N1×N2)]
    flip = times_symmetry_perm(second.chars("B"), first.chars("A"))
    own1, own2 = c1 + n1, c2 + n2
    g12 = []
    for p in range(own1):
        g12.append(own2 + p)
    for p in range(own2):
        g12.append(p)
    for p in range(n1 * n2):
        g12.append(own1 + own2 + flip.images[p])
    return qmath.compose_perms(lay2.to_canonical, qmath.compose_perms(g12, lay1.to_grouped))


def swap_transformation(first: SystemString, second: SystemString, cfg: LatentConfig,
                        mutation: str | None = None) -> LatentTransformation:
    _check_mutation(mutation)
    whole = compose_systems(first, second)
    perm = swap_permutation(first, second, cfg)
    op = KrausMap.permutation(perm, qmap(whole, cfg).shape)
    n = len(whole)
    block = boxplus_symmetry_perm(LabelledString.fresh(1, "E"), first.chars("A"), second.chars("B"))
    latent = NoisyPermutation.from_mapping(n, n, dict(enumerate(block.images)))
    if mutation == "frozen_swap_latent":
        latent = NoisyPermutation.identity(n)
    return LatentTransformation(whole, compose_systems(second, first), op, latent, "swap")


def random_noisy_perm(n: int, m: int, rng: np.random.Generator) -> NoisyPermutation:
    r = int(rng.integers(0, min(n, m) + 1))
    ins = rng.permutation(n)[:r]
    outs = rng.permutation(m)[:r]
    return NoisyPermutation.from_mapping(n, m, dict(zip(ins.tolist(), outs.tolist())))


def random_transformation(inp: SystemString, out: SystemString, cfg: LatentConfig,
                          rng: np.random.Generator, strict: bool = True) -> LatentTransformation:
    op = qmath.random_cptni(qmap(inp, cfg).shape, qmap(out, cfg).shape, rng, strict)
    latent = random_noisy_perm(len(inp), len(out), rng)
    for i, p in latent.mapping().items():
        if inp[i] != out[p]:
            # latent factors of different label types need not match; keep only same-type links
            latent = NoisyPermutation.from_mapping(
                len(inp), len(out), {a: b for a, b in latent.mapping().items() if inp[a] == out[b]})
            break
    return LatentTransformation(inp, out, op, latent, "R")


def generator_deviation(s: LatentTransformation, t: LatentTransformation,
                        rng: np.random.Generator | None = None) -> float:
    """Distance between generating pairs: ``inf`` if the latent parts differ,
    otherwise the max-abs Choi (or probe) difference of the operational parts."""
    if (s.input_system, s.output_system) != (t.input_system, t.output_system):
        return float("inf")
    if s.latent_part != t.latent_part:
        return float("inf")
    a, b = s.op_part, t.op_part
    if (a.din, a.dout) != (b.din, b.dout):
        return float("inf")
    if a.din * a.dout <= 256:
        return float(np.max(np.abs(a.choi() - b.choi())))
    rng = np.random.default_rng(0) if rng is None else rng
    return qmath.map_deviation(a, b, rng)
