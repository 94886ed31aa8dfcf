"""States, effects and measurements on latent quantum systems, and how they compose.

Composing two states puts every new cross pair in its latent state; composing
two effects puts the identity there.  Both results are laid out in the
composite's canonical factor order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from . import qmath
from .theory import (
    LatentConfig,
    SystemString,
    compose_systems,
    composite_layout,
    cross_latent_states,
    qmap,
)


@dataclass(frozen=True, eq=False)
class LqtState:
    system: SystemString
    op: np.ndarray

    def __post_init__(self):
        op = qmath.as_matrix(self.op)
        object.__setattr__(self, "op", op)

    def validate(self, cfg: LatentConfig, tol: float = qmath.EIG_TOL) -> "LqtState":
        dim = qmap(self.system, cfg).total_dim
        if self.op.shape != (dim, dim):
            raise ValueError(f"state of shape {self.op.shape} on {self.system!r} (dim {dim})")
        check = qmath.is_density(self.op, tol)
        if not check:
            raise ValueError(f"not a density operator (violation {check.violation:.3g})")
        return self

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.op)))


@dataclass(frozen=True, eq=False)
class LqtEffect:
    system: SystemString
    op: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "op", qmath.as_matrix(self.op))

    def validate(self, cfg: LatentConfig, tol: float = qmath.EIG_TOL) -> "LqtEffect":
        dim = qmap(self.system, cfg).total_dim
        if self.op.shape != (dim, dim):
            raise ValueError(f"effect of shape {self.op.shape} on {self.system!r} (dim {dim})")
        check = qmath.is_effect(self.op, tol)
        if not check:
            raise ValueError(f"not an effect (violation {check.violation:.3g})")
        return self


@dataclass(frozen=True, eq=False)
class Povm:
    system: SystemString
    outcomes: tuple[LqtEffect, ...]

    def __post_init__(self):
        outs = tuple(self.outcomes)
        if not outs:
            raise ValueError("a POVM needs at least one outcome")
        for e in outs:
            if e.system != self.system:
                raise ValueError("all POVM elements must live on the POVM's system")
        object.__setattr__(self, "outcomes", outs)

    @classmethod
    def from_ops(cls, system: SystemString, ops) -> "Povm":
        return cls(system, tuple(LqtEffect(system, op) for op in ops))

    def __len__(self) -> int:
        return len(self.outcomes)

    def __iter__(self):
        return iter(self.outcomes)

    def normalization_error(self) -> float:
        total = sum(e.op for e in self.outcomes)
        return float(np.max(np.abs(total - np.eye(total.shape[0]))))

    def validate(self, cfg: LatentConfig, tol: float = qmath.ATOL) -> "Povm":
        for e in self.outcomes:
            e.validate(cfg, tol)
        err = self.normalization_error()
        if err > tol:
            raise ValueError(f"POVM elements do not sum to the identity (error {err:.3g})")
        return self

    def is_pvm(self, tol: float = qmath.ATOL) -> bool:
        ops = [e.op for e in self.outcomes]
        if not all(qmath.is_pvm_element(p, tol) for p in ops):
            return False
        for a, b in itertools.combinations(ops, 2):
            if np.max(np.abs(a @ b), initial=0.0) > tol:
                return False
        return self.normalization_error() <= tol


def _compose_two(a: np.ndarray, sa: SystemString, b: np.ndarray, sb: SystemString,
                 cross: np.ndarray, cfg: LatentConfig) -> np.ndarray:
    layout = composite_layout(sa, sb, cfg)
    grouped = qmath.kron(a, b, cross)
    return qmath.permute_operator(grouped, layout.to_canonical, layout.grouped_shape)


def compose_states(parts: Sequence[LqtState], cfg: LatentConfig) -> LqtState:
    if not parts:
        raise ValueError("need at least one state")

    def step(x: LqtState, y: LqtState) -> LqtState:
        layout = composite_layout(x.system, y.system, cfg)
        xi = qmath.kron(*cross_latent_states(layout, cfg))
        op = _compose_two(x.op, x.system, y.op, y.system, xi, cfg)
        return LqtState(compose_systems(x.system, y.system), op)

    for p in parts:
        _check_dim(p.op, p.system, cfg)
    return reduce(step, parts)


def compose_effects(parts: Sequence[LqtEffect], cfg: LatentConfig) -> LqtEffect:
    if not parts:
        raise ValueError("need at least one effect")

    def step(x: LqtEffect, y: LqtEffect) -> LqtEffect:
        layout = composite_layout(x.system, y.system, cfg)
        unit = np.eye(qmath.shape_dim(layout.cross_shape), dtype=complex)
        op = _compose_two(x.op, x.system, y.op, y.system, unit, cfg)
        return LqtEffect(compose_systems(x.system, y.system), op)

    for p in parts:
        _check_dim(p.op, p.system, cfg)
    return reduce(step, parts)


def compose_povms(parts: Sequence[Povm], cfg: LatentConfig) -> Povm:
    """Outcome-wise composition; outcomes in lexicographic order of the parts' outcomes."""
    if not parts:
        raise ValueError("need at least one POVM")
    system = compose_systems(*(p.system for p in parts))
    effects = tuple(compose_effects(list(combo), cfg) for combo in itertools.product(*parts))
    return Povm(system, effects)


def pair(effect: LqtEffect, state: LqtState) -> float:
    """Born pairing ``Tr(rho Pi)``."""
    if effect.system != state.system:
        raise ValueError(f"effect on {effect.system!r} cannot pair with state on {state.system!r}")
    if effect.op.shape != state.op.shape:
        raise ValueError("effect and state operators have different shapes")
    return qmath.born(effect.op, state.op)


def _check_dim(op: np.ndarray, system: SystemString, cfg: LatentConfig) -> None:
    dim = qmap(system, cfg).total_dim
    if op.shape != (dim, dim):
        raise ValueError(f"operator of shape {op.shape} does not fit {system!r} (dim {dim})")


def unit_effect(system: SystemString, cfg: LatentConfig) -> LqtEffect:
    return LqtEffect(system, np.eye(qmap(system, cfg).total_dim, dtype=complex))


def embed_effect(pi, system: SystemString, cfg: LatentConfig) -> LqtEffect:
    """Effect acting as ``pi`` on the operational space and trivially on the latent one."""
    space = qmap(system, cfg)
    return LqtEffect(system, qmath.kron(np.eye(space.latent_dim), pi))


def coarse_grain(povm: Povm, groups: Sequence[Sequence[int]]) -> Povm:
    """Merge outcomes: new outcome ``g`` sums the old outcomes listed in ``groups[g]``."""
    seen = sorted(i for g in groups for i in g)
    if seen != list(range(len(povm))):
        raise ValueError("groups must partition the outcomes")
    ops = [sum(povm.outcomes[i].op for i in g) for g in groups]
    return Povm.from_ops(povm.system, ops)


def mix_povms(weight: float, a: Povm, b: Povm) -> Povm:
    """Setting chosen by a coin: ``a`` with probability ``weight``, else ``b``."""
    if len(a) != len(b) or a.system != b.system:
        raise ValueError("can only mix POVMs with the same system and outcome count")
    if not 0.0 <= weight <= 1.0:
        raise ValueError("weight must lie in [0, 1]")
    return Povm.from_ops(a.system, [weight * x.op + (1 - weight) * y.op for x, y in zip(a, b)])
