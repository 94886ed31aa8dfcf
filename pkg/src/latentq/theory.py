"""Theory parameters, latent quantum systems and their concrete Hilbert spaces.

A system is a string of elementary labels.  Its concrete space is one latent
factor per unordered pair of positions (in ``odot`` order) followed by one
operational factor per label.  Latent factor dimensions and the fixed latent
states are looked up by the *types* of the two labels involved.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import qmath
from .strings import LabelledString, odot, odot_decomposition_perm, PairPermutation

TRIVIAL_NAME = "I"


@dataclass(frozen=True, order=True)
class ElementaryLabel:
    name: str
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"label {self.name!r} has dimension {self.dim}")
        if (self.dim == 1) != (self.name == TRIVIAL_NAME):
            raise ValueError(
                f"dimension 1 is reserved for the trivial label {TRIVIAL_NAME!r} "
                f"(got {self.name!r} with dim {self.dim})"
            )

    def __repr__(self) -> str:
        return self.name


TRIVIAL = ElementaryLabel(TRIVIAL_NAME, 1)


@dataclass(frozen=True)
class SystemString:
    """Canonical label string; the trivial system is the empty string."""

    labels: tuple[ElementaryLabel, ...] = ()

    def __post_init__(self):
        if any(lab.name == TRIVIAL_NAME for lab in self.labels):
            raise ValueError("use canonicalize() to drop trivial labels")

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    def __getitem__(self, i):
        return self.labels[i]

    @property
    def is_trivial(self) -> bool:
        return not self.labels

    def names(self) -> tuple[str, ...]:
        return tuple(lab.name for lab in self.labels)

    def __repr__(self) -> str:
        return "".join(self.names()) or TRIVIAL_NAME

    def chars(self, tag: str) -> LabelledString:
        return LabelledString.fresh(len(self), tag)


TRIVIAL_SYSTEM = SystemString()


def canonicalize(labels: Iterable[ElementaryLabel]) -> SystemString:
    return SystemString(tuple(lab for lab in labels if lab.name != TRIVIAL_NAME))


def compose_systems(*systems: SystemString) -> SystemString:
    return SystemString(tuple(lab for s in systems for lab in s.labels))


def _pair(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


def preset_state(name: str, dim: int) -> np.ndarray:
    if name == "maximally_mixed":
        return np.eye(dim, dtype=complex) / dim
    if name.startswith("pure_basis"):
        k = int(name[len("pure_basis"):] or 0)
        if not 0 <= k < dim:
            raise ValueError(f"preset {name!r} needs dimension > {k}")
        return qmath.projector(qmath.ket(k, dim))
    raise ValueError(f"unknown latent-state preset {name!r}")


@dataclass(frozen=True)
class LatentConfig:
    """Latent factor dimensions and fixed latent states per unordered label pair.

    ``default_dim``/``default_state`` cover every pair of nontrivial labels not
    listed in ``overrides``; with ``default_dim=None`` every pair must be listed.
    """

    labels: Mapping[str, ElementaryLabel]
    default_dim: int | None = 1
    default_state: np.ndarray | None = None
    overrides: Mapping[tuple[str, str], tuple[int, np.ndarray]] = field(default_factory=dict)

    def __post_init__(self):
        labels = dict(self.labels)
        for name, lab in labels.items():
            if lab.name != name:
                raise ValueError(f"label key {name!r} does not match {lab.name!r}")
        object.__setattr__(self, "labels", labels)
        if self.default_dim is not None:
            state = self.default_state
            if state is None:
                state = preset_state("pure_basis0", self.default_dim)
            state = self._checked_state(state, self.default_dim, "default")
            object.__setattr__(self, "default_state", state)
        overrides = {}
        for (a, b), (dim, state) in dict(self.overrides).items():
            for n in (a, b):
                if n not in labels:
                    raise ValueError(f"latent pair refers to unknown label {n!r}")
            overrides[_pair(a, b)] = (int(dim), self._checked_state(state, int(dim), f"{a}{b}"))
        object.__setattr__(self, "overrides", overrides)

    @staticmethod
    def _checked_state(state, dim: int, what: str) -> np.ndarray:
        state = qmath.as_matrix(state)
        if state.shape != (dim, dim):
            raise ValueError(f"latent state for {what} has shape {state.shape}, expected {(dim, dim)}")
        ok = qmath.is_density(state)
        if not ok or abs(np.trace(state) - 1) > qmath.ATOL:
            raise ValueError(f"latent state for {what} is not a normalised density operator")
        state = state.copy()
        state.setflags(write=False)
        return state

    @classmethod
    def simplest(cls, latent_dim: int = 2, label_dims: Mapping[str, int] | None = None,
                 state: str | np.ndarray = "pure_basis0") -> "LatentConfig":
        """One latent factor type and one latent state for every pair."""
        label_dims = {"Q": 2} if label_dims is None else label_dims
        labels = {n: ElementaryLabel(n, d) for n, d in label_dims.items()}
        if isinstance(state, str):
            state = preset_state(state, latent_dim)
        return cls(labels, latent_dim, state)

    @classmethod
    def standard_qt(cls, label_dims: Mapping[str, int] | None = None) -> "LatentConfig":
        return cls.simplest(1, label_dims)

    def label(self, name: str) -> ElementaryLabel:
        if name == TRIVIAL_NAME:
            return TRIVIAL
        try:
            return self.labels[name]
        except KeyError:
            raise KeyError(f"unknown label {name!r}") from None

    def system(self, names: Iterable[str] | str) -> SystemString:
        if isinstance(names, str):
            names = [n for n in names.replace(",", " ").split()] if ("," in names or " " in names) \
                else list(names)
        return canonicalize(self.label(n) for n in names)

    def _entry(self, a: ElementaryLabel, b: ElementaryLabel) -> tuple[int, np.ndarray]:
        if a.name == TRIVIAL_NAME or b.name == TRIVIAL_NAME:
            return 1, np.ones((1, 1), dtype=complex)
        for lab in (a, b):
            known = self.labels.get(lab.name)
            if known is None or known.dim != lab.dim:
                raise KeyError(f"label {lab!r} (dim {lab.dim}) is not part of this configuration")
        key = _pair(a.name, b.name)
        if key in self.overrides:
            return self.overrides[key]
        if self.default_dim is None:
            raise KeyError(f"no latent factor configured for pair {key}")
        return self.default_dim, self.default_state

    def latent_dim(self, a: ElementaryLabel, b: ElementaryLabel) -> int:
        return self._entry(a, b)[0]

    def latent_state(self, a: ElementaryLabel, b: ElementaryLabel) -> np.ndarray:
        return self._entry(a, b)[1]

    def is_standard(self) -> bool:
        dims = [d for d, _ in self.overrides.values()]
        if self.default_dim is not None:
            dims.append(self.default_dim)
        return all(d == 1 for d in dims)

    def is_pure(self) -> bool:
        states = [s for _, s in self.overrides.values()]
        if self.default_state is not None:
            states.append(self.default_state)
        return all(qmath.numerical_rank(s) == 1 for s in states)


@dataclass(frozen=True)
class QSpace:
    system: SystemString
    latent_pairs: tuple[tuple[int, int], ...]  # 0-based (i, j), j < i, odot order
    latent_shape: qmath.Shape
    operational_shape: qmath.Shape

    @property
    def shape(self) -> qmath.Shape:
        return self.latent_shape + self.operational_shape

    @property
    def latent_dim(self) -> int:
        return qmath.shape_dim(self.latent_shape)

    @property
    def operational_dim(self) -> int:
        return qmath.shape_dim(self.operational_shape)

    @property
    def total_dim(self) -> int:
        return self.latent_dim * self.operational_dim


def qmap(s: SystemString, cfg: LatentConfig) -> QSpace:
    chars = s.chars("N")
    pairs = tuple((a.index - 1, b.index - 1) for a, b in odot(chars))
    latent = tuple(cfg.latent_dim(s[i], s[j]) for i, j in pairs)
    operational = tuple(lab.dim for lab in s)
    return QSpace(s, pairs, latent, operational)


def latent_states(s: SystemString, cfg: LatentConfig) -> list[np.ndarray]:
    return [cfg.latent_state(s[i], s[j]) for i, j in qmap(s, cfg).latent_pairs]


def embed_qt_state(rho, s: SystemString, cfg: LatentConfig) -> np.ndarray:
    """Put every latent factor of ``s`` in its latent state next to an operational state."""
    rho = qmath.as_matrix(rho)
    space = qmap(s, cfg)
    if rho.shape != (space.operational_dim,) * 2:
        raise ValueError(f"state of shape {rho.shape} does not fit operational dim {space.operational_dim}")
    return qmath.kron(*latent_states(s, cfg), rho)


@dataclass(frozen=True)
class CompositeLayout:
    """Factor bookkeeping for ``qmap(N1 ⊞ N2)``.

    The grouped order is ``[L(N1⊙N1), O(N1), L(N2⊙N2), O(N2), L(N2×N1)]``:
    each part's own space as a contiguous block, then the cross-latent factors
    ``(j_N2, i_N1)`` in ``j``-major order.  ``to_grouped`` permutes canonical
    factors into that order; ``to_canonical`` undoes it.
    """

    left: SystemString
    right: SystemString
    canonical_shape: qmath.Shape
    grouped_shape: qmath.Shape
    to_grouped: tuple[int, ...]
    to_canonical: tuple[int, ...]
    cross_labels: tuple[tuple[ElementaryLabel, ElementaryLabel], ...]

    @property
    def cross_shape(self) -> qmath.Shape:
        k = len(self.cross_labels)
        return self.grouped_shape[len(self.grouped_shape) - k:] if k else ()


def composite_layout(left: SystemString, right: SystemString, cfg: LatentConfig,
                     decomposition: PairPermutation | None = None) -> CompositeLayout:
    """``decomposition`` overrides the latent reordering (negative controls only)."""
    n1, n2 = len(left), len(right)
    c1, c2 = comb(n1, 2), comb(n2, 2)
    cross = n1 * n2
    whole = compose_systems(left, right)
    canonical_shape = qmap(whole, cfg).shape
    if decomposition is None:
        decomposition = odot_decomposition_perm(left.chars("N"), right.chars("E"))
    g_l1, g_o1 = 0, c1
    g_l2, g_o2 = c1 + n1, c1 + n1 + c2
    g_x = g_o2 + n2
    images = []
    for b in decomposition.images:  # block order: [N2⊙N2][N2×N1][N1⊙N1]
        if b < c2:
            images.append(g_l2 + b)
        elif b < c2 + cross:
            images.append(g_x + (b - c2))
        else:
            images.append(g_l1 + (b - c2 - cross))
    for t in range(n1 + n2):
        images.append(g_o1 + t if t < n1 else g_o2 + (t - n1))
    to_grouped = tuple(images)
    grouped_shape = qmath.permuted_shape(to_grouped, canonical_shape)
    cross_labels = tuple((right[j], left[i]) for j in range(n2) for i in range(n1))
    return CompositeLayout(left, right, canonical_shape, grouped_shape, to_grouped,
                           qmath.invert_perm(to_grouped), cross_labels)


def cross_latent_states(layout: CompositeLayout, cfg: LatentConfig) -> list[np.ndarray]:
    return [cfg.latent_state(a, b) for a, b in layout.cross_labels]
