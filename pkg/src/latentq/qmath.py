"""Dense complex-matrix kernel.

Operators are plain ``numpy`` arrays of dtype ``complex128``.  Tensor-factor
structure is always passed explicitly as a shape tuple (one dimension per
factor); nothing here guesses a factorisation from a bare matrix size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

ATOL = 1e-9
EIG_TOL = 1e-10

Shape = tuple[int, ...]


def as_shape(dims: Sequence[int]) -> Shape:
    shape = tuple(int(d) for d in dims)
    if any(d < 1 for d in shape):
        raise ValueError(f"factor dimensions must be >= 1, got {shape}")
    return shape


def shape_dim(shape: Sequence[int]) -> int:
    return math.prod(int(d) for d in shape)


def as_matrix(m) -> np.ndarray:
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix has non-finite entries")
    return arr


def dag(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def kron(*mats) -> np.ndarray:
    """Kronecker product of any number of matrices (left factor most significant)."""
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, as_matrix(m))
    return out


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros((dim, 1), dtype=complex)
    v[index, 0] = 1.0
    return v


def projector(vec) -> np.ndarray:
    v = np.asarray(vec, dtype=complex).reshape(-1, 1)
    return v @ dag(v)


# --------------------------------------------------------------------------
# permutations of tensor factors


def _check_perm(perm: Sequence[int], n: int) -> tuple[int, ...]:
    perm = tuple(int(p) for p in perm)
    if len(perm) != n:
        raise ValueError(f"permutation of length {len(perm)} for {n} factors")
    if sorted(perm) != list(range(n)):
        raise ValueError(f"{perm} is not a permutation of range({n})")
    return perm


def invert_perm(perm: Sequence[int]) -> tuple[int, ...]:
    inv = [0] * len(perm)
    for src, dst in enumerate(perm):
        inv[dst] = src
    return tuple(inv)


def compose_perms(second: Sequence[int], first: Sequence[int]) -> tuple[int, ...]:
    """Images of ``second ∘ first`` (apply ``first``, then ``second``)."""
    return tuple(second[first[p]] for p in range(len(first)))


def permuted_shape(perm: Sequence[int], shape: Sequence[int]) -> Shape:
    perm = _check_perm(perm, len(shape))
    out = [0] * len(shape)
    for src, dst in enumerate(perm):
        out[dst] = shape[src]
    return tuple(out)


def _perm_index_map(perm: tuple[int, ...], shape: Shape) -> np.ndarray:
    # out_index[j] = flat input index landing at flat output position j
    inv = invert_perm(perm)
    idx = np.arange(shape_dim(shape)).reshape(shape) if shape else np.zeros((), int)
    return np.transpose(idx, inv).reshape(-1)


def permutation_operator(perm: Sequence[int], shape: Sequence[int]) -> np.ndarray:
    """Unitary moving tensor factor ``p`` to position ``perm[p]``.

    ``P (v_0 ⊗ ... ⊗ v_{n-1})`` has ``v_p`` in slot ``perm[p]``; the output
    factor dimensions are ``permuted_shape(perm, shape)``.
    """
    shape = as_shape(shape)
    perm = _check_perm(perm, len(shape))
    dim = shape_dim(shape)
    src = _perm_index_map(perm, shape)
    P = np.zeros((dim, dim), dtype=complex)
    P[np.arange(dim), src] = 1.0
    return P


def permute_operator(op: np.ndarray, perm: Sequence[int], shape: Sequence[int]) -> np.ndarray:
    """``P op P†`` computed by index shuffling, without forming ``P``."""
    shape = as_shape(shape)
    perm = _check_perm(perm, len(shape))
    src = _perm_index_map(perm, shape)
    return np.asarray(op)[np.ix_(src, src)]


# --------------------------------------------------------------------------
# partial trace


def partial_trace(rho, shape: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Trace out every factor not listed in ``keep``; kept factors stay in original order."""
    rho = as_matrix(rho)
    shape = as_shape(shape)
    n = len(shape)
    keep = sorted(set(int(k) for k in keep))
    for k in keep:
        if not 0 <= k < n:
            raise IndexError(f"factor index {k} out of range for {n} factors")
    dim = shape_dim(shape)
    if rho.shape != (dim, dim):
        raise ValueError(f"operator of shape {rho.shape} does not match factors {shape}")
    traced = [i for i in range(n) if i not in keep]
    dk = shape_dim([shape[i] for i in keep])
    dt = shape_dim([shape[i] for i in traced])
    t = rho.reshape(shape + shape)
    order = keep + traced
    t = t.transpose(order + [n + i for i in order]).reshape(dk, dt, dk, dt)
    return np.einsum("aibi->ab", t)


# --------------------------------------------------------------------------
# Kraus maps


@dataclass(frozen=True, eq=False)
class KrausMap:
    """Completely positive map ``rho -> sum_k K_k rho K_k†``.

    ``kraus`` is stacked as an array of shape ``(count, out_dim, in_dim)``.
    """

    input_shape: Shape
    output_shape: Shape
    kraus: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "input_shape", as_shape(self.input_shape))
        object.__setattr__(self, "output_shape", as_shape(self.output_shape))
        ks = np.asarray(self.kraus, dtype=complex)
        if ks.ndim == 2:
            ks = ks[None]
        if ks.ndim != 3:
            raise ValueError("kraus operators must be stacked as (count, out, in)")
        if ks.shape[1:] != (self.dout, self.din):
            raise ValueError(
                f"kraus operators of shape {ks.shape[1:]} do not map {self.din} -> {self.dout}"
            )
        if not np.all(np.isfinite(ks)):
            raise ValueError("kraus operators have non-finite entries")
        ks.setflags(write=False)
        object.__setattr__(self, "kraus", ks)

    @classmethod
    def _trusted(cls, input_shape: Shape, output_shape: Shape, ks: np.ndarray) -> "KrausMap":
        # internal constructor for results built from already-validated maps
        obj = object.__new__(cls)
        ks.setflags(write=False)
        object.__setattr__(obj, "input_shape", input_shape)
        object.__setattr__(obj, "output_shape", output_shape)
        object.__setattr__(obj, "kraus", ks)
        return obj

    @property
    def din(self) -> int:
        return shape_dim(self.input_shape)

    @property
    def dout(self) -> int:
        return shape_dim(self.output_shape)

    def __len__(self) -> int:
        return self.kraus.shape[0]

    @classmethod
    def from_list(cls, ops, input_shape=None, output_shape=None) -> "KrausMap":
        ops = [as_matrix(k) for k in ops]
        if not ops:
            raise ValueError("need at least one Kraus operator")
        input_shape = (ops[0].shape[1],) if input_shape is None else input_shape
        output_shape = (ops[0].shape[0],) if output_shape is None else output_shape
        return cls(input_shape, output_shape, np.stack(ops))

    @classmethod
    def identity(cls, shape: Sequence[int]) -> "KrausMap":
        shape = as_shape(shape)
        return cls(shape, shape, np.eye(shape_dim(shape), dtype=complex)[None])

    @classmethod
    def unitary(cls, u, shape: Sequence[int], out_shape: Sequence[int] | None = None) -> "KrausMap":
        return cls(shape, shape if out_shape is None else out_shape, as_matrix(u)[None])

    @classmethod
    def permutation(cls, perm: Sequence[int], shape: Sequence[int]) -> "KrausMap":
        return cls(shape, permuted_shape(perm, shape), permutation_operator(perm, shape)[None])

    @classmethod
    def preparation(cls, rho, shape: Sequence[int]) -> "KrausMap":
        """The map ``1 -> rho`` from the trivial space (``c ↦ c·rho``)."""
        rho = as_matrix(rho)
        w, v = np.linalg.eigh((rho + dag(rho)) / 2)
        keep = w > EIG_TOL * max(1.0, float(np.max(np.abs(w))))
        ops = [np.sqrt(wi) * v[:, [i]] for i, wi in enumerate(w) if keep[i]]
        if not ops:
            ops = [np.zeros((rho.shape[0], 1), dtype=complex)]
        return cls((), shape, np.stack(ops))

    @classmethod
    def trace_out(cls, shape: Sequence[int]) -> "KrausMap":
        """Discarding map ``rho -> Tr(rho)`` onto the trivial space."""
        d = shape_dim(shape)
        return cls(shape, (), np.stack([ket(i, d).T for i in range(d)]))

    @classmethod
    def effect(cls, pi, shape: Sequence[int]) -> "KrausMap":
        """``rho -> Tr(pi rho)`` for an effect ``0 <= pi <= 1``."""
        pi = as_matrix(pi)
        w, v = np.linalg.eigh((pi + dag(pi)) / 2)
        root = (v * np.sqrt(np.clip(w, 0, None))) @ dag(v)
        d = pi.shape[0]
        return cls(shape, (), np.stack([ket(i, d).T @ root for i in range(d)]))

    def apply(self, rho) -> np.ndarray:
        return apply_kraus(self, rho)

    def apply_factored(self, a: np.ndarray) -> np.ndarray:
        """Image of ``a a†`` without forming the input operator."""
        y = self.kraus @ a  # (count, out, r)
        return np.tensordot(y, np.conj(y), axes=([0, 2], [0, 2]))

    def then(self, other: "KrausMap") -> "KrausMap":
        """Sequential composite: apply ``self`` first, then ``other``."""
        return other.after(self)

    def after(self, first: "KrausMap") -> "KrausMap":
        """Sequential composite ``self ∘ first``."""
        if first.dout != self.din:
            raise ValueError(f"cannot compose: {first.dout} -> {self.din}")
        ks = np.einsum("aij,bjk->abik", self.kraus, first.kraus)
        ks = ks.reshape(-1, self.dout, first.din)
        return KrausMap._trusted(first.input_shape, self.output_shape, ks).compressed()

    def tensor(self, *others: "KrausMap") -> "KrausMap":
        out = self
        for o in others:
            # plain broadcast product, same rounding as np.kron
            ks = out.kraus[:, None, :, None, :, None] * o.kraus[None, :, None, :, None, :]
            ks = ks.reshape(len(out) * len(o), out.dout * o.dout, out.din * o.din)
            out = KrausMap._trusted(out.input_shape + o.input_shape, out.output_shape + o.output_shape, ks)
        return out

    def conjugated(self, in_perm: Sequence[int] | None, out_perm: Sequence[int] | None,
                   in_shape: Sequence[int], out_shape: Sequence[int]) -> "KrausMap":
        """``P_out ∘ self ∘ P_in`` for factor permutations given on the outer shapes.

        ``in_perm`` permutes ``in_shape`` onto ``self.input_shape``;
        ``out_perm`` permutes ``self.output_shape`` onto ``out_shape``.
        """
        cols = np.arange(self.din)
        rows = np.arange(self.dout)
        if in_perm is not None:
            if permuted_shape(in_perm, in_shape) != self.input_shape:
                raise ValueError("input permutation does not land on the map's input shape")
            src = _perm_index_map(tuple(in_perm), as_shape(in_shape))
            # K P_in: column j of P_in is basis vector e_{pos}, where pos has src[pos] = j
            cols = np.argsort(src)
        if out_perm is not None:
            if permuted_shape(out_perm, self.output_shape) != as_shape(out_shape):
                raise ValueError("output permutation does not land on the target shape")
            rows = _perm_index_map(tuple(out_perm), self.output_shape)
        return KrausMap._trusted(as_shape(in_shape), as_shape(out_shape),
                                 self.kraus[:, rows[:, None], cols[None, :]])

    def completeness(self) -> np.ndarray:
        k = self.kraus
        return np.einsum("kji,kjl->il", np.conj(k), k)

    def is_cptni(self, tol: float = ATOL) -> bool:
        w = np.linalg.eigvalsh(self.completeness())
        return bool(w.max() <= 1 + tol)

    def is_channel(self, tol: float = ATOL) -> bool:
        gap = self.completeness() - np.eye(self.din)
        return bool(np.max(np.abs(gap)) <= tol)

    def choi(self) -> np.ndarray:
        """Choi matrix ``sum_ij |i><j| ⊗ Φ(|i><j|)`` (input factor first)."""
        v = np.transpose(self.kraus, (0, 2, 1)).reshape(len(self), -1)
        return v.T @ np.conj(v)

    def compressed(self, max_choi_dim: int = 256) -> "KrausMap":
        """Re-express with at most ``din*dout`` operators when that is cheap."""
        d = self.din * self.dout
        if len(self) <= d or d > max_choi_dim:
            return self
        c = self.choi()
        w, v = np.linalg.eigh((c + dag(c)) / 2)
        keep = w > EIG_TOL * max(1.0, float(w.max()))
        vecs = v[:, keep] * np.sqrt(w[keep])
        ks = vecs.T.reshape(-1, self.din, self.dout).transpose(0, 2, 1)
        return KrausMap(self.input_shape, self.output_shape, ks)


def born(pi: np.ndarray, rho: np.ndarray) -> float:
    """``Re Tr(pi rho)`` without forming the product."""
    return float(np.real(np.sum(pi.T * rho)))


def apply_kraus(kmap: KrausMap, rho) -> np.ndarray:
    """``sum_k K rho K†``."""
    rho = as_matrix(rho)
    if rho.shape != (kmap.din, kmap.din):
        raise ValueError(f"operator of shape {rho.shape} does not fit map input dim {kmap.din}")
    k = kmap.kraus
    return np.tensordot(k @ rho, np.conj(k), axes=([0, 2], [0, 2]))


def map_deviation(f: KrausMap, g: KrausMap, rng: np.random.Generator,
                  probes: int = 3, rank: int = 2) -> float:
    """Max-abs output difference of two maps on random low-rank inputs.

    Distinct linear maps disagree on a generic input, so a handful of random
    probes separates them with probability one.
    """
    if (f.din, f.dout) != (g.din, g.dout):
        raise ValueError(f"maps have different types: {f.din}->{f.dout} vs {g.din}->{g.dout}")
    worst = 0.0
    for _ in range(probes):
        a = rng.normal(size=(f.din, rank)) + 1j * rng.normal(size=(f.din, rank))
        a /= np.linalg.norm(a)
        worst = max(worst, float(np.max(np.abs(f.apply_factored(a) - g.apply_factored(a)), initial=0.0)))
    return worst


# --------------------------------------------------------------------------
# validity predicates


class Validity(NamedTuple):
    ok: bool
    violation: float

    def __bool__(self) -> bool:
        return self.ok


def _herm_violation(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - dag(m)), initial=0.0))


def is_density(m, tol: float = EIG_TOL) -> Validity:
    """PSD, Hermitian, trace in [0, 1]."""
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        return Validity(False, float("inf"))
    herm = _herm_violation(m)
    w = np.linalg.eigvalsh((m + dag(m)) / 2)
    tr = float(np.real(np.trace(m)))
    viol = max(herm, -float(w.min(initial=0.0)), -tr, tr - 1.0, 0.0)
    return Validity(viol <= tol, viol)


def is_effect(m, tol: float = EIG_TOL) -> Validity:
    """Hermitian with ``0 <= m <= 1``."""
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        return Validity(False, float("inf"))
    herm = _herm_violation(m)
    w = np.linalg.eigvalsh((m + dag(m)) / 2)
    viol = max(herm, -float(w.min(initial=0.0)), float(w.max(initial=0.0)) - 1.0, 0.0)
    return Validity(viol <= tol, viol)


def is_pvm_element(m, tol: float = ATOL) -> Validity:
    """Self-adjoint idempotent (an orthogonal projector)."""
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        return Validity(False, float("inf"))
    viol = max(_herm_violation(m), float(np.max(np.abs(m @ m - m), initial=0.0)))
    return Validity(viol <= tol, viol)


def numerical_rank(m, cutoff: float = ATOL) -> int:
    w = np.linalg.eigvalsh((as_matrix(m) + dag(as_matrix(m))) / 2)
    return int(np.sum(w > cutoff))


# --------------------------------------------------------------------------
# random sampling


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a Ginibre matrix with phase fix."""
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_pure_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return projector(v / np.linalg.norm(v))


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ dag(g)
    return rho / np.trace(rho)


def random_cptni(input_shape: Sequence[int], output_shape: Sequence[int],
                 rng: np.random.Generator, strict: bool = True) -> KrausMap:
    """Random quantum operation from a truncated Haar isometry.

    A Haar unitary on output ⊗ environment (environment dimension equal to the
    input dimension) is cut down to its first ``din`` columns, i.e. an isometry
    ``in -> out ⊗ env``; slicing off the environment gives the Kraus operators.
    With ``strict`` the map is scaled by a random factor in (0, 1].
    """
    din, dout = shape_dim(input_shape), shape_dim(output_shape)
    denv = max(din, -(-din // dout))
    # first din columns of a Haar unitary = Q factor of a tall Ginibre matrix
    z = rng.normal(size=(dout * denv, din)) + 1j * rng.normal(size=(dout * denv, din))
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    iso = (q * (d / np.abs(d))).reshape(dout, denv, din)
    ks = np.transpose(iso, (1, 0, 2))
    if strict:
        ks = ks * np.sqrt(1.0 - rng.random())
    return KrausMap(input_shape, output_shape, ks).compressed()
