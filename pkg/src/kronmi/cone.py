"""Matrix-cone and tensor-algebra primitives.

Kronecker products, the column-major vec/unvec pair, Loewner-order
comparisons, PSD projection, the rank-one frame of symmetric space,
coupling operators held in factored form, and the convexity test for
quadratic Kronecker forms.

Conventions: vec stacks columns (Fortran order), so
``(A kron B) vec(V) = vec(B V A^T)`` and the trace inner product is
``<A, B> = tr(A^T B)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "PsdMatrix",
    "CouplingOperator",
    "FrameBasis",
    "kron",
    "vec",
    "unvec",
    "sym",
    "psd_sqrt",
    "psd_project",
    "eig_clip",
    "loewner_leq",
    "min_eigval",
    "frame_basis",
    "duplication_matrix",
    "convexity_check",
    "range_projection",
]

_SYM_RTOL = 1e-12


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two matrices (numpy.kron with 2-d coercion)."""
    return np.kron(np.atleast_2d(np.asarray(a, dtype=float)),
                   np.atleast_2d(np.asarray(b, dtype=float)))


def vec(m: np.ndarray) -> np.ndarray:
    """Column-major vectorization."""
    return np.asarray(m, dtype=float).reshape(-1, order="F")


def unvec(v: np.ndarray, d: int) -> np.ndarray:
    """Inverse of :func:`vec` for a d x d matrix."""
    return np.asarray(v, dtype=float).reshape(d, d, order="F")


def sym(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return 0.5 * (m + m.T)


def min_eigval(m: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(sym(m))[0])


def loewner_leq(a: np.ndarray, b: np.ndarray, tol: float = 1e-9) -> bool:
    """True iff the smallest eigenvalue of ``b - a`` is >= -tol."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return min_eigval(b - a) >= -tol


def loewner_tol(m: np.ndarray, base: float = 1e-9) -> float:
    """Absolute eigenvalue tolerance scaled by (1 + spectral norm).

    Formulas are routinely evaluated near the cone boundary, so a fixed
    absolute tolerance is too strict for large matrices and too loose
    for small ones.
    """
    return base * (1.0 + float(np.linalg.norm(m, 2)))


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    """Symmetric eigen square root with eigenvalues floored at zero."""
    w, v = np.linalg.eigh(sym(m))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def eig_clip(m: np.ndarray, lo: float = 0.0, hi: Optional[float] = None) -> np.ndarray:
    """Clip the eigenvalues of a symmetric matrix into [lo, hi]."""
    w, v = np.linalg.eigh(sym(m))
    w = np.clip(w, lo, hi)
    return (v * w) @ v.T


@dataclass(frozen=True)
class PsdMatrix:
    """A symmetric matrix carrying its certified PSD status.

    ``entries`` must be symmetric to relative tolerance 1e-12.  When
    ``psd`` is True the smallest eigenvalue is at least
    ``-1e-10 * (1 + spectral norm)``.  Construction via
    :meth:`from_symmetric` raises on violations; :meth:`from_estimate`
    records the observed minimum eigenvalue instead (for Monte Carlo
    outputs that may dip slightly below the cone).
    """

    entries: np.ndarray
    min_eig: float
    psd: bool

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def from_symmetric(cls, m: np.ndarray, require_psd: bool = True) -> "PsdMatrix":
        m = np.asarray(m, dtype=float)
        scale = max(1.0, float(np.abs(m).max())) if m.size else 1.0
        if np.abs(m - m.T).max(initial=0.0) > _SYM_RTOL * scale:
            raise ValueError("matrix is not symmetric within tolerance")
        m = sym(m)
        lam = min_eigval(m)
        ok = lam >= -1e-10 * (1.0 + float(np.linalg.norm(m, 2)))
        if require_psd and not ok:
            raise ValueError(f"matrix is not PSD (min eigenvalue {lam:.3e})")
        return cls(entries=m, min_eig=lam, psd=ok)

    @classmethod
    def from_estimate(cls, m: np.ndarray) -> "PsdMatrix":
        m = sym(np.asarray(m, dtype=float))
        lam = min_eigval(m)
        ok = lam >= -1e-10 * (1.0 + float(np.linalg.norm(m, 2)))
        return cls(entries=m, min_eig=lam, psd=ok)

    def __array__(self, dtype=None) -> np.ndarray:
        return np.asarray(self.entries, dtype=dtype)


def as_matrix(m) -> np.ndarray:
    """Coerce a PsdMatrix, scalar, or array-like to a float ndarray."""
    if isinstance(m, PsdMatrix):
        return m.entries
    a = np.asarray(m, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    return a


def psd_project(m: np.ndarray) -> np.ndarray:
    """Eigenvalue-clipped nearest PSD matrix in Frobenius norm."""
    return eig_clip(sym(m), lo=0.0)


@dataclass(frozen=True)
class FrameBasis:
    """The d^2 rank-one PSD matrices framing the symmetric d x d space.

    Indexed over ordered pairs (a, b): ``e_a e_a^T`` on the diagonal,
    ``(e_a + e_b)(e_a + e_b)^T / 2`` for a < b and
    ``(e_a - e_b)(e_a - e_b)^T / 2`` for a > b.  Each element has rank
    one, unit Frobenius norm and unit trace; together they sum to
    ``d * I`` and frame the symmetric space with bounds 1 and d.
    """

    d: int
    matrices: np.ndarray  # (d^2, d, d)
    vectors: np.ndarray   # (d^2, d); matrices[k] == outer(vectors[k], vectors[k])

    def __len__(self) -> int:
        return self.d * self.d

    def coefficients(self, m: np.ndarray) -> np.ndarray:
        """Frame coefficients <B_k, M> for a symmetric matrix."""
        return np.einsum("kij,ij->k", self.matrices, np.asarray(m, dtype=float))


def frame_basis(d: int) -> FrameBasis:
    if d < 1:
        raise ValueError("dimension must be >= 1")
    vecs = np.zeros((d * d, d))
    k = 0
    # pair order (a, b) with b the outer index; any fixed bijection works
    # since every consumer sums over the whole frame
    for b in range(d):
        for a in range(d):
            e = np.zeros(d)
            if a == b:
                e[a] = 1.0
            elif a < b:
                e[a] = e[b] = 1.0 / np.sqrt(2.0)
            else:
                e[a] = 1.0 / np.sqrt(2.0)
                e[b] = -1.0 / np.sqrt(2.0)
            vecs[k] = e
            k += 1
    mats = np.einsum("ki,kj->kij", vecs, vecs)
    return FrameBasis(d=d, matrices=mats, vectors=vecs)


def duplication_matrix(d: int) -> np.ndarray:
    """The d^2 x d(d+1)/2 matrix with vec(M) = D vech(M) for symmetric M.

    vech stacks the on-or-below-diagonal entries column by column.
    """
    dn = np.zeros((d * d, d * (d + 1) // 2))
    col = 0
    for j in range(d):
        for i in range(j, d):
            dn[i + j * d, col] = 1.0
            if i != j:
                dn[j + i * d, col] = 1.0
            col += 1
    return dn


def vech(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    d = m.shape[0]
    return np.concatenate([m[j:, j] for j in range(d)])


@dataclass
class CouplingOperator:
    """A d^2 x d^2 coupling held as a weighted rank decomposition.

    ``S = sum_k lam_k vec(V_k) vec(V_k)^T`` exposes the unique linear
    maps with ``<S, M1 kron M2> = <T(M1), M2> = <M1, Tstar(M2)>``:

        T(M)     = sum_k lam_k V_k M V_k^T
        Tstar(M) = sum_k lam_k V_k^T M V_k

    The dense form is materialized lazily and only where a spectral
    quantity of S itself is needed (norms, eigen-factored noise,
    convexity test); everything else stays in the factored form, which
    keeps d up to ~8 cheap.
    """

    d: int
    lams: np.ndarray           # (m,)
    mats: np.ndarray           # (m, d, d)
    _dense: Optional[np.ndarray] = field(default=None, repr=False)
    _eig: Optional[tuple] = field(default=None, repr=False)

    @classmethod
    def from_terms(cls, terms: Sequence[tuple], d: Optional[int] = None) -> "CouplingOperator":
        if not terms:
            if d is None:
                raise ValueError("empty term list needs an explicit dimension")
            return cls(d=d, lams=np.zeros(0), mats=np.zeros((0, d, d)))
        mats = np.stack([np.asarray(v, dtype=float) for _, v in terms])
        lams = np.array([float(l) for l, _ in terms])
        dd = mats.shape[1]
        if mats.shape[1] != mats.shape[2]:
            raise ValueError("coupling factors must be square")
        if d is not None and d != dd:
            raise ValueError(f"dimension mismatch: expected {d}, factors are {dd}x{dd}")
        return cls(d=dd, lams=lams, mats=mats)

    @classmethod
    def from_dense(cls, s: np.ndarray, d: int) -> "CouplingOperator":
        s = sym(np.asarray(s, dtype=float))
        if s.shape != (d * d, d * d):
            raise ValueError("dense coupling must be d^2 x d^2")
        w, v = np.linalg.eigh(s)
        keep = np.abs(w) > 1e-14 * max(1.0, np.abs(w).max(initial=0.0))
        mats = np.stack([unvec(v[:, k], d) for k in np.nonzero(keep)[0]]) \
            if keep.any() else np.zeros((0, d, d))
        op = cls(d=d, lams=w[keep], mats=mats)
        op._dense = s
        return op

    @property
    def rank(self) -> int:
        return len(self.lams)

    def dense(self) -> np.ndarray:
        if self._dense is None:
            s = np.zeros((self.d * self.d, self.d * self.d))
            for lam, v in zip(self.lams, self.mats):
                u = vec(v)
                s += lam * np.outer(u, u)
            self._dense = s
        return self._dense

    def is_psd(self, tol: float = 1e-10) -> bool:
        if len(self.lams) and np.all(self.lams >= 0):
            return True
        s = self.dense()
        return min_eigval(s) >= -tol * (1.0 + float(np.linalg.norm(s, 2)))

    def spectral_norm(self) -> float:
        if self.rank == 0:
            return 0.0
        return float(np.linalg.norm(self.dense(), 2))

    def apply_T(self, m: np.ndarray) -> np.ndarray:
        m = as_matrix(m)
        if m.shape != (self.d, self.d):
            raise ValueError(f"dimension mismatch: expected {self.d}x{self.d}")
        if self.rank == 0:
            return np.zeros((self.d, self.d))
        return np.einsum("k,kab,bc,kdc->ad", self.lams, self.mats, m, self.mats)

    def apply_Tstar(self, m: np.ndarray) -> np.ndarray:
        m = as_matrix(m)
        if m.shape != (self.d, self.d):
            raise ValueError(f"dimension mismatch: expected {self.d}x{self.d}")
        if self.rank == 0:
            return np.zeros((self.d, self.d))
        return np.einsum("k,kba,bc,kcd->ad", self.lams, self.mats, m, self.mats)

    def quad(self, m1: np.ndarray, m2: np.ndarray) -> float:
        """<S, M1 kron M2> evaluated through the factored form."""
        return float(np.sum(self.apply_T(as_matrix(m1)) * as_matrix(m2)))

    def scaled(self, c: float) -> "CouplingOperator":
        return CouplingOperator(d=self.d, lams=c * self.lams, mats=self.mats)

    def eigen_terms(self) -> tuple[np.ndarray, np.ndarray]:
        """Orthonormal factored form (lams, Vs) from the dense eigensystem.

        vec(Vs[k]) are orthonormal, so independent standard-normal noise
        attaches to each factor; used by the exact-posterior lab.
        """
        if self._eig is None:
            s = self.dense()
            w, v = np.linalg.eigh(s)
            keep = w > 1e-12 * max(1.0, np.abs(w).max(initial=0.0))
            neg = w < -1e-8 * max(1.0, np.abs(w).max(initial=0.0))
            if neg.any():
                raise ValueError("coupling is not PSD; symmetrize the model first")
            lams = w[keep]
            mats = np.stack([unvec(v[:, k], self.d) for k in np.nonzero(keep)[0]]) \
                if keep.any() else np.zeros((0, self.d, self.d))
            self._eig = (lams, mats)
        return self._eig


def convexity_check(op: CouplingOperator, tol: float = 1e-10) -> bool:
    """Whether M -> <S, M kron M> is convex on symmetric matrices.

    Tests PSD-ness of ``sum_l lam_l Dn^T {(V_l kron V_l) + transpose} Dn``
    with Dn the duplication matrix.
    """
    d = op.d
    dn = duplication_matrix(d)
    h = np.zeros((dn.shape[1], dn.shape[1]))
    for lam, v in zip(op.lams, op.mats):
        k = kron(v, v)
        h += lam * (dn.T @ (k + k.T) @ dn)
    return min_eigval(h) >= -tol * (1.0 + float(np.linalg.norm(h, 2)))


def range_projection(m: np.ndarray, generator: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Frobenius projection of symmetric M onto the cone generated by a PSD matrix.

    The cone {A PSD : A <= t * generator for some t >= 0} consists of the
    PSD matrices supported on range(generator); the projection compresses
    M onto that range and clips eigenvalues there.  Identity whenever the
    generator has full rank.
    """
    g = sym(np.asarray(generator, dtype=float))
    w, v = np.linalg.eigh(g)
    keep = w > tol * max(1.0, w.max(initial=0.0))
    u = v[:, keep]
    if u.shape[1] == g.shape[0]:
        return psd_project(m)
    inner = u.T @ sym(m) @ u
    return u @ psd_project(inner) @ u.T
