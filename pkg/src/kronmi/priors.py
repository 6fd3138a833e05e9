"""Per-row signal/side-information laws and their moments.

A row prior is either a finite list of (x, z, weight) atoms, where z is
a discrete side-information label observed alongside the data, or a
Gaussian law (no side information, closed forms only).  Discrete priors
are the ones the exact-posterior lab can enumerate.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Optional

import numpy as np

from .cone import PsdMatrix, kron, sym

__all__ = [
    "RowPrior",
    "MomentSet",
    "discrete_prior",
    "gaussian_prior",
    "rademacher",
    "sparse_rademacher",
    "simplex_communities",
    "prior_from_preset",
    "moments",
    "sample_rows",
    "enumerate_configs",
    "EnumerationCapExceeded",
]


class EnumerationCapExceeded(ValueError):
    """Raised when a product enumeration would exceed the configured cap."""


@dataclass(frozen=True)
class RowPrior:
    """Joint law of one signal row X0 and its side-information label Z0."""

    d: int
    kind: str                      # "discrete" | "gaussian"
    atoms: Optional[np.ndarray]    # (k, d)
    labels: Optional[np.ndarray]   # (k,) integer labels
    weights: Optional[np.ndarray]  # (k,), sums to 1
    mean: Optional[np.ndarray]     # (d,) gaussian only
    cov: Optional[np.ndarray]      # (d, d) gaussian only
    rho: float                     # row-norm bound scale, ||x|| <= sqrt(d) rho

    @property
    def is_discrete(self) -> bool:
        return self.kind == "discrete"

    @property
    def n_atoms(self) -> int:
        return 0 if self.atoms is None else self.atoms.shape[0]

    def label_values(self) -> np.ndarray:
        return np.unique(self.labels)

    def conditional_weights(self, label: int) -> np.ndarray:
        """Atom weights conditioned on observing the label; zero off-support."""
        mask = self.labels == label
        w = np.where(mask, self.weights, 0.0)
        return w / w.sum()


def discrete_prior(atoms, weights, labels=None, rho: Optional[float] = None) -> RowPrior:
    atoms = np.atleast_2d(np.asarray(atoms, dtype=float))
    weights = np.asarray(weights, dtype=float)
    if len(weights) != atoms.shape[0]:
        raise ValueError("one weight per atom required")
    if abs(weights.sum() - 1.0) > 1e-12:
        raise ValueError("weights must sum to 1")
    if np.any(weights < 0):
        raise ValueError("weights must be nonnegative")
    if labels is None:
        labels = np.zeros(atoms.shape[0], dtype=int)
    labels = np.asarray(labels, dtype=int)
    d = atoms.shape[1]
    norms = np.linalg.norm(atoms, axis=1)
    min_rho = float(norms.max(initial=0.0)) / np.sqrt(d)
    rho = max(1.0, min_rho) if rho is None else float(rho)
    if rho < min_rho - 1e-12:
        raise ValueError(f"rho={rho} violates the row-norm bound (needs >= {min_rho:.6g})")
    return RowPrior(d=d, kind="discrete", atoms=atoms, labels=labels,
                    weights=weights, mean=None, cov=None, rho=rho)


def gaussian_prior(mean, cov, rho: float = 1.0) -> RowPrior:
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    d = mean.shape[0]
    if cov.shape != (d, d):
        raise ValueError("covariance must be d x d")
    PsdMatrix.from_symmetric(cov)  # validates symmetry and PSD-ness
    return RowPrior(d=d, kind="gaussian", atoms=None, labels=None,
                    weights=None, mean=mean, cov=cov, rho=max(1.0, float(rho)))


def rademacher(d: int = 1) -> RowPrior:
    """Uniform on {-1, +1}^d (independent signs across coordinates)."""
    atoms = np.array(list(product([1.0, -1.0], repeat=d)))
    w = np.full(len(atoms), 1.0 / len(atoms))
    return discrete_prior(atoms, w)


def sparse_rademacher(p: float, d: int = 1) -> RowPrior:
    """Each coordinate is 0 w.p. 1-p and +-1/sqrt(p) w.p. p/2; unit variance."""
    if not 0 < p <= 1:
        raise ValueError("sparsity level must be in (0, 1]")
    vals = [(0.0, 1.0 - p), (1.0 / np.sqrt(p), p / 2.0), (-1.0 / np.sqrt(p), p / 2.0)]
    atoms, weights = [], []
    for combo in product(vals, repeat=d):
        atoms.append([v for v, _ in combo])
        weights.append(float(np.prod([w for _, w in combo])))
    atoms = np.array(atoms)
    weights = np.array(weights)
    keep = weights > 0
    return discrete_prior(atoms[keep], weights[keep])


def simplex_communities(k: int) -> RowPrior:
    """One-hot community membership: x = e_j w.p. 1/k, j = 1..k."""
    if k < 1:
        raise ValueError("need at least one community")
    return discrete_prior(np.eye(k), np.full(k, 1.0 / k))


def prior_from_preset(name: str, **kwargs) -> RowPrior:
    """Resolve the CLI preset names."""
    if name == "rademacher":
        return rademacher(int(kwargs.get("d", 1)))
    if name == "gaussian":
        d = int(kwargs.get("d", 1))
        mean = kwargs.get("mean", np.zeros(d))
        cov = kwargs.get("cov", np.eye(d))
        return gaussian_prior(mean, cov)
    if name == "sparse_rademacher":
        return sparse_rademacher(float(kwargs["p"]), int(kwargs.get("d", 1)))
    if name == "simplex_communities":
        return simplex_communities(int(kwargs["k"]))
    raise ValueError(f"unknown prior preset {name!r}")


@dataclass(frozen=True)
class MomentSet:
    """Second moments of a row prior and the induced Kronecker square."""

    sigma: PsdMatrix                # E[X0 X0^T]
    sigma_kron: np.ndarray          # sigma kron sigma
    fourth_bound: float             # E[||X0||^4]


def moments(p: RowPrior) -> MomentSet:
    if p.is_discrete:
        sigma = np.einsum("k,ka,kb->ab", p.weights, p.atoms, p.atoms)
        fourth = float(np.sum(p.weights * np.linalg.norm(p.atoms, axis=1) ** 4))
    else:
        sigma = p.cov + np.outer(p.mean, p.mean)
        # E||X||^4 for X ~ N(mu, C): (tr C + |mu|^2)^2 + 2 tr(C^2) + 4 mu^T C mu
        tc = float(np.trace(p.cov))
        mm = float(p.mean @ p.mean)
        fourth = (tc + mm) ** 2 + 2.0 * float(np.sum(p.cov * p.cov)) \
            + 4.0 * float(p.mean @ p.cov @ p.mean)
    sigma = sym(sigma)
    return MomentSet(sigma=PsdMatrix.from_symmetric(sigma),
                     sigma_kron=kron(sigma, sigma),
                     fourth_bound=fourth)


def sample_rows(p: RowPrior, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """n i.i.d. rows plus their side-information labels, deterministic in the seed.

    Streams derive from ``numpy.random.default_rng(seed)``; concurrent
    workers should spawn children of one SeedSequence rather than share
    a seed.
    """
    if n < 1:
        raise ValueError("need at least one row")
    rng = np.random.default_rng(seed)
    if p.is_discrete:
        idx = rng.choice(p.n_atoms, size=n, p=p.weights)
        return p.atoms[idx].copy(), p.labels[idx].copy()
    x = rng.multivariate_normal(p.mean, p.cov, size=n, method="cholesky" if
                                np.linalg.eigvalsh(p.cov)[0] > 1e-12 else "eigh")
    return x, np.zeros(n, dtype=int)


def enumerate_configs(p: RowPrior, n: int, cap: int = 4096,
                      row_labels=None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Full product-measure enumeration of n-row signal matrices.

    Returns (configs, probs, config_labels) with configs of shape
    (count, n, d) and probabilities summing to 1.  When ``row_labels``
    is given, row i ranges only over atoms carrying that label and the
    probabilities are the label-conditional ones (the deterministic
    side-information pattern used by block embeddings).
    """
    if not p.is_discrete:
        raise ValueError("enumeration needs a discrete prior")
    if row_labels is None:
        per_row = [np.arange(p.n_atoms)] * n
        per_row_w = [p.weights] * n
    else:
        row_labels = np.asarray(row_labels, dtype=int)
        if len(row_labels) != n:
            raise ValueError("one label per row required")
        per_row, per_row_w = [], []
        for lab in row_labels:
            sel = np.nonzero(p.labels == lab)[0]
            if len(sel) == 0:
                raise ValueError(f"no atoms carry label {lab}")
            per_row.append(sel)
            per_row_w.append(p.weights[sel] / p.weights[sel].sum())
    total = int(np.prod([len(s) for s in per_row], dtype=np.int64))
    if total > cap:
        raise EnumerationCapExceeded(
            f"{total} configurations exceed the cap of {cap}")
    configs = np.empty((total, n, p.d))
    probs = np.ones(total)
    labels = np.empty((total, n), dtype=int)
    for c, combo in enumerate(product(*[range(len(s)) for s in per_row])):
        for i, jj in enumerate(combo):
            j = per_row[i][jj]
            configs[c, i] = p.atoms[j]
            labels[c, i] = p.labels[j]
            probs[c] *= per_row_w[i][jj]
    return configs, probs, labels
