"""Single-letter Gaussian channel quantities.

For the observation ``Y0 = R^{1/2} X0 + W0`` with side information Z0,
this module evaluates the per-row mutual information i0, the relative
entropy d0 against pure noise, the posterior-mean second moment
``q = E[E[X0|Y0,Z0] E[X0|Y0,Z0]^T]`` and the MMSE matrix ``sigma - q``.

For discrete priors the expectation over atoms is exact and only the
standard-Gaussian noise variable is integrated, by tensorized
Gauss-Hermite quadrature in low dimension or antithetic Monte Carlo
otherwise.  Gaussian priors use closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.special import logsumexp

from .cone import PsdMatrix, as_matrix, psd_sqrt, sym
from .priors import RowPrior, moments

__all__ = ["QuadratureConfig", "ChannelStats", "channel_stats", "channel_grad",
           "default_quadrature"]

_GH_MAX_ORDER = 250  # hermegauss overflows beyond roughly this order


@dataclass(frozen=True)
class QuadratureConfig:
    """Noise-integration rule: {"mode": "gh", "order": N} or {"mode": "mc", ...}."""

    mode: str = "gh"
    order: int = 40
    samples: int = 200_000
    seed: int = 0

    @classmethod
    def from_dict(cls, cfg: dict) -> "QuadratureConfig":
        mode = cfg.get("mode", "gh")
        if mode == "gh":
            return cls(mode="gh", order=int(cfg.get("order", 40)))
        if mode == "mc":
            return cls(mode="mc", samples=int(cfg.get("samples", 200_000)),
                       seed=int(cfg.get("seed", 0)))
        raise ValueError(f"unknown quadrature mode {mode!r}")


def default_quadrature(d: int) -> QuadratureConfig:
    # discrete-atom inner sums leave the integrand smooth in the noise only,
    # so moderate tensorized orders suffice up to d = 3
    if d <= 2:
        return QuadratureConfig(mode="gh", order=40)
    if d == 3:
        return QuadratureConfig(mode="gh", order=20)
    return QuadratureConfig(mode="mc", samples=200_000, seed=0)


@dataclass(frozen=True)
class ChannelStats:
    """Channel quantities at one matrix R, mutually consistent:
    ``0 <= q <= sigma`` and ``i0 + d0 = <R, sigma>/2`` up to quadrature error."""

    R: PsdMatrix
    i0: float
    d0: float
    q: PsdMatrix
    mmse: PsdMatrix
    stderr: float


def _gh_grid(d: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    if order > _GH_MAX_ORDER:
        raise ValueError(f"Gauss-Hermite order {order} exceeds the stable maximum "
                         f"{_GH_MAX_ORDER}")
    x, w = hermegauss(order)
    w = w / np.sqrt(2.0 * np.pi)
    nodes = np.stack([g.ravel() for g in np.meshgrid(*([x] * d), indexing="ij")], -1)
    wts = np.prod(np.stack(np.meshgrid(*([w] * d), indexing="ij"), -1).reshape(-1, d), 1)
    return nodes, wts


def _noise_nodes(d: int, quad: QuadratureConfig) -> tuple[np.ndarray, np.ndarray, bool]:
    """Integration nodes/weights for N(0, I_d); bool marks Monte Carlo mode."""
    if quad.mode == "gh":
        nodes, wts = _gh_grid(d, quad.order)
        return nodes, wts, False
    rng = np.random.default_rng(quad.seed)
    half = (quad.samples + 1) // 2
    z = rng.standard_normal((half, d))
    nodes = np.concatenate([z, -z])  # antithetic pairs
    wts = np.full(len(nodes), 1.0 / len(nodes))
    return nodes, wts, True


def _discrete_stats(p: RowPrior, R: np.ndarray, quad: QuadratureConfig) -> ChannelStats:
    d = p.d
    rh = psd_sqrt(R)
    m = p.atoms @ rh                            # (k, d) noiseless channel outputs
    nodes, wts, is_mc = _noise_nodes(d, quad)
    sigma = moments(p).sigma.entries

    i0_terms = np.zeros(len(nodes))
    d0_terms = np.zeros(len(nodes))
    q = np.zeros((d, d))
    logw_all = np.where(p.weights > 0, np.log(np.maximum(p.weights, 1e-300)), -np.inf)
    half_m2 = 0.5 * np.sum(m * m, axis=1)

    for i in range(p.n_atoms):
        if p.weights[i] == 0:
            continue
        lab = p.labels[i]
        mask = p.labels == lab
        logw = logw_all[mask] - logsumexp(logw_all[mask])
        mi = m[i]
        dm = m[mask] - mi                       # m_j - m_i
        # i0: -E log sum_j w_{j|z} exp(-|m_i - m_j|^2/2 + <m_j - m_i, w>)
        expo = logw[None, :] - 0.5 * np.sum(dm * dm, 1)[None, :] + nodes @ dm.T
        lse = logsumexp(expo, axis=1)
        i0_terms += -p.weights[i] * lse
        # d0: E log sum_j w_{j|z} exp(<y, m_j> - |m_j|^2/2), y = m_i + w
        e2 = logw[None, :] + (mi[None, :] + nodes) @ m[mask].T - half_m2[mask][None, :]
        d0_terms += p.weights[i] * logsumexp(e2, axis=1)
        # posterior mean second moment
        pw = np.exp(expo - lse[:, None])
        xh = pw @ p.atoms[mask]
        q += p.weights[i] * np.einsum("n,na,nb->ab", wts, xh, xh)

    i0 = float(np.sum(wts * i0_terms))
    d0 = float(np.sum(wts * d0_terms))
    q = sym(q)
    stderr = 0.0
    if is_mc:
        # antithetic pairs are the i.i.d. units
        pair = 0.5 * (i0_terms[: len(nodes) // 2] + i0_terms[len(nodes) // 2:])
        stderr = float(pair.std(ddof=1) / np.sqrt(len(pair)))
    return _finalize(p, R, i0, d0, q, sigma, stderr)


def _gaussian_stats(p: RowPrior, R: np.ndarray) -> ChannelStats:
    c = p.cov
    rh = psd_sqrt(R)
    a = rh @ c @ rh
    d = p.d
    cy = np.eye(d) + a                          # output covariance (centered)
    sign, logdet = np.linalg.slogdet(cy)
    i0 = 0.5 * float(logdet)
    mu_y = rh @ p.mean
    # KL(N(mu_y, cy) || N(0, I)) evaluated directly
    d0 = 0.5 * (float(np.trace(cy)) - d + float(mu_y @ mu_y) - float(logdet))
    mmse = c - c @ rh @ np.linalg.solve(cy, rh @ c)
    sigma = c + np.outer(p.mean, p.mean)
    q = sigma - mmse
    return _finalize(p, R, i0, d0, sym(q), sym(sigma), 0.0)


def _finalize(p, R, i0, d0, q, sigma, stderr) -> ChannelStats:
    # tiny negative posterior-moment eigenvalues come from quadrature noise
    q_m = PsdMatrix.from_estimate(q)
    mmse = PsdMatrix.from_estimate(sigma - q)
    return ChannelStats(R=PsdMatrix.from_estimate(as_matrix(R)), i0=i0, d0=d0,
                        q=q_m, mmse=mmse, stderr=stderr)


def channel_stats(p: RowPrior, R, quad: Optional[QuadratureConfig] = None) -> ChannelStats:
    """Evaluate (i0, d0, q, mmse) at a PSD channel matrix R."""
    R = as_matrix(R)
    if R.shape != (p.d, p.d):
        raise ValueError(f"R must be {p.d}x{p.d}")
    lam = float(np.linalg.eigvalsh(sym(R))[0])
    if lam < -1e-10 * (1.0 + float(np.linalg.norm(R, 2))):
        raise ValueError(f"R is not PSD (min eigenvalue {lam:.3e})")
    if p.kind == "gaussian":
        return _gaussian_stats(p, R)
    if quad is None:
        quad = default_quadrature(p.d)
    if quad.mode == "gh" and p.d > 3:
        raise ValueError("tensorized Gauss-Hermite is limited to d <= 3; use Monte Carlo")
    return _discrete_stats(p, R, quad)


def channel_grad(p: RowPrior, R, direction,
                 quad: Optional[QuadratureConfig] = None) -> float:
    """Directional derivative of i0 at R: one half <direction, mmse(R)>.

    The I-MMSE identity makes this exact; the direction must keep
    R + h * direction inside the cone for small h > 0.
    """
    R = as_matrix(R)
    h = as_matrix(direction)
    probe = R + 1e-9 * (1.0 + np.linalg.norm(R, 2)) * h
    if float(np.linalg.eigvalsh(sym(probe))[0]) < -1e-9 * (1.0 + np.linalg.norm(probe, 2)):
        raise ValueError("direction exits the PSD cone at every positive step")
    stats = channel_stats(p, R, quad)
    return 0.5 * float(np.sum(h * stats.mmse.entries))
