"""Temporal self-attention over snippet features.

A shallow scorer maps each snippet to a relevance score in (0, 1). The
top-k nominator perturbs the score vector with Gaussian noise, takes the
hard top-k per sample, one-hot encodes each rank, and averages the samples
into a row-stochastic soft-selection matrix. Fusing that matrix with the
input reduces to scaling every snippet by its inclusion probability.

The selection is made differentiable by the Monte-Carlo smoothed-perturbation
estimator: with per-sample inclusion indicators v_m and standard-normal draws
z_m, the Jacobian of the expected selection w.r.t. the scores is estimated by
mean(v_m z_m^T) / sigma, reusing the forward draws.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .nn import MLP, mlp_init, mlp_forward

SCORER_HIDDEN = (512, 256)

_ESTIMATORS = ("perturbed", "straight_through")


@dataclass(frozen=True)
class TsaConfig:
    num_samples: int = 100  # Monte-Carlo samples per selection
    ratio: float = 0.7  # fraction of snippets to keep
    sigma_noise: float = 0.05  # scale of the score perturbation
    seed: int = 0
    estimator: str = "perturbed"

    def __post_init__(self) -> None:
        if self.num_samples < 1:
            raise ValueError("num_samples must be >= 1")
        if not 0.0 < self.ratio <= 1.0:
            raise ValueError(f"ratio must be in (0, 1], got {self.ratio}")
        if self.sigma_noise <= 0.0:
            raise ValueError(f"sigma_noise must be positive, got {self.sigma_noise}")
        if self.estimator not in _ESTIMATORS:
            raise ValueError(f"estimator must be one of {_ESTIMATORS}")


def kappa_from_ratio(t_len: int, ratio: float) -> int:
    """Number of snippets to select: floor(T * ratio), never below 1."""
    if t_len < 1:
        raise ValueError(f"snippet count must be positive, got {t_len}")
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"ratio must be in (0, 1], got {ratio}")
    return max(1, int(np.floor(t_len * ratio)))


@dataclass
class SoftSelection:
    """Monte-Carlo average of per-rank one-hot selections, plus the saved
    draws needed to differentiate through it."""

    vhat: np.ndarray  # (kappa, T) row-stochastic
    inclusion: np.ndarray  # (T,) column sums of vhat, exact at kappa == T
    indices: np.ndarray  # (M, kappa) per-sample selected indices, rank order
    noise: np.ndarray  # (M, T) standard-normal draws
    sigma: float
    num_samples: int

    @property
    def kappa(self) -> int:
        return self.vhat.shape[0]

    @property
    def t_len(self) -> int:
        return self.vhat.shape[1]

    def sample_inclusion(self) -> np.ndarray:
        """Per-sample 0/1 inclusion indicators, shape (M, T)."""
        v = np.zeros((self.num_samples, self.t_len), dtype=np.float64)
        np.put_along_axis(v, self.indices, 1.0, axis=1)
        return v

    def inclusion_jacobian(self) -> np.ndarray:
        """Estimated d(inclusion)/d(scores), shape (T, T)."""
        if self.sigma == 0.0:
            raise ValueError("inclusion_jacobian undefined for unperturbed selection")
        v = self.sample_inclusion()
        return (v.T @ self.noise) / (self.num_samples * self.sigma)

    def grad_scores(self, grad_vhat: np.ndarray, estimator: str = "perturbed") -> np.ndarray:
        """Backpropagate a (kappa, T) gradient on vhat to the score vector.

        Selecting everything makes the selection constant, so the gradient is
        exactly zero; an unperturbed selection falls back to the
        straight-through rule (upstream gradient on the selected entries).
        """
        if self.kappa == self.t_len:
            return np.zeros(self.t_len, dtype=np.float64)
        if estimator == "straight_through" or self.sigma == 0.0:
            return (grad_vhat * self.vhat).sum(axis=0)
        # per-sample weight: upstream gradient summed over the selected entries
        rank_idx = np.arange(self.kappa)[None, :]
        c = grad_vhat[rank_idx, self.indices].sum(axis=1)  # (M,)
        return (self.noise.T @ c) / (self.num_samples * self.sigma)


def topk_score(
    omega: np.ndarray,
    kappa: int,
    num_samples: int,
    sigma: float,
    rng: np.random.Generator | None = None,
    *,
    noise: np.ndarray | None = None,
) -> SoftSelection:
    """Perturbed top-k nominator.

    Clones the score vector ``num_samples`` times, adds Gaussian noise of
    scale ``sigma``, takes each sample's top-``kappa`` indices by descending
    perturbed score (ties to the lower index), one-hot encodes each rank and
    averages the samples.
    """
    w = np.asarray(omega, dtype=np.float64).reshape(-1)
    t_len = w.size
    if t_len < 1:
        raise ValueError("empty score vector")
    if not 1 <= kappa <= t_len:
        raise ValueError(f"kappa must be in [1, {t_len}], got {kappa}")
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    if sigma < 0:
        raise ValueError("sigma must be non-negative")

    if noise is not None:
        z = np.asarray(noise, dtype=np.float64)
        if z.shape != (num_samples, t_len):
            raise ValueError(f"noise must have shape {(num_samples, t_len)}, got {z.shape}")
    elif sigma == 0.0:
        z = np.zeros((num_samples, t_len))
    else:
        if rng is None:
            raise ValueError("an rng is required when sigma > 0 and no noise is supplied")
        z = rng.standard_normal((num_samples, t_len))

    perturbed = w[None, :] + sigma * z
    order = np.argsort(-perturbed, axis=1, kind="stable")
    indices = order[:, :kappa]

    counts = np.stack(
        [np.bincount(indices[:, k], minlength=t_len) for k in range(kappa)]
    )
    vhat = counts / num_samples
    inclusion = counts.sum(axis=0) / num_samples
    return SoftSelection(
        vhat=vhat,
        inclusion=inclusion,
        indices=indices,
        noise=z,
        sigma=float(sigma),
        num_samples=num_samples,
    )


def make_scorer(d: int, rng: np.random.Generator, hidden: tuple[int, ...] = SCORER_HIDDEN) -> MLP:
    """The snippet relevance scorer: d -> hidden -> 1, ReLU inside, sigmoid out."""
    return mlp_init((d, *hidden, 1), rng)


def tsa_backward(
    grad_fhat: np.ndarray,
    features: np.ndarray,
    selection: SoftSelection,
    estimator: str = "perturbed",
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of the fused output w.r.t. the raw features (direct path)
    and the score vector (through the smoothed selection).

    The score gradient must still be chained through the scorer to reach its
    parameters; the feature gradient returned here covers only the direct
    multiplication path.
    """
    grad_features = selection.inclusion[:, None] * grad_fhat
    grad_incl = np.sum(grad_fhat * features, axis=1, dtype=np.float64)
    grad_vhat = np.broadcast_to(grad_incl, (selection.kappa, selection.t_len))
    grad_omega = selection.grad_scores(grad_vhat, estimator=estimator)
    return grad_features, grad_omega


def tsa_fuse(
    features: Tensor,
    omega: Tensor,
    cfg: TsaConfig,
    rng: np.random.Generator | None = None,
    *,
    noise: np.ndarray | None = None,
) -> tuple[Tensor, SoftSelection]:
    """Nominate the top-kappa from precomputed scores and reweigh the features.

    Cloning the selection over feature channels, multiplying elementwise and
    summing over ranks collapses to scaling each snippet by its inclusion
    probability, which is how the fusion is computed.
    """
    if features.ndim != 2 or features.shape[0] < 1:
        raise ag.ShapeError(f"expected (T, d) features, got {features.shape}")
    t_len = features.shape[0]
    kappa = kappa_from_ratio(t_len, cfg.ratio)
    selection = topk_score(
        omega.data, kappa, cfg.num_samples, cfg.sigma_noise, rng, noise=noise
    )
    scale = selection.inclusion.astype(features.data.dtype)
    fused = scale[:, None] * features.data

    def vjp(g):
        grad_features, grad_omega = tsa_backward(g, features.data, selection, cfg.estimator)
        return (
            grad_omega.astype(omega.data.dtype).reshape(omega.shape),
            grad_features.astype(features.data.dtype),
        )

    fhat = ag.custom_op("tsa_select", fused, (omega, features), vjp)
    return fhat, selection


def tsa_forward(
    features: Tensor,
    scorer: MLP,
    cfg: TsaConfig,
    rng: np.random.Generator | None = None,
    *,
    noise: np.ndarray | None = None,
) -> tuple[Tensor, SoftSelection, Tensor]:
    """Score snippets, nominate the top-kappa, and reweigh the features.

    Returns the attention features (T, d), the soft selection, and the raw
    scores (T, 1).
    """
    omega = mlp_forward(scorer, features)
    fhat, selection = tsa_fuse(features, omega, cfg, rng, noise=noise)
    return fhat, selection, omega
