"""Difference-maximization training over bags of snippet features.

Each mini-batch holds B normal bags followed by B abnormal bags. Bags pass
through attention (optional), the temporal context module, and the snippet
classifier; the loss pushes the top-alpha feature magnitude of each abnormal
bag above its paired normal bag by a margin, plus a binary cross-entropy on
video scores (each video scored by the mean classifier output of its
top-alpha snippets, ranked by feature magnitude like the margin term).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autograd as ag
from .attention import TsaConfig, tsa_fuse
from .autograd import Tensor
from .features import DatasetManifest, VideoRecord, load_records, require_both_classes, temporal_normalize
from .model import Model, init_model
from .nn import conv_module_forward, mlp_forward
from .optim import Adam

BCE_EPS = 1e-6


@dataclass(frozen=True)
class TrainConfig:
    t_len: int = 32  # snippets per bag after temporal resizing
    batch_bags: int = 8  # B; the actual batch holds 2*B bags
    epochs: int = 200
    lr: float = 0.001
    weight_decay: float = 0.005
    alpha: int = 3  # top instances per bag in the loss
    margin: float = 100.0
    w_margin: float = 1.0
    w_bce: float = 1.0
    tsa: TsaConfig = field(default_factory=TsaConfig)
    tsa_enabled: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.t_len < 1 or self.batch_bags < 1 or self.epochs < 1:
            raise ValueError("t_len, batch_bags and epochs must be positive")
        if not 1 <= self.alpha <= self.t_len:
            raise ValueError(f"alpha must be in [1, {self.t_len}], got {self.alpha}")
        if self.lr < 0 or self.weight_decay < 0 or self.margin < 0:
            raise ValueError("lr, weight_decay and margin must be non-negative")


@dataclass
class BatchLayout:
    """2B bags, normal first. All bags share one (T, d) shape."""

    bags: list[Tensor]
    labels: np.ndarray  # (2B,) of {0, 1}
    video_ids: list[str]

    @property
    def pairs(self) -> int:
        return len(self.bags) // 2

    def __post_init__(self) -> None:
        b = len(self.bags) // 2
        if len(self.bags) != 2 * b or b == 0:
            raise ValueError("batch must hold an even, positive number of bags")
        if not (np.all(self.labels[:b] == 0) and np.all(self.labels[b:] == 1)):
            raise ValueError("batch layout violated: expected B normal bags then B abnormal")


def build_batch(
    records: list[VideoRecord], batch_bags: int, t_len: int, rng: np.random.Generator
) -> BatchLayout:
    """Sample B normal and B abnormal videos and resize each to t_len snippets.

    Sampling is without replacement per class when the class has at least B
    videos, with replacement otherwise.
    """
    normal = [r for r in records if r.label == 0]
    abnormal = [r for r in records if r.label == 1]
    if not normal or not abnormal:
        raise ValueError(
            f"training needs both classes ({len(normal)} normal, {len(abnormal)} abnormal)"
        )
    bags: list[Tensor] = []
    ids: list[str] = []
    for pool in (normal, abnormal):
        chosen = rng.choice(len(pool), size=batch_bags, replace=len(pool) < batch_bags)
        for j in chosen:
            rec = pool[int(j)]
            bags.append(Tensor(temporal_normalize(rec.features, t_len)))
            ids.append(rec.video_id)
    labels = np.repeat([0, 1], batch_bags)
    return BatchLayout(bags=bags, labels=labels, video_ids=ids)


def top_alpha_mean(feats: Tensor, alpha: int) -> Tensor:
    """Mean of the alpha rows with the largest Euclidean magnitude.

    The selection itself is treated as constant, so gradients flow only into
    the selected rows. Magnitude ties resolve to the lower row index.
    """
    t_len = feats.shape[0]
    if not 1 <= alpha <= t_len:
        raise ValueError(f"alpha must be in [1, {t_len}], got {alpha}")
    mags = np.linalg.norm(feats.data.astype(np.float64), axis=1)
    chosen = np.argsort(-mags, kind="stable")[:alpha]
    return ag.gather_rows(feats, chosen).mean(axis=0)


def separability(bag_pos: Tensor, bag_neg: Tensor, alpha: int) -> Tensor:
    """Difference of top-alpha mean-feature magnitudes (abnormal minus normal)."""
    if bag_pos.shape[1] != bag_neg.shape[1]:
        raise ag.ShapeError(
            f"feature widths disagree: {bag_pos.shape[1]} vs {bag_neg.shape[1]}"
        )
    return ag.l2_norm(top_alpha_mean(bag_pos, alpha)) - ag.l2_norm(top_alpha_mean(bag_neg, alpha))


def _video_score(scores: Tensor, ctx: Tensor, alpha: int) -> Tensor:
    """Mean score of the video's top-alpha snippets (ranked by context-feature
    magnitude, like the margin term), clipped away from {0, 1}."""
    mags = np.linalg.norm(ctx.data.astype(np.float64), axis=1)
    chosen = np.argsort(-mags, kind="stable")[: min(alpha, scores.shape[0])]
    return ag.gather_rows(scores, chosen).mean().clip(BCE_EPS, 1.0 - BCE_EPS)


def dmt_loss(
    ctx_feats: list[Tensor],
    scores: list[Tensor],
    labels: np.ndarray,
    cfg: TrainConfig,
) -> Tensor:
    """Margin hinge on paired bag separabilities plus video-level BCE."""
    b = len(ctx_feats) // 2
    if len(ctx_feats) != 2 * b or b == 0 or len(scores) != 2 * b:
        raise ValueError("expected 2*B context features and scores")
    if not (np.all(labels[:b] == 0) and np.all(labels[b:] == 1)):
        raise ValueError("batch layout violated: expected B normal bags then B abnormal")

    hinge_sum = None
    for i in range(b):
        sep = separability(ctx_feats[b + i], ctx_feats[i], cfg.alpha)
        hinge = (cfg.margin - sep).relu()
        hinge_sum = hinge if hinge_sum is None else hinge_sum + hinge
    margin_term = hinge_sum * (1.0 / b)

    bce_sum = None
    for j, u in enumerate(scores):
        s = _video_score(u, ctx_feats[j], cfg.alpha)
        nll = -(s.log()) if labels[j] == 1 else -((1.0 - s).log())
        bce_sum = nll if bce_sum is None else bce_sum + nll
    bce_term = bce_sum * (1.0 / (2 * b))

    return margin_term * cfg.w_margin + bce_term * cfg.w_bce


def _batch_forward(
    model: Model,
    batch: BatchLayout,
    noise_rng: np.random.Generator,
    drop_rng: np.random.Generator,
) -> tuple[list[Tensor], list[Tensor]]:
    """Train-mode forward over a whole batch.

    The scorer and classifier are row-wise, so they run once on the stacked
    bags; attention nomination and the context module stay per-bag.
    """
    n = len(batch.bags)
    t_len = batch.bags[0].shape[0]
    rows = [np.arange(i * t_len, (i + 1) * t_len) for i in range(n)]

    if model.tsa_enabled:
        stacked = Tensor(np.concatenate([bag.data for bag in batch.bags], axis=0))
        omega_all = mlp_forward(model.scorer, stacked)
        fused = [
            tsa_fuse(bag, ag.gather_rows(omega_all, rows[i]), model.tsa, noise_rng)[0]
            for i, bag in enumerate(batch.bags)
        ]
    else:
        fused = list(batch.bags)

    ctx_feats = [conv_module_forward(model.conv, h) for h in fused]
    ctx_all = ag.concat(ctx_feats, axis=0) if n > 1 else ctx_feats[0]
    u_all = mlp_forward(model.classifier, ctx_all, train=True, rng=drop_rng)
    scores = [ag.gather_rows(u_all, rows[i]) for i in range(n)]
    return ctx_feats, scores


@dataclass
class TrainResult:
    model: Model
    log: list[dict]  # per-epoch: epoch, loss, optional val_auc


def train(
    manifest: DatasetManifest,
    base_dir: str | Path,
    cfg: TrainConfig,
    *,
    val_fn=None,
    val_every: int = 0,
) -> TrainResult:
    """Fit the detector on one training split. Fully determined by cfg.seed.

    ``val_fn``, when given, is called with the current model and its return
    value is logged as ``val_auc`` every ``val_every`` epochs.
    """
    require_both_classes(manifest)
    records = load_records(manifest, base_dir)
    d = manifest.d

    root = np.random.SeedSequence(cfg.seed)
    init_seq, batch_seq, noise_seq, drop_seq = root.spawn(4)
    model = init_model(d, cfg.tsa, init_seq, tsa_enabled=cfg.tsa_enabled)
    batch_rng = np.random.default_rng(batch_seq)
    noise_rng = np.random.default_rng(noise_seq)
    drop_rng = np.random.default_rng(drop_seq)

    opt = Adam(model.named_params(), lr=cfg.lr, weight_decay=cfg.weight_decay)
    log: list[dict] = []
    for epoch in range(1, cfg.epochs + 1):
        batch = build_batch(records, cfg.batch_bags, cfg.t_len, batch_rng)
        ctx_feats, scores = _batch_forward(model, batch, noise_rng, drop_rng)
        loss = dmt_loss(ctx_feats, scores, batch.labels, cfg)
        loss_val = loss.item()
        ag.backward(loss)
        opt.step()
        opt.zero_grad()

        row = {"epoch": epoch, "loss": loss_val}
        if val_fn is not None and val_every > 0 and epoch % val_every == 0:
            row["val_auc"] = float(val_fn(model))
        log.append(row)
    return TrainResult(model=model, log=log)


@dataclass
class ProbeResult:
    """Monte-Carlo separability draws over an alpha grid."""

    alphas: list[int]
    samples: np.ndarray  # (trials, len(alphas))

    @property
    def mean(self) -> np.ndarray:
        return self.samples.mean(axis=0)

    @property
    def stderr(self) -> np.ndarray:
        return self.samples.std(axis=0, ddof=1) / np.sqrt(self.samples.shape[0])

    def paired_diff(self, i: int, j: int) -> tuple[float, float]:
        """Mean and standard error of samples[:, i] - samples[:, j]."""
        diff = self.samples[:, i] - self.samples[:, j]
        return float(diff.mean()), float(diff.std(ddof=1) / np.sqrt(diff.size))


def theorem1_probe(
    d: int,
    t_len: int,
    eps: int,
    alphas: list[int],
    trials: int,
    anomaly_shift: float,
    noise_std: float = 1.0,
    seed: int = 0,
) -> ProbeResult:
    """Empirical expected separability of raw bags as a function of alpha.

    Abnormal bags carry ``eps`` mean-shifted snippets out of ``t_len``;
    normal bags carry none. No model is involved: this measures the
    selection/averaging statistics of the loss itself.
    """
    if not 1 <= eps <= t_len:
        raise ValueError(f"eps must be in [1, {t_len}], got {eps}")
    if any(not 1 <= a <= t_len for a in alphas):
        raise ValueError(f"alphas must be within [1, {t_len}]")
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal(d)
    direction /= np.linalg.norm(direction)

    neg = rng.normal(0.0, noise_std, size=(trials, t_len, d))
    pos = rng.normal(0.0, noise_std, size=(trials, t_len, d))
    pos[:, :eps, :] += anomaly_shift * direction

    def top_alpha_norms(bags: np.ndarray) -> np.ndarray:
        mags = np.linalg.norm(bags, axis=2)
        order = np.argsort(-mags, axis=1, kind="stable")
        ranked = np.take_along_axis(bags, order[:, :, None], axis=1)
        sums = np.cumsum(ranked, axis=1)
        cols = [np.linalg.norm(sums[:, a - 1, :] / a, axis=1) for a in alphas]
        return np.stack(cols, axis=1)

    samples = top_alpha_norms(pos) - top_alpha_norms(neg)
    return ProbeResult(alphas=list(alphas), samples=samples)
