"""Full detector: scorer + temporal context module + snippet classifier.

Checkpoints are a versioned binary: magic ``VADC`` | version u32 |
header-length u32 | JSON header (architecture + attention settings) |
tensor count u32 | per tensor: name length u32, name bytes, ndim u32,
dims u32 each, float32 payload. Same little-endian number layout as the
feature files.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .attention import SCORER_HIDDEN, TsaConfig, make_scorer, tsa_forward
from .autograd import Tensor
from .features import FormatError
from .nn import MLP, ConvModule, conv_module_forward, conv_module_init, mlp_forward, mlp_init

CHECKPOINT_MAGIC = b"VADC"
CHECKPOINT_VERSION = 1

CLASSIFIER_HIDDEN = (128, 32)
CLASSIFIER_DROPOUT = 0.7


@dataclass
class Model:
    d: int
    scorer: MLP
    conv: ConvModule
    classifier: MLP
    tsa: TsaConfig
    tsa_enabled: bool = True

    def named_params(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        out.update(self.scorer.named_params("scorer"))
        out.update(self.conv.named_params("conv"))
        out.update(self.classifier.named_params("classifier"))
        return out


def init_model(
    d: int,
    tsa: TsaConfig,
    seed_seq: np.random.SeedSequence,
    tsa_enabled: bool = True,
    scorer_hidden: tuple[int, ...] = SCORER_HIDDEN,
) -> Model:
    scorer_seq, conv_seq, clf_seq = seed_seq.spawn(3)
    return Model(
        d=d,
        scorer=make_scorer(d, np.random.default_rng(scorer_seq), scorer_hidden),
        conv=conv_module_init(d, np.random.default_rng(conv_seq)),
        classifier=mlp_init(
            (d, *CLASSIFIER_HIDDEN, 1), np.random.default_rng(clf_seq), CLASSIFIER_DROPOUT
        ),
        tsa=tsa,
        tsa_enabled=tsa_enabled,
    )


def score_bag(
    model: Model,
    features: Tensor,
    *,
    train: bool = False,
    tsa_rng: np.random.Generator | None = None,
    dropout_rng: np.random.Generator | None = None,
):
    """Run one (T, d) bag through the full pipeline.

    Returns (snippet scores (T, 1), context features (T, d), soft selection
    or None when attention is disabled).
    """
    selection = None
    h = features
    if model.tsa_enabled:
        h, selection, _ = tsa_forward(features, model.scorer, model.tsa, tsa_rng)
    ctx = conv_module_forward(model.conv, h)
    scores = mlp_forward(model.classifier, ctx, train=train, rng=dropout_rng)
    return scores, ctx, selection


def save_checkpoint(model: Model, path) -> None:
    header = {
        "d": model.d,
        "scorer_hidden": list(model.scorer.dims[1:-1]),
        "classifier_hidden": list(model.classifier.dims[1:-1]),
        "classifier_dropout": model.classifier.dropout_p,
        "conv_kernel": model.conv.kernel,
        "tsa": {
            "num_samples": model.tsa.num_samples,
            "ratio": model.tsa.ratio,
            "sigma_noise": model.tsa.sigma_noise,
            "seed": model.tsa.seed,
            "estimator": model.tsa.estimator,
        },
        "tsa_enabled": model.tsa_enabled,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    params = model.named_params()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(struct.pack("<I", len(params)))
        for name in sorted(params):
            data = np.ascontiguousarray(params[name].data, dtype="<f4")
            name_bytes = name.encode("utf-8")
            fh.write(struct.pack("<I", len(name_bytes)))
            fh.write(name_bytes)
            fh.write(struct.pack("<I", data.ndim))
            fh.write(struct.pack(f"<{data.ndim}I", *data.shape))
            fh.write(data.tobytes())


def load_checkpoint(path) -> Model:
    with open(path, "rb") as fh:
        blob = fh.read()
    view = memoryview(blob)
    if len(view) < 12 or bytes(view[:4]) != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: not a checkpoint file")
    version, header_len = struct.unpack_from("<II", view, 4)
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    off = 12
    try:
        header = json.loads(bytes(view[off : off + header_len]).decode("utf-8"))
        off += header_len
        (count,) = struct.unpack_from("<I", view, off)
        off += 4
        tensors: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack_from("<I", view, off)
            off += 4
            name = bytes(view[off : off + name_len]).decode("utf-8")
            off += name_len
            (ndim,) = struct.unpack_from("<I", view, off)
            off += 4
            shape = struct.unpack_from(f"<{ndim}I", view, off)
            off += 4 * ndim
            size = int(np.prod(shape, dtype=np.int64)) * 4
            arr = np.frombuffer(view, dtype="<f4", count=int(np.prod(shape, dtype=np.int64)), offset=off)
            tensors[name] = arr.reshape(shape).astype(np.float32)
            off += size
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: truncated or corrupt checkpoint ({exc})") from exc

    if tuple(header["classifier_hidden"]) != CLASSIFIER_HIDDEN:
        raise FormatError(
            f"{path}: unsupported classifier layout {header['classifier_hidden']}"
        )
    tsa = TsaConfig(**header["tsa"])
    model = init_model(
        d=int(header["d"]),
        tsa=tsa,
        seed_seq=np.random.SeedSequence(0),
        tsa_enabled=bool(header["tsa_enabled"]),
        scorer_hidden=tuple(header["scorer_hidden"]),
    )
    model.classifier.dropout_p = float(header["classifier_dropout"])
    params = model.named_params()
    if set(params) != set(tensors):
        missing = set(params) ^ set(tensors)
        raise FormatError(f"{path}: parameter set mismatch ({sorted(missing)[:4]}...)")
    for name, p in params.items():
        if p.data.shape != tensors[name].shape:
            raise FormatError(
                f"{path}: tensor '{name}' has shape {tensors[name].shape}, expected {p.data.shape}"
            )
        p.data = tensors[name]
    return model
