"""Shared oracles and gradient-check utilities.

The finite-difference oracle always evaluates in float64: either a pure
numpy reference function, or the engine itself run under a float64 context.
"""

from __future__ import annotations

import numpy as np

from wsvad import autograd as ag

FD_H = 1e-4


def fd_grads(f, arrays: list[np.ndarray], h: float = FD_H) -> list[np.ndarray]:
    """Central finite differences of a scalar-valued f over every entry."""
    out = []
    for x in arrays:
        g = np.zeros_like(x, dtype=np.float64)
        flat = x.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = float(f(*arrays))
            flat[i] = orig - h
            fm = float(f(*arrays))
            flat[i] = orig
            gflat[i] = (fp - fm) / (2.0 * h)
        out.append(g)
    return out


def max_rel_err(approx: np.ndarray, exact: np.ndarray, abs_floor: float = 1e-5) -> float:
    """Relative error with an absolute floor near zero."""
    approx = np.asarray(approx, dtype=np.float64)
    exact = np.asarray(exact, dtype=np.float64)
    denom = np.maximum(abs_floor, np.maximum(np.abs(approx), np.abs(exact)))
    return float(np.max(np.abs(approx - exact) / denom))


def engine_grads(build, arrays: list[np.ndarray]) -> tuple[float, list[np.ndarray]]:
    """Run `build` (arrays -> scalar Tensor) in float64 mode, backprop, and
    return the loss value and the leaf gradients."""
    with ag.using_dtype(np.float64):
        leaves = [ag.Tensor(a, requires_grad=True) for a in arrays]
        loss = build(*leaves)
        ag.backward(loss)
    return float(loss.data), [leaf.grad.copy() for leaf in leaves]


def check_grads(build, reference, arrays, h: float = FD_H, tol: float = 1e-3) -> float:
    """Compare engine gradients (float64 mode) against finite differences of
    an independent float64 reference; returns the worst relative error."""
    _, grads = engine_grads(build, [a.copy() for a in arrays])
    fd = fd_grads(reference, [a.astype(np.float64) for a in arrays], h=h)
    worst = max(max_rel_err(g, f) for g, f in zip(grads, fd))
    assert worst < tol, f"gradient mismatch: max rel err {worst}"
    return worst


# -- independent numpy references for the engine ops ---------------------------


def ref_conv1d_dilated(x: np.ndarray, w: np.ndarray, dilation: int) -> np.ndarray:
    """Loop-based dilated cross-correlation with symmetric zero padding."""
    k, c_in, c_out = w.shape
    t_len = x.shape[0]
    pad = (k - 1) // 2 * dilation
    out = np.zeros((t_len, c_out))
    for t in range(t_len):
        for j in range(k):
            src = t - pad + j * dilation
            if 0 <= src < t_len:
                for ci in range(c_in):
                    out[t] += x[src, ci] * w[j, ci]
    return out


def ref_softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def ref_sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def ref_temporal_normalize(features: np.ndarray, t_out: int) -> np.ndarray:
    """Brute-force chunk average: output row i' (1-based) averages input rows
    with 1-based indices in (floor(g*(i'-1)), floor(g*i')], repeating the
    nearest lower row when the chunk is empty."""
    t_in = features.shape[0]
    wide = features.astype(np.float64)
    rows = []
    for i1 in range(1, t_out + 1):
        lo = (t_in * (i1 - 1)) // t_out  # floor(g*(i'-1))
        hi = (t_in * i1) // t_out  # floor(g*i')
        members = [j1 for j1 in range(1, t_in + 1) if lo < j1 <= hi]
        if not members:
            members = [lo + 1]
        acc = np.zeros(features.shape[1], dtype=np.float64)
        for j1 in members:
            acc += wide[j1 - 1]
        rows.append(acc / len(members))
    return np.array(rows, dtype=np.float64).astype(np.float32)


def ref_auc_roc_pairwise(scores: np.ndarray, labels: np.ndarray) -> float:
    """Mann-Whitney statistic: fraction of (pos, neg) pairs ranked correctly,
    ties counting one half."""
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                wins += 1.0
            elif p == n:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def ref_auc_pr_enumeration(scores: np.ndarray, labels: np.ndarray) -> float:
    """Average precision by explicit threshold enumeration over distinct
    scores in descending order."""
    total_pos = float(np.sum(labels == 1))
    area = 0.0
    prev_recall = 0.0
    for t in sorted(set(scores.tolist()), reverse=True):
        mask = scores >= t
        tp = float(np.sum(labels[mask] == 1))
        precision = tp / float(np.sum(mask))
        recall = tp / total_pos
        area += (recall - prev_recall) * precision
        prev_recall = recall
    return area


def ref_unfold(values: np.ndarray, snippet_len: int, frame_count: int) -> np.ndarray:
    """Frame-by-frame expansion: frame f takes snippet f // snippet_len,
    clamped to the last snippet."""
    out = np.empty(frame_count, dtype=np.float64)
    for f in range(frame_count):
        idx = min(f // snippet_len, len(values) - 1)
        out[f] = values[idx]
    return out
