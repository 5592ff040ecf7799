"""RBF-kernel SVM trained by sequential minimal optimisation.

The solver works on the dual problem::

    min_a  1/2 a^T Q a - sum(a)   s.t.  0 <= a_i <= C,  sum(y_i a_i) = 0

with ``Q_ij = y_i y_j exp(-gamma |x_i - x_j|^2)``. Each iteration picks the
maximal-violating index ``i`` and the partner ``j`` giving the largest
second-order decrease of the objective, then solves the two-variable
sub-problem analytically. Training stops once the KKT gap falls below
``tol``.

Model files are JSON::

    {
      "format": "smokedet-svm", "version": 1,
      "kernel": "rbf", "gamma": float, "C": float,
      "feature_dim": int, "bias": float,
      "support_vectors": [[float, ...], ...],   # raw (unscaled) features
      "alphas": [float, ...],                  # alpha_i * y_i
      "scale": null | {"mean": [...], "std": [...]},
      "meta": {...}                            # free-form provenance
    }

Floats are written with ``repr`` precision, so a save/load round trip is
exact. A file may instead hold several named models as
``{"format": "smokedet-svm-bundle", "version": 1, "models": {name: model}}``.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ContractError, FormatError

FORMAT_TAG = "smokedet-svm"
BUNDLE_TAG = "smokedet-svm-bundle"
FORMAT_VERSION = 1

# (C, gamma) pairs commonly used for texture classification
DEFAULT_GRID = ((2.0, 100.0), (0.001, 1.0), (50.0, 1000.0), (0.5, 1000.0), (0.02, 1000.0))

_TAU = 1e-12


@dataclass
class SvmModel:
    support_vectors: np.ndarray
    alphas: np.ndarray
    bias: float
    gamma: float
    C: float
    feature_dim: int
    scale_mean: Optional[np.ndarray] = None
    scale_std: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def transform(self, X: np.ndarray) -> np.ndarray:
        if self.scale_mean is None:
            return X
        return (X - self.scale_mean) / self.scale_std

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.feature_dim:
            raise ContractError(f"feature dimension {X.shape[1]} != model dimension {self.feature_dim}")
        if len(self.alphas) == 0:
            return np.full(len(X), self.bias)
        K = rbf_kernel(self.transform(X), self.transform(self.support_vectors), self.gamma)
        return K @ self.alphas + self.bias

    # -- serialisation -----------------------------------------------------

    def to_dict(self) -> dict:
        scale = None
        if self.scale_mean is not None:
            scale = {"mean": self.scale_mean.tolist(), "std": self.scale_std.tolist()}
        return {
            "format": FORMAT_TAG,
            "version": FORMAT_VERSION,
            "kernel": "rbf",
            "gamma": float(self.gamma),
            "C": float(self.C),
            "feature_dim": int(self.feature_dim),
            "bias": float(self.bias),
            "support_vectors": self.support_vectors.tolist(),
            "alphas": self.alphas.tolist(),
            "scale": scale,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SvmModel":
        if d.get("format") != FORMAT_TAG:
            raise FormatError(f"not an SVM model (format={d.get('format')!r})")
        if d.get("version") != FORMAT_VERSION:
            raise FormatError(f"unsupported model version {d.get('version')!r}")
        if d.get("kernel") != "rbf":
            raise FormatError(f"unsupported kernel {d.get('kernel')!r}")
        dim = int(d["feature_dim"])
        sv = np.asarray(d["support_vectors"], dtype=np.float64).reshape(-1, dim)
        scale = d.get("scale")
        return cls(sv, np.asarray(d["alphas"], dtype=np.float64), float(d["bias"]),
                   float(d["gamma"]), float(d["C"]), dim,
                   None if scale is None else np.asarray(scale["mean"], dtype=np.float64),
                   None if scale is None else np.asarray(scale["std"], dtype=np.float64),
                   dict(d.get("meta", {})))


def save_model(path, model) -> None:
    """Write one model, or a ``{name: model}`` mapping as a bundle."""
    if isinstance(model, dict):
        doc = {"format": BUNDLE_TAG, "version": FORMAT_VERSION,
               "models": {k: m.to_dict() for k, m in model.items()}}
    else:
        doc = model.to_dict()
    Path(path).write_text(json.dumps(doc))


def load_model(path):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not a JSON model file ({exc})") from None
    if doc.get("format") == BUNDLE_TAG:
        return {k: SvmModel.from_dict(m) for k, m in doc["models"].items()}
    return SvmModel.from_dict(doc)


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


def _check_training_data(samples, labels):
    X = np.asarray(samples, dtype=np.float64)
    y = np.asarray(labels)
    if X.ndim != 2:
        raise ContractError(f"samples must be a 2-D array, got shape {X.shape}")
    if len(X) != len(y):
        raise ContractError("samples and labels differ in length")
    if not np.isfinite(X).all():
        raise ContractError("samples contain non-finite values")
    if not np.isin(y, (-1, 1)).all():
        raise ContractError("labels must be +1 or -1")
    if not ((y == 1).any() and (y == -1).any()):
        raise ContractError("training needs at least one sample of each label")
    return X, y.astype(np.float64)


def fit_scaler(X: np.ndarray, mask, balance: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Z-score statistics for the masked columns; other columns pass through.

    With ``balance`` the masked block is further shrunk so its total
    variance equals that of the unmasked columns, keeping both blocks on the
    same footing inside one RBF distance.
    """
    mask = np.asarray(mask, dtype=bool)
    mean = np.where(mask, X.mean(axis=0), 0.0)
    std = np.where(mask, X.std(axis=0), 1.0)
    std = np.where(std > 0, std, 1.0)
    if balance and mask.any() and not mask.all():
        rest = X[:, ~mask].var(axis=0).sum()
        if rest > 0:
            std = np.where(mask, std * np.sqrt(mask.sum() / rest), std)
    return mean, std


def smo_solve(K: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-3,
              max_passes: int = 10, max_iter: Optional[int] = None):
    """Solve the SVM dual for a precomputed kernel matrix.

    Returns ``(alpha, bias, iterations)`` where the decision function is
    ``sum(alpha_i y_i K(x_i, x)) + bias``. ``max_passes`` bounds the number of
    consecutive sweeps (``n`` iterations each) that fail to move any
    multiplier before giving up.
    """
    n = len(y)
    Q = K * np.outer(y, y)
    QD = np.diag(Q).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)
    if max_iter is None:
        max_iter = max(100_000, 100 * n)
    stalled = 0
    it = 0
    while it < max_iter:
        yG = -y * G
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            break
        i = int(np.argmax(np.where(up, yG, -np.inf)))
        g_max = yG[i]
        g_min = np.min(np.where(low, yG, np.inf))
        if g_max - g_min < tol:
            break
        # second-order choice of j among violating partners
        b = g_max - yG
        a = QD[i] + QD - 2.0 * y[i] * y * Q[i]
        a = np.where(a > 0, a, _TAU)
        score = np.where(low & (b > 0), -(b * b) / a, np.inf)
        j = int(np.argmin(score))
        if not np.isfinite(score[j]):
            break

        ai_old, aj_old = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = QD[i] + QD[j] + 2.0 * Q[i, j]
            quad = quad if quad > 0 else _TAU
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            elif alpha[j] > C:
                alpha[j] = C
                alpha[i] = C + diff
        else:
            quad = QD[i] + QD[j] - 2.0 * Q[i, j]
            quad = quad if quad > 0 else _TAU
            delta = (G[i] - G[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
            elif alpha[j] < 0:
                alpha[j] = 0.0
                alpha[i] = total
            if total > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = total

        d_i, d_j = alpha[i] - ai_old, alpha[j] - aj_old
        if d_i == 0.0 and d_j == 0.0:
            stalled += 1
            if stalled >= max_passes * n:
                break
        else:
            stalled = 0
            G += Q[:, i] * d_i + Q[:, j] * d_j
        it += 1

    # bias from free multipliers, else the midpoint of the feasible interval
    yG = -y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        bias = float(yG[free].mean())
    else:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        hi = yG[up].max() if up.any() else yG[low].min()
        lo = yG[low].min() if low.any() else hi
        bias = float((hi + lo) / 2.0)
    return alpha, bias, it


def train_svm(samples, labels, C: float = 2.0, gamma: float = 100.0, tol: float = 1e-3,
              max_passes: int = 10, scale_mask=None, balance: bool = False) -> SvmModel:
    """Fit an RBF SVM.

    Parameters
    ----------
    samples : array (n, d)
    labels : array (n,) of +1/-1
    C, gamma : float
        Box constraint and RBF width.
    tol : float
        KKT gap at which training stops.
    scale_mask : array (d,) of bool, optional
        Columns to z-score with statistics of ``samples``; the statistics
        are stored in the model and applied at prediction time.
    balance : bool
        Shrink the scaled block to the total variance of the other columns
        (see :func:`fit_scaler`).
    """
    if C <= 0 or gamma <= 0:
        raise ContractError(f"C and gamma must be positive, got C={C}, gamma={gamma}")
    X, y = _check_training_data(samples, labels)
    mean = std = None
    Xs = X
    if scale_mask is not None and np.any(scale_mask):
        mean, std = fit_scaler(X, scale_mask, balance)
        Xs = (X - mean) / std
    K = rbf_kernel(Xs, Xs, gamma)
    alpha, bias, iterations = smo_solve(K, y, C, tol, max_passes)
    sv = alpha > 0
    return SvmModel(X[sv].copy(), (alpha * y)[sv], bias, float(gamma), float(C), X.shape[1],
                    mean, std, {"iterations": iterations, "n_train": len(y)})


def predict(model: SvmModel, x) -> tuple[int, float]:
    """Label (+1/-1, with +1 on a zero margin) and margin of one sample."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ContractError(f"expected a single feature vector, got shape {x.shape}")
    m = float(model.decision_function(x[None, :])[0])
    return (1 if m >= 0 else -1), m


def predict_many(model: SvmModel, X) -> np.ndarray:
    return np.where(model.decision_function(X) >= 0, 1, -1)


# ---------------------------------------------------------------------------
# split-repeat evaluation

@dataclass
class EvalReport:
    pairs: list
    accuracies: np.ndarray          # (n_pairs, repeats)
    recognize_s: list               # mean test-set prediction time per pair
    n_trainings: int

    @property
    def mean_accuracy(self) -> np.ndarray:
        return self.accuracies.mean(axis=1)

    @property
    def best_index(self) -> int:
        return int(np.argmax(self.mean_accuracy))

    @property
    def best_pair(self) -> tuple:
        return self.pairs[self.best_index]

    @property
    def best_accuracy(self) -> float:
        return float(self.mean_accuracy[self.best_index])


def stratified_split(y: np.ndarray, split: float, rng: np.random.Generator):
    """Indices of a per-class random split; each class keeps at least one training sample."""
    train, test = [], []
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(len(idx))]
        n_train = min(max(int(round(split * len(idx))), 1), len(idx))
        train.append(idx[:n_train])
        test.append(idx[n_train:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def cross_eval(samples, labels, grid: Sequence = DEFAULT_GRID, repeats: int = 10,
               split: float = 0.5, seed: int = 0, tol: float = 1e-3, scale_mask=None,
               balance: bool = False, retries: int = 10) -> EvalReport:
    """Mean held-out accuracy of every ``(C, gamma)`` pair over repeated random splits.

    Round ``r`` draws its split from a generator seeded with ``(seed, r)``,
    so all pairs are compared on the same splits and reruns are identical.
    """
    X, y = _check_training_data(samples, labels)
    if repeats < 1:
        raise ContractError("repeats must be >= 1")
    if not 0 < split < 1:
        raise ContractError("split must lie strictly between 0 and 1")
    pairs = [tuple(map(float, p)) for p in grid]
    if not pairs:
        raise ContractError("empty parameter grid")

    splits = []
    for r in range(repeats):
        rng = np.random.default_rng([seed, r])
        for _ in range(retries):
            tr, te = stratified_split(y, split, rng)
            if len(np.unique(y[tr])) == 2 and len(te) > 0:
                break
        else:
            raise ContractError(f"could not draw a split with both classes in training (round {r})")
        splits.append((tr, te))

    acc = np.zeros((len(pairs), repeats))
    rec = np.zeros((len(pairs), repeats))
    n_trainings = 0
    for p, (C, gamma) in enumerate(pairs):
        for r, (tr, te) in enumerate(splits):
            model = train_svm(X[tr], y[tr], C, gamma, tol, scale_mask=scale_mask, balance=balance)
            n_trainings += 1
            t0 = time.perf_counter()
            pred = predict_many(model, X[te])
            rec[p, r] = time.perf_counter() - t0
            acc[p, r] = float(np.mean(pred == y[te]))
    return EvalReport(pairs, acc, rec.mean(axis=1).tolist(), n_trainings)
