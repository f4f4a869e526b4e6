"""Joint training objective: pairwise similarity + quantization + cross-entropy.

The loss over a minibatch of hash-like features u_i with sign codes b_i and
class distributions t_i is

    J = eta * L_sim + (1 - eta) * L_label

    L_sim   = sum over pairs (i,j) of [softplus(psi_ij) - s_ij * psi_ij]
              + beta * sum_i ||u_i - b_i||^2,   psi_ij = u_i . u_j / 2
    L_label = -(1/N) * sum_i log t_i[y_i]

where s_ij = 1 when samples i and j share a class and pairs run over all
unordered within-batch pairs. Codes b_i are the sign snapshot of u_i and are
treated as constants when differentiating.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NumericError
from .model import ModelParams, affine_hash, binarize, class_scores, logistic

LOG_FLOOR = 1e-300


@dataclass
class Hyperparams:
    """Knobs of the joint objective and its SGD solver."""

    eta: float = 0.2
    beta: float = 25.0
    lr: float = 3e-4
    code_bits: int = 16
    batch_size: int = 32
    epochs: int = 100
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        if self.beta < 0.0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.lr <= 0.0:
            raise ValueError(f"learning rate must be > 0, got {self.lr}")
        if self.code_bits < 1:
            raise ValueError(f"code_bits must be >= 1, got {self.code_bits}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")


@dataclass
class PairLabelSet:
    """Unordered sample pairs (i < j) with their same-class flags."""

    first: np.ndarray
    second: np.ndarray
    similar: np.ndarray

    def __post_init__(self):
        self.first = np.asarray(self.first, dtype=np.int64)
        self.second = np.asarray(self.second, dtype=np.int64)
        self.similar = np.asarray(self.similar, dtype=np.float64)
        if not (self.first.shape == self.second.shape == self.similar.shape):
            raise DimensionError("pair index and flag arrays must align")
        if np.any(self.first >= self.second):
            raise ValueError("pairs must be stored with i < j (no self-pairs)")
        if len(self) and not np.all(np.isin(self.similar, (0.0, 1.0))):
            raise ValueError("similarity flags must be 0 or 1")
        keys = set(zip(self.first.tolist(), self.second.tolist()))
        if len(keys) != len(self):
            raise ValueError("duplicate pairs are not allowed")

    def __len__(self) -> int:
        return self.first.shape[0]

    @classmethod
    def from_labels(cls, labels: np.ndarray) -> "PairLabelSet":
        """All unordered pairs of a batch; similar iff labels match."""
        y = np.asarray(labels)
        m = y.shape[0]
        i, j = np.triu_indices(m, k=1)
        return cls(i, j, (y[i] == y[j]).astype(np.float64))


@dataclass
class GradientSet:
    """Gradients of the objective, shaped like ModelParams plus features."""

    hash_weights: np.ndarray
    hash_bias: np.ndarray
    cls_weights: np.ndarray
    cls_bias: np.ndarray
    features: np.ndarray

    def param_blocks(self) -> dict[str, np.ndarray]:
        return {
            "hash_weights": self.hash_weights,
            "hash_bias": self.hash_bias,
            "cls_weights": self.cls_weights,
            "cls_bias": self.cls_bias,
        }


@dataclass
class LossParts:
    """Per-batch values of the joint loss and its two components."""

    total: float
    similarity: float
    label: float


def softplus(x):
    """log(1 + exp(x)) in the overflow-safe form max(x,0) + log1p(exp(-|x|))."""
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def pair_logit(u_i: np.ndarray, u_j: np.ndarray) -> float:
    """Half the inner product of two hash-like features."""
    a = np.asarray(u_i, dtype=np.float64)
    b = np.asarray(u_j, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"pair members differ in shape: {a.shape} vs {b.shape}")
    return 0.5 * float(a @ b)


def similarity_loss(u: np.ndarray, codes: np.ndarray, pairs: PairLabelSet,
                    beta: float) -> float:
    """Pairwise negative log-likelihood plus the quantization penalty."""
    u = np.asarray(u, dtype=np.float64)
    c = np.asarray(codes, dtype=np.float64)
    if u.shape != c.shape:
        raise DimensionError(f"codes shape {c.shape} does not match u {u.shape}")
    pairwise = 0.0
    if len(pairs):
        psi = 0.5 * np.einsum("ik,ik->i", u[pairs.first], u[pairs.second])
        # softplus(psi) - s*psi == softplus((1-2s)*psi) for s in {0,1};
        # the folded form avoids cancellation for confident similar pairs
        pairwise = float(np.sum(softplus((1.0 - 2.0 * pairs.similar) * psi)))
    quantization = beta * float(np.sum((u - c) ** 2))
    return pairwise + quantization


def label_loss(distributions: np.ndarray, labels: np.ndarray) -> float:
    """Mean cross-entropy; labels may be class indices or one-hot rows."""
    t = np.atleast_2d(np.asarray(distributions, dtype=np.float64))
    y = np.asarray(labels)
    idx = np.argmax(y, axis=-1) if y.ndim == 2 else y.astype(np.int64)
    if idx.shape[0] != t.shape[0]:
        raise DimensionError("one label per distribution required")
    picked = t[np.arange(t.shape[0]), idx]
    return float(-np.mean(np.log(np.maximum(picked, LOG_FLOOR))))


def one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    y = np.asarray(labels, dtype=np.int64)
    out = np.zeros((y.shape[0], num_classes))
    out[np.arange(y.shape[0]), y] = 1.0
    return out


def loss_parts(features: np.ndarray, labels: np.ndarray, params: ModelParams,
               hyper: Hyperparams, codes: np.ndarray | None = None) -> LossParts:
    """Joint loss and its components on one batch.

    codes, when given, override the sign snapshot of u (used by the
    finite-difference harness to hold b fixed while perturbing parameters).
    """
    f = np.atleast_2d(np.asarray(features, dtype=np.float64))
    y = np.asarray(labels, dtype=np.int64)
    if f.shape[0] == 0:
        raise ValueError("batch must be nonempty")
    u = affine_hash(f, params)
    b = binarize(u) if codes is None else codes
    sim = similarity_loss(u, b, PairLabelSet.from_labels(y), hyper.beta)
    lab = label_loss(class_scores(u, params), y)
    total = hyper.eta * sim + (1.0 - hyper.eta) * lab
    return LossParts(total=total, similarity=sim, label=lab)


def total_loss(features: np.ndarray, labels: np.ndarray, params: ModelParams,
               hyper: Hyperparams, codes: np.ndarray | None = None) -> float:
    return loss_parts(features, labels, params, hyper, codes).total


def _du(features, labels, params, hyper, codes):
    """dJ/du_i for every sample, plus intermediates reused by grad_params."""
    f = np.atleast_2d(np.asarray(features, dtype=np.float64))
    y = np.asarray(labels, dtype=np.int64)
    m = f.shape[0]
    u = affine_hash(f, params)
    b = binarize(u) if codes is None else np.asarray(codes, dtype=np.float64)
    t = class_scores(u, params)

    g = (1.0 - hyper.eta) * (t - one_hot(y, params.num_classes)) / m
    du_label = g @ params.cls_weights

    # all unordered pairs: (a - s) is symmetric, diagonal excluded
    mism = logistic(0.5 * (u @ u.T)) - (y[:, None] == y[None, :]).astype(np.float64)
    np.fill_diagonal(mism, 0.0)
    du_sim = 0.5 * (mism @ u) + 2.0 * hyper.beta * (u - b)

    return hyper.eta * du_sim + du_label, f, u, g


def grad_u(features: np.ndarray, labels: np.ndarray, params: ModelParams,
           hyper: Hyperparams, codes: np.ndarray | None = None) -> np.ndarray:
    """Gradient of the joint loss with respect to each hash-like feature."""
    return _du(features, labels, params, hyper, codes)[0]


def grad_params(features: np.ndarray, labels: np.ndarray, params: ModelParams,
                hyper: Hyperparams, codes: np.ndarray | None = None) -> GradientSet:
    """Gradients for all parameter blocks and the input features."""
    du, f, u, g = _du(features, labels, params, hyper, codes)
    grads = GradientSet(
        hash_weights=du.T @ f,
        hash_bias=du.sum(axis=0),
        cls_weights=g.T @ u,
        cls_bias=g.sum(axis=0),
        features=du @ params.hash_weights,
    )
    for name, block in {**grads.param_blocks(), "features": grads.features}.items():
        if not np.all(np.isfinite(block)):
            raise NumericError(f"non-finite gradient in block {name!r}")
    return grads


def grad_features(features: np.ndarray, labels: np.ndarray, params: ModelParams,
                  hyper: Hyperparams, codes: np.ndarray | None = None) -> np.ndarray:
    """dJ/df_i, the gradient handed back to an upstream feature extractor."""
    return grad_params(features, labels, params, hyper, codes).features


def finite_diff_check(fn, x: np.ndarray, analytic: np.ndarray,
                      h: float = 1e-5) -> float:
    """Worst relative disagreement between `analytic` and central differences.

    fn maps a flat float64 vector to a scalar. The per-coordinate error is
    |a - n| / max(|a|, |n|, 1e-8).
    """
    if h <= 0:
        raise ValueError("step size h must be positive")
    x = np.asarray(x, dtype=np.float64).copy()
    a = np.asarray(analytic, dtype=np.float64).ravel()
    numeric = np.empty_like(a)
    for i in range(x.size):
        orig = x[i]
        x[i] = orig + h
        f_plus = fn(x)
        x[i] = orig - h
        f_minus = fn(x)
        x[i] = orig
        numeric[i] = (f_plus - f_minus) / (2.0 * h)
    if a.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(a - numeric) / denom))


def gradient_check(features: np.ndarray, labels: np.ndarray, params: ModelParams,
                   hyper: Hyperparams, h: float = 1e-5) -> dict[str, float]:
    """Check every analytic gradient block against central differences.

    Covers the four parameter blocks, the per-sample feature gradient, and
    the hash-like gradient (the loss differentiated directly in u). The sign
    codes are frozen at the unperturbed point, matching their treatment in
    the analytic gradients. Returns worst relative error per block.
    """
    f0 = np.atleast_2d(np.asarray(features, dtype=np.float64))
    y = np.asarray(labels, dtype=np.int64)
    u0 = affine_hash(f0, params)
    codes = binarize(u0)
    grads = grad_params(f0, y, params, hyper, codes=codes)

    def with_block(name, flat):
        blocks = {k: v.copy() for k, v in params.blocks().items()}
        blocks[name] = flat.reshape(blocks[name].shape)
        return ModelParams(**blocks)

    errors = {}
    for name, analytic in grads.param_blocks().items():
        def fn(flat, _name=name):
            return total_loss(f0, y, with_block(_name, flat), hyper, codes=codes)

        errors[name] = finite_diff_check(
            fn, params.blocks()[name].ravel(), analytic, h
        )

    def fn_features(flat):
        return total_loss(flat.reshape(f0.shape), y, params, hyper, codes=codes)

    errors["features"] = finite_diff_check(
        fn_features, f0.ravel(), grads.features, h
    )

    pairs = PairLabelSet.from_labels(y)

    def fn_u(flat):
        u = flat.reshape(u0.shape)
        sim = similarity_loss(u, codes, pairs, hyper.beta)
        lab = label_loss(class_scores(u, params), y)
        return hyper.eta * sim + (1.0 - hyper.eta) * lab

    errors["hash_like"] = finite_diff_check(
        fn_u, u0.ravel(), grad_u(f0, y, params, hyper, codes=codes), h
    )
    return errors


GRADCHECK_TOLERANCE = 1e-4

_GRADCHECK_ETAS = (0.0, 0.2, 1.0)
_GRADCHECK_BETAS = (0.0, 25.0)


@dataclass
class GradCheckResult:
    """Per-configuration outcome of the finite-difference suite."""

    index: int
    hyper: Hyperparams
    dims: tuple[int, int, int, int]  # (D, K, C, batch)
    errors: dict[str, float]

    @property
    def worst(self) -> float:
        return max(self.errors.values())


def gradient_check_suite(seed: int = 0, count: int = 20,
                         h: float = 1e-5) -> list[GradCheckResult]:
    """Finite-difference verification over random small configurations.

    Cycles eta through {0, 0.2, 1} and beta through {0, 25} while drawing
    dimensions (D <= 8, K <= 6, C <= 4, batch <= 6), parameters, and features
    at random.
    """
    results = []
    for i in range(count):
        rng = np.random.default_rng([seed, i])
        d = int(rng.integers(2, 9))
        k = int(rng.integers(1, 7))
        c = int(rng.integers(2, 5))
        batch = int(rng.integers(2, 7))
        hyper = Hyperparams(eta=_GRADCHECK_ETAS[i % 3],
                            beta=_GRADCHECK_BETAS[i % 2],
                            code_bits=k, batch_size=batch)
        params = ModelParams(
            hash_weights=rng.normal(0.0, 0.5, (k, d)),
            hash_bias=rng.normal(0.0, 0.5, k),
            cls_weights=rng.normal(0.0, 0.5, (c, k)),
            cls_bias=rng.normal(0.0, 0.5, c),
        )
        features = rng.normal(0.0, 1.0, (batch, d))
        labels = rng.integers(0, c, batch)
        errors = gradient_check(features, labels, params, hyper, h=h)
        results.append(GradCheckResult(index=i, hyper=hyper,
                                       dims=(d, k, c, batch), errors=errors))
    return results
