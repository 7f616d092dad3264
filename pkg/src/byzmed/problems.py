"""Desk-scale training problems with stochastic gradients.

All problems expose the same small surface: ``d``, ``init()``,
``worker_gradient(x, rng, batch_size)``, ``full_gradient(x)``, ``loss(x)`` and
``eval_metric(x)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit, log_softmax, softmax

from .gradcore import ContractError
from .idx import IDXFormatError, read_idx_images, read_idx_labels

PROBLEM_KINDS = ("quadratic", "logistic", "mnist")


class QuadraticProblem:
    """f(x, xi) = 0.5 ||x - x*||^2 with additive N(0, sigma^2 I) gradient noise."""

    metric_name = "distance"

    def __init__(self, optimum, sigma: float = 0.0):
        self.optimum = np.asarray(optimum, dtype=np.float64)
        if sigma < 0:
            raise ContractError("quadratic sigma must be >= 0")
        self.sigma = float(sigma)
        self.d = self.optimum.size

    def init(self) -> np.ndarray:
        return np.zeros(self.d)

    def full_gradient(self, x):
        return np.asarray(x, dtype=np.float64) - self.optimum

    def worker_gradient(self, x, rng: np.random.Generator, batch_size: int = 1):
        g = self.full_gradient(x)
        if self.sigma > 0:
            g = g + self.sigma * rng.standard_normal(self.d)
        return g

    def loss(self, x) -> float:
        r = self.full_gradient(x)
        return 0.5 * float(r @ r)

    def eval_metric(self, x) -> float:
        return float(np.linalg.norm(self.full_gradient(x)))


class LogisticProblem:
    """L2-regularized logistic regression, binary or multinomial.

    Binary problems hold ``p`` weights followed by one bias.  Multinomial ones
    hold a row-major ``(p, C)`` weight matrix followed by ``C`` biases.
    Mini-batches are drawn uniformly with replacement, so the batch gradient is
    an unbiased estimate of the full-data gradient.
    """

    metric_name = "accuracy"

    def __init__(self, features, labels, l2: float = 0.0, n_classes: int | None = None,
                 eval_features=None, eval_labels=None):
        self.X = np.asarray(features, dtype=np.float64)
        self.y = np.asarray(labels).astype(np.int64)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.size:
            raise ContractError("features must be (N, p) with one label per row")
        if n_classes is None:
            n_classes = int(self.y.max()) + 1
        self.n_classes = max(int(n_classes), 2)
        if self.y.min() < 0 or self.y.max() >= self.n_classes:
            raise ContractError(f"labels must lie in 0..{self.n_classes - 1}")
        self.l2 = float(l2)
        self.p = self.X.shape[1]
        self.binary = self.n_classes == 2
        self.d = self.p + 1 if self.binary else (self.p + 1) * self.n_classes
        self.eval_X = self.X if eval_features is None else np.asarray(eval_features, dtype=np.float64)
        self.eval_y = self.y if eval_labels is None else np.asarray(eval_labels).astype(np.int64)

    def init(self) -> np.ndarray:
        return np.zeros(self.d)

    def _unpack(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.binary:
            return x[:-1], x[-1]
        C = self.n_classes
        return x[: self.p * C].reshape(self.p, C), x[self.p * C:]

    def _logits(self, x, X):
        W, b = self._unpack(x)
        return X @ W + b

    def _gradient(self, x, X, y):
        W, b = self._unpack(x)
        z = X @ W + b
        B = X.shape[0]
        if self.binary:
            r = expit(z) - y
        else:
            r = softmax(z, axis=1)
            r[np.arange(B), y] -= 1.0
        gW = X.T @ r / B + self.l2 * W
        gb = r.sum(axis=0) / B
        return np.concatenate([np.ravel(gW), np.atleast_1d(gb)])

    def full_gradient(self, x):
        return self._gradient(x, self.X, self.y)

    def worker_gradient(self, x, rng: np.random.Generator, batch_size: int = 32):
        idx = rng.integers(0, self.X.shape[0], size=batch_size)
        return self._gradient(x, self.X[idx], self.y[idx])

    def loss(self, x) -> float:
        W, _ = self._unpack(x)
        z = self._logits(x, self.X)
        if self.binary:
            nll = np.logaddexp(0.0, z) - self.y * z
        else:
            nll = -log_softmax(z, axis=1)[np.arange(self.y.size), self.y]
        return float(nll.mean() + 0.5 * self.l2 * np.sum(W * W))

    def predict(self, x, X=None):
        z = self._logits(x, self.eval_X if X is None else X)
        if self.binary:
            return (z > 0).astype(np.int64)
        return np.argmax(z, axis=1)

    def eval_metric(self, x) -> float:
        return float(np.mean(self.predict(x) == self.eval_y))


def make_quadratic(d: int = 10, sigma: float = 0.1, optimum=None, data_seed: int = 0) -> QuadraticProblem:
    if optimum is None:
        optimum = np.random.default_rng(data_seed).standard_normal(d)
    return QuadraticProblem(optimum, sigma)


def make_logistic(n_samples: int = 2000, n_features: int = 20, n_classes: int = 2, n_eval: int = 1000,
                  l2: float = 1e-4, label_noise: float = 0.05, data_seed: int = 0) -> LogisticProblem:
    """Synthetic classification data labelled by a random linear teacher.

    Each label is replaced by a uniformly random class with probability
    ``label_noise``.  The evaluation set is drawn from the same distribution.
    """
    rng = np.random.default_rng(data_seed)
    teacher = rng.standard_normal((n_features, n_classes if n_classes > 2 else 1))

    def draw(count):
        X = rng.standard_normal((count, n_features))
        z = X @ teacher
        y = (z[:, 0] > 0).astype(np.int64) if n_classes == 2 else np.argmax(z, axis=1)
        noisy = rng.random(count) < label_noise
        y[noisy] = rng.integers(0, n_classes, size=int(noisy.sum()))
        return X, y

    X, y = draw(n_samples)
    Xe, ye = draw(n_eval)
    return LogisticProblem(X, y, l2=l2, n_classes=n_classes, eval_features=Xe, eval_labels=ye)


MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def _find(path: Path, name: str) -> Path:
    for candidate in (path / name, path / (name + ".gz")):
        if candidate.exists():
            return candidate
    raise FileNotFoundError(f"{name} not found in {path}")


def read_mnist_split(path, split: str = "train", max_per_class: int | None = None):
    """Read one MNIST split, scale pixels to [0, 1] and keep the first ``max_per_class`` of each digit."""
    path = Path(path)
    images = read_idx_images(_find(path, MNIST_FILES[split][0]))
    labels = read_idx_labels(_find(path, MNIST_FILES[split][1]))
    if images.shape[0] != labels.size:
        raise IDXFormatError(
            f"count mismatch: {images.shape[0]} images vs {labels.size} labels in {path}"
        )
    if labels.size and labels.max() > 9:
        raise IDXFormatError(f"label value {int(labels.max())} outside 0..9")
    X = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    if max_per_class is not None:
        keep = np.zeros(labels.size, dtype=bool)
        for digit in range(10):
            keep[np.flatnonzero(labels == digit)[:max_per_class]] = True
        X, labels = X[keep], labels[keep]
    return X, labels.astype(np.int64)


def load_mnist_subset(path, max_per_class: int | None = None, eval_max_per_class: int | None = None,
                      l2: float = 0.0) -> LogisticProblem:
    """Multinomial linear classifier on (a subset of) MNIST.

    Evaluates on the ``t10k`` files when they exist, otherwise on the
    training subset itself.
    """
    X, y = read_mnist_split(path, "train", max_per_class)
    try:
        Xe, ye = read_mnist_split(path, "test", eval_max_per_class)
    except FileNotFoundError:
        Xe, ye = None, None
    return LogisticProblem(X, y, l2=l2, n_classes=10, eval_features=Xe, eval_labels=ye)


@dataclass(frozen=True)
class ProblemSpec:
    """Serializable description of a training problem; ``params`` feed the factory for ``kind``."""

    kind: str = "logistic"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in PROBLEM_KINDS:
            raise ContractError(
                f"problem.kind: unknown kind {self.kind!r}; valid kinds are {', '.join(PROBLEM_KINDS)}"
            )

    def build(self):
        try:
            if self.kind == "quadratic":
                return make_quadratic(**self.params)
            if self.kind == "logistic":
                return make_logistic(**self.params)
            return load_mnist_subset(**self.params)
        except TypeError as exc:
            raise ContractError(f"problem.params: {exc}") from exc
