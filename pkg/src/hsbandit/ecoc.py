"""Error-correcting output-code front end for multiclass-as-bandit runs.

Online perceptrons predict one code bit each from standardized features; the
bit vector, embedded into the unit cube, is the context handed to a bandit
whose arms are the classes. After the bandit consumes its 0/1 loss, every
perceptron trains on its one-vs-all target for the true label.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, ShapeError


def one_vs_all_matrix(n_classes: int) -> np.ndarray:
    """Coding matrix with +1 on the diagonal and -1 elsewhere."""
    if n_classes < 2:
        raise ConfigError(f"need at least 2 classes, got {n_classes}")
    m = -np.ones((n_classes, n_classes))
    np.fill_diagonal(m, 1.0)
    return m


def hamming_decode(bits, coding_matrix) -> int:
    """Class whose codeword row is nearest in Hamming distance; ties take the
    lowest class index."""
    bits = np.asarray(bits, dtype=float)
    matrix = np.asarray(coding_matrix, dtype=float)
    if bits.shape != (matrix.shape[1],):
        raise ShapeError(
            f"bit vector has shape {bits.shape}, expected ({matrix.shape[1]},)"
        )
    signs = np.where(bits >= 0.0, 1.0, -1.0)
    distances = (matrix != signs[None, :]).sum(axis=1)
    return int(np.argmin(distances))


class OnlinePerceptron:
    """Mistake-driven linear classifier with running standardization.

    Welford statistics accumulate over every sample shown to observe(); inputs
    are centered and scaled by the current statistics before both prediction
    and the mistake test. Learning rate 1, bias included, sign(0) reads as +1.
    """

    def __init__(self, n_features: int):
        if n_features < 1:
            raise ConfigError(f"need at least 1 feature, got {n_features}")
        self.n_features = n_features
        self.w = np.zeros(n_features)
        self.bias = 0.0
        self._count = 0
        self._mean = np.zeros(n_features)
        self._m2 = np.zeros(n_features)

    def observe(self, x) -> None:
        """Fold a sample into the standardization statistics."""
        x = self._check(x)
        self._count += 1
        delta = x - self._mean
        self._mean += delta / self._count
        self._m2 += delta * (x - self._mean)

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_features,):
            raise ShapeError(
                f"sample has shape {x.shape}, expected ({self.n_features},)"
            )
        return x

    def _standardize(self, x) -> np.ndarray:
        if self._count < 2:
            return x - self._mean
        std = np.sqrt(self._m2 / (self._count - 1))
        std[std == 0.0] = 1.0
        return (x - self._mean) / std

    def predict(self, x) -> int:
        z = self._standardize(self._check(x))
        return 1 if float(self.w @ z) + self.bias >= 0.0 else -1

    def train(self, x, target: int) -> bool:
        """One mistake-driven step; returns True when an update happened."""
        if target not in (-1, 1):
            raise DomainError(f"target must be -1 or +1, got {target}")
        x = self._check(x)
        z = self._standardize(x)
        guess = 1 if float(self.w @ z) + self.bias >= 0.0 else -1
        if guess != target:
            self.w += target * z
            self.bias += target
            return True
        return False


@dataclass(frozen=True)
class EcocRound:
    """Predicted code bits plus their unit-cube embedding for one sample."""

    bits: np.ndarray
    context: np.ndarray


class EcocSetup:
    """Perceptron bank plus coding matrix; arms of the bandit are classes."""

    def __init__(self, n_classes: int, n_features: int,
                 coding_matrix=None):
        self.coding_matrix = (
            one_vs_all_matrix(n_classes) if coding_matrix is None
            else np.asarray(coding_matrix, dtype=float)
        )
        if self.coding_matrix.shape[0] != n_classes:
            raise ShapeError(
                f"coding matrix has {self.coding_matrix.shape[0]} rows, "
                f"expected {n_classes}"
            )
        if not np.all(np.isin(self.coding_matrix, (-1.0, 1.0))):
            raise ConfigError("coding matrix entries must be -1 or +1")
        if len({tuple(row) for row in self.coding_matrix}) != n_classes:
            raise ConfigError("coding matrix rows must be distinct")
        self.n_classes = n_classes
        self.code_length = self.coding_matrix.shape[1]
        self.perceptrons = [
            OnlinePerceptron(n_features) for _ in range(self.code_length)
        ]

    def step(self, x) -> EcocRound:
        """Predict the code bits for a sample and fold it into the statistics."""
        for p in self.perceptrons:
            p.observe(x)
        bits = np.array([float(p.predict(x)) for p in self.perceptrons])
        return EcocRound(bits, (bits + 1.0) / 2.0)

    def loss_for(self, arm: int, label: int) -> float:
        if not 0 <= label < self.n_classes:
            raise DomainError(f"label {label} outside 0..{self.n_classes - 1}")
        return 0.0 if arm == label else 1.0

    def train(self, x, label: int) -> None:
        """One-vs-all perceptron updates for the true label's codeword."""
        if not 0 <= label < self.n_classes:
            raise DomainError(f"label {label} outside 0..{self.n_classes - 1}")
        row = self.coding_matrix[label]
        for j, p in enumerate(self.perceptrons):
            p.train(x, int(row[j]))

    def hamming_arm(self, bits) -> int:
        """Decode straight to a class, bypassing any bandit."""
        return hamming_decode(bits, self.coding_matrix)


def make_separable_stream(n_classes: int, n_samples: int, n_features: int,
                          rng, spread: float = 6.0, noise: float = 0.5):
    """Linearly separable class blobs: features (T, d), labels (T,).

    Class c sits at spread * e_{c mod d} * (1 + c // d) with isotropic noise,
    which one-vs-all perceptrons separate comfortably.
    """
    if n_features < n_classes:
        centers = np.zeros((n_classes, n_features))
        for c in range(n_classes):
            centers[c, c % n_features] = spread * (1 + c // n_features)
    else:
        centers = spread * np.eye(n_classes, n_features)
    labels = rng.integers(0, n_classes, n_samples)
    features = centers[labels] + noise * rng.standard_normal(
        (n_samples, n_features)
    )
    return features, labels
