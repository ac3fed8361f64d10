"""PCA fit/projection keeping enough components for a variance target."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import FeatureKind, FeatureMatrix

PCA_FORMAT_VERSION = 1


@dataclass(eq=False)
class PcaModel:
    """Mean, orthonormal component rows, and eigenvalues in descending order."""

    mean: np.ndarray
    components: np.ndarray      # (kept, dim)
    eigenvalues: np.ndarray     # (kept,), descending
    variance_fraction: float
    total_variance: float

    @property
    def input_dim(self) -> int:
        return self.components.shape[1]

    @property
    def kept(self) -> int:
        return self.components.shape[0]


def fit_pca(train: FeatureMatrix | np.ndarray, variance_fraction: float = 0.95) -> PcaModel:
    """Eigendecompose the training covariance, keep the smallest number of
    leading components whose cumulative eigenvalue share reaches the target."""
    values = train.values if isinstance(train, FeatureMatrix) else np.asarray(train, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] < 2:
        raise ValueError("PCA needs at least 2 frames")
    if not 0.0 < variance_fraction <= 1.0:
        raise ValueError("variance_fraction must lie in (0, 1]")
    mean = values.mean(axis=0)
    centered = values - mean
    cov = centered.T @ centered / (values.shape[0] - 1)
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = np.clip(eigenvalues[order], 0.0, None)
    eigenvectors = eigenvectors[:, order]
    total = float(eigenvalues.sum())
    if total <= 0.0:
        raise ValueError("training data has zero total variance")
    cumulative = np.cumsum(eigenvalues) / total
    kept = int(np.searchsorted(cumulative, variance_fraction - 1e-12) + 1)
    kept = min(kept, eigenvalues.size)
    components = eigenvectors[:, :kept].T.copy()
    # Fix the sign of each component so serialization is stable across
    # LAPACK builds: largest-magnitude entry made positive.
    for row in components:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0
    return PcaModel(mean, components, eigenvalues[:kept].copy(), variance_fraction, total)


def apply_pca(model: PcaModel, feat: FeatureMatrix | np.ndarray):
    """Project rows onto the kept components: (x - mean) @ components.T."""
    if isinstance(feat, FeatureMatrix):
        if feat.dim != model.input_dim:
            raise ValueError(f"dimension mismatch: features {feat.dim}, PCA {model.input_dim}")
        projected = (feat.values - model.mean) @ model.components.T
        return feat.derived(projected, FeatureKind.PCA_PROJECTED, f"pca(k={model.kept})")
    values = np.asarray(feat, dtype=np.float64)
    if values.shape[-1] != model.input_dim:
        raise ValueError(f"dimension mismatch: features {values.shape[-1]}, PCA {model.input_dim}")
    return (values - model.mean) @ model.components.T


def _format_vector(vec: np.ndarray) -> str:
    return " ".join(repr(float(v)) for v in vec)


def _parse_vector(text: str) -> np.ndarray:
    return np.array([float(tok) for tok in text.split()], dtype=np.float64)


def save_pca(path, model: PcaModel) -> None:
    lines = [
        f"pcamodel v{PCA_FORMAT_VERSION}",
        f"dim {model.input_dim}",
        f"kept {model.kept}",
        f"variance_fraction {model.variance_fraction!r}",
        f"total_variance {model.total_variance!r}",
        "mean " + _format_vector(model.mean),
        "eigenvalues " + _format_vector(model.eigenvalues),
    ]
    lines += ["component " + _format_vector(row) for row in model.components]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_pca(path) -> PcaModel:
    with open(path, encoding="ascii") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or lines[0] != f"pcamodel v{PCA_FORMAT_VERSION}":
        raise ValueError(f"{path}: not a v{PCA_FORMAT_VERSION} PCA model file")
    fields = {}
    components = []
    for ln in lines[1:]:
        key, _, rest = ln.partition(" ")
        if key == "component":
            components.append(_parse_vector(rest))
        else:
            fields[key] = rest
    model = PcaModel(
        mean=_parse_vector(fields["mean"]),
        components=np.vstack(components),
        eigenvalues=_parse_vector(fields["eigenvalues"]),
        variance_fraction=float(fields["variance_fraction"]),
        total_variance=float(fields["total_variance"]),
    )
    if model.kept != int(fields["kept"]) or model.input_dim != int(fields["dim"]):
        raise ValueError(f"{path}: inconsistent PCA dimensions")
    return model
