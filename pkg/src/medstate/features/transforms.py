"""Frame-level feature transforms: deltas, per-file z-norm, context stacking."""

from __future__ import annotations

import numpy as np

from .types import FeatureKind, FeatureMatrix


def delta(feat: FeatureMatrix, half_window: int = 2) -> FeatureMatrix:
    """Append regression delta coefficients, doubling the dimension.

    d_t = sum_theta theta * (c_{t+theta} - c_{t-theta}) / (2 * sum_theta theta^2)
    with edge frames replicated outside the sequence.
    """
    if half_window < 1:
        raise ValueError("half_window must be >= 1")
    values = feat.values
    padded = np.pad(values, ((half_window, half_window), (0, 0)), mode="edge")
    norm = 2.0 * sum(theta * theta for theta in range(1, half_window + 1))
    deltas = np.zeros_like(values)
    for theta in range(1, half_window + 1):
        upper = padded[half_window + theta : half_window + theta + values.shape[0]]
        lower = padded[half_window - theta : half_window - theta + values.shape[0]]
        deltas += theta * (upper - lower)
    deltas /= norm
    kind = FeatureKind.MFCC26 if feat.kind == FeatureKind.MFCC13 else feat.kind
    return feat.derived(np.hstack([values, deltas]), kind, f"delta(hw={half_window})")


def znorm_per_file(feat: FeatureMatrix) -> FeatureMatrix:
    """Standardize each column with the file's own statistics (population stdev).

    Zero-variance columns become all-zero instead of dividing by zero.
    """
    if feat.num_frames < 2:
        raise ValueError("z-normalization needs at least 2 frames")
    mean = feat.values.mean(axis=0)
    stdev = feat.values.std(axis=0)
    centered = feat.values - mean
    out = np.divide(centered, stdev, out=np.zeros_like(centered), where=stdev > 0.0)
    return feat.derived(out, feat.kind, "znorm")


def stack_context(feat: FeatureMatrix, context: int) -> FeatureMatrix:
    """Concatenate a symmetric window of context frames onto every frame.

    Edge frames are replicated so the frame count is preserved; the output
    dimension is context * dim.
    """
    if context < 1 or context % 2 == 0:
        raise ValueError("context must be an odd positive frame count")
    if context == 1:
        return feat.derived(feat.values.copy(), feat.kind, "stack(c=1)")
    half = (context - 1) // 2
    padded = np.pad(feat.values, ((half, half), (0, 0)), mode="edge")
    columns = [padded[off : off + feat.num_frames] for off in range(context)]
    return feat.derived(np.hstack(columns), FeatureKind.STACKED, f"stack(c={context})")
