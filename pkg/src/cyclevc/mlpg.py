"""Maximum likelihood parameter generation and the cepstral post-filter.

Given per-frame mean vectors for static + derivative streams and one
global variance per stream dimension, recover the static trajectory that
minimizes the variance-weighted squared residual against all streams at
once. The window matrices use the same edge replication as the delta
computation, so a delta-expanded sequence is recovered exactly.

Each static dimension is an independent symmetric positive-definite banded
system (bandwidth = twice the largest window offset), solved in O(T).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.linalg import solveh_banded

from .errors import DimensionMismatchError
from .features import DEFAULT_WINDOWS, DeltaWindowSet, FeatureKind, FeatureSequence, LOW_DIM


@dataclass(frozen=True)
class GaussianTrajectory:
    """Per-frame means for S statics x W windows plus global variances.

    means columns are ordered [static block | delta block | ...], matching
    compute_deltas output. variances may be +inf to switch a stream off.
    """

    means: np.ndarray
    variances: np.ndarray
    windows: DeltaWindowSet = DEFAULT_WINDOWS

    def __post_init__(self) -> None:
        means = np.asarray(self.means, dtype=np.float64)
        variances = np.asarray(self.variances, dtype=np.float64).reshape(-1)
        if means.ndim != 2:
            raise DimensionMismatchError("means must be a T x (S*W) matrix")
        w = self.windows.count
        if means.shape[1] % w != 0:
            raise DimensionMismatchError(
                f"means width {means.shape[1]} is not divisible by {w} windows"
            )
        if variances.shape[0] != means.shape[1]:
            raise DimensionMismatchError(
                f"variances length {variances.shape[0]} must equal means width {means.shape[1]}"
            )
        if (variances <= 0).any() or np.isnan(variances).any():
            raise ValueError("variances must be strictly positive")
        if not np.isfinite(means).all():
            raise ValueError("means must be finite")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)

    @property
    def frames(self) -> int:
        return self.means.shape[0]

    @property
    def static_dim(self) -> int:
        return self.means.shape[1] // self.windows.count


def _window_matrix(win, frames: int) -> sparse.csr_matrix:
    """T x T matrix applying one kernel with edge replication.

    Clamped offsets that land on the same column get their coefficients
    summed, exactly as in the delta computation.
    """
    rows = []
    cols = []
    vals = []
    for offset, coef in win:
        rows.append(np.arange(frames))
        cols.append(np.clip(np.arange(frames) + offset, 0, frames - 1))
        vals.append(np.full(frames, coef))
    mat = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(frames, frames),
    )
    return mat.tocsr()


def mlpg_generate(traj: GaussianTrajectory) -> FeatureSequence:
    """Solve for the smooth static trajectory under all stream constraints.

    For each static dimension the minimizer of
    sum_w ||W_w c - mu_w||^2 / var_w solves the normal equations
    (sum_w W_w^T W_w / var_w) c = sum_w W_w^T mu_w / var_w.
    """
    if traj.frames < 1:
        raise ValueError("need at least one frame")
    t = traj.frames
    s = traj.static_dim
    n_win = traj.windows.count
    precisions = 1.0 / traj.variances  # +inf variance -> zero weight
    if (precisions[:s] <= 0).any():
        raise ValueError("static-stream variances must be finite (identity window must bind)")

    w_mats = [_window_matrix(win, t) for win in traj.windows.windows]
    normal_mats = [(w.T @ w).tocsc() for w in w_mats]
    bandwidth = min(2 * traj.windows.max_offset, t - 1)

    out = np.empty((t, s))
    ab = np.zeros((bandwidth + 1, t))
    for dim in range(s):
        ab[:] = 0.0
        rhs = np.zeros(t)
        for w in range(n_win):
            p = precisions[w * s + dim]
            if p == 0.0:
                continue
            for off in range(bandwidth + 1):
                diag = normal_mats[w].diagonal(off)
                ab[bandwidth - off, off : off + diag.shape[0]] += p * diag
            rhs += p * (w_mats[w].T @ traj.means[:, w * s + dim])
        out[:, dim] = solveh_banded(ab, rhs, lower=False)

    kind = FeatureKind.MCEP_LOW25 if s == LOW_DIM else FeatureKind.GENERIC
    return FeatureSequence(out, kind)


def postfilter(seq: FeatureSequence, beta: float = 0.0) -> FeatureSequence:
    """Simplified cepstral emphasis: scale coefficients 2.. by (1 + beta).

    Coefficients 0 (energy) and 1 are left alone. beta = 0 is the identity.
    """
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    out = seq.data.copy()
    if seq.dim > 2:
        out[:, 2:] *= 1.0 + beta
    return FeatureSequence(out, seq.kind)
