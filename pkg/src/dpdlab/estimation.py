"""Complex least squares and the parameter update rules."""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ._validation import check_matrix, check_same_length, check_scalar, check_signal, raise_for_problems
from .models import ParameterSet, build_proactive_regressor, build_regressor

ALGORITHMS = ("ila", "robust", "proactive-static")
DEFAULT_REGULARIZATION = 1e-10
# Relative pivot size below which a column counts as dependent.
RANK_TOL = 1e-12


class SingularSystemError(np.linalg.LinAlgError):
    """Raised when an unregularized system is rank deficient."""


@dataclass(frozen=True)
class UpdateConfig:
    mu: float = 0.8
    regularization: float = DEFAULT_REGULARIZATION
    algorithm: str = "ila"

    def __post_init__(self):
        object.__setattr__(self, "algorithm", str(self.algorithm).lower())
        problems = self.validate()
        raise_for_problems(problems, "update config")

    def validate(self):
        problems = []
        if not (isinstance(self.mu, (int, float)) and 0 <= self.mu <= 1):
            problems.append(("mu", f"must be in [0, 1], got {self.mu!r}"))
        if not (isinstance(self.regularization, (int, float)) and self.regularization >= 0):
            problems.append(("regularization", f"must be >= 0, got {self.regularization!r}"))
        if self.algorithm not in ALGORITHMS:
            problems.append(("algorithm", f"must be one of {ALGORITHMS}, got {self.algorithm!r}"))
        return problems


def ls_solve(H, target, regularization=0.0):
    """Least-squares ``argmin ||H theta - target||^2`` via pivoted QR.

    Columns are scaled to unit RMS before factorizing and the scaling is
    folded back into the result.  With ``regularization > 0`` a ridge term
    ``regularization * trace(Hs^H Hs) / n * ||theta_s||^2`` is added on the
    scaled problem (``Hs``: scaled matrix, ``n``: column count), which keeps
    the penalty independent of signal level and block length.

    Raises :class:`SingularSystemError` when ``regularization == 0`` and the
    scaled matrix is numerically rank deficient.
    """
    H = check_matrix(H)
    target = check_signal(target, "target")
    rows, cols = H.shape
    if rows != len(target):
        raise ValueError(f"H has {rows} rows but target has {len(target)} samples")
    check_scalar(regularization, "regularization", min_val=0)
    if regularization == 0 and rows < cols:
        raise ValueError(f"underdetermined system: {rows} rows < {cols} columns")

    scale = np.sqrt(np.mean(np.abs(H) ** 2, axis=0))
    scale[scale == 0] = 1.0
    Hs = H / scale
    rhs = target
    if regularization > 0:
        lam = regularization * np.sum(np.abs(Hs) ** 2) / cols
        Hs = np.vstack([Hs, np.sqrt(lam) * np.eye(cols)])
        rhs = np.concatenate([target, np.zeros(cols, dtype=np.complex128)])

    Q, R, piv = linalg.qr(Hs, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if regularization == 0:
        rank = int(np.sum(diag > RANK_TOL * diag[0])) if diag.size and diag[0] > 0 else 0
        if rank < cols:
            raise SingularSystemError(
                f"singular system: {cols - rank} of {cols} columns are linearly dependent")
    z = linalg.solve_triangular(R, Q.conj().T @ rhs)
    theta_s = np.empty(cols, dtype=np.complex128)
    theta_s[piv] = z
    return theta_s / scale


def ila_update(theta_old, H_y, x_target, cfg):
    """Indirect learning step: postdistorter LS fit blended with the old vector.

    ``theta_new = theta_old + mu * (theta_hat - theta_old)``; ``mu`` of 0 and 1
    return ``theta_old`` and ``theta_hat`` exactly.
    """
    theta_old = np.asarray(theta_old, dtype=np.complex128)
    theta_hat = ls_solve(H_y, x_target, cfg.regularization)
    if theta_hat.shape != theta_old.shape:
        raise ValueError(f"theta_old has shape {theta_old.shape}, regressor gives {theta_hat.shape}")
    if cfg.mu == 0:
        return theta_old.copy()
    if cfg.mu == 1:
        return theta_hat
    return theta_old + cfg.mu * (theta_hat - theta_old)


def robust_update(theta_old, H_y, H_x, x_target, cfg):
    """Noise-robust step: the correction is regressed on the clean PA input.

    ``e = x - H_y theta_old`` and ``theta_new = theta_old + mu * LS(H_x, e)``.
    Noise on the observed output only enters through ``e``, never through
    the regressor being inverted.
    """
    theta_old = np.asarray(theta_old, dtype=np.complex128)
    H_y = check_matrix(H_y, "H_y")
    H_x = check_matrix(H_x, "H_x")
    if H_y.shape != H_x.shape:
        raise ValueError(f"H_y {H_y.shape} and H_x {H_x.shape} differ in shape")
    x_target = check_signal(x_target, "x_target")
    x_post = H_y @ theta_old
    e = x_target - x_post
    if cfg.mu == 0 or not np.any(e):
        return theta_old.copy()
    return theta_old + cfg.mu * ls_solve(H_x, e, cfg.regularization)


def fit_static(x, y, structure, regularization=DEFAULT_REGULARIZATION):
    """Single LS fit of ``y ~ H_x theta``."""
    check_same_length(("x", x), ("y", y))
    return ParameterSet(structure, ls_solve(build_regressor(x, structure), y, regularization))


def fit_proactive(x, y, s, structure, regularization=DEFAULT_REGULARIZATION):
    """Joint LS fit of ``y ~ H_x (theta + s * theta_dyn)``."""
    check_same_length(("x", x), ("y", y), ("s", s))
    H = build_proactive_regressor(x, s, structure)
    stacked = ls_solve(H, check_signal(y, "y"), regularization)
    n = structure.n_coeff
    return ParameterSet(structure, stacked[:n], stacked[n:])
