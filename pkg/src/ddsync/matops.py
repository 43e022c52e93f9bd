"""Dense linear-algebra kernel used by every other module.

All matrices are 2-D float numpy arrays.  Rank decisions are relative to
the largest singular value (``Tolerances.rank_rel``), and "Schur stable"
always means spectral radius at most ``1 - Tolerances.schur_margin``:
strict inequalities cannot be tested in floating point, so every stability
verdict carries an explicit margin.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NotStabilizable

__all__ = [
    "Tolerances",
    "DEFAULT_TOL",
    "Spectrum",
    "as_matrix",
    "mat_rank",
    "pinv",
    "spectrum",
    "spectral_radius",
    "is_schur",
    "pbh_stabilizable",
    "stabilizing_feedback",
    "solve_linear_ls",
]


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds shared across the pipeline.

    Attributes
    ----------
    rank_rel : float
        Relative singular-value cutoff for rank decisions.
    schur_margin : float
        Required gap below 1 for a spectral radius to count as Schur.
    residual_abs : float
        Max-norm residual accepted on linear solves that should be exact.
    riccati_tol : float
        Fixed-point stopping tolerance for the Riccati iteration.
    riccati_max_iter : int
        Iteration budget for the Riccati iteration.
    """

    rank_rel: float = 1e-10
    schur_margin: float = 1e-6
    residual_abs: float = 1e-8
    riccati_tol: float = 1e-12
    riccati_max_iter: int = 100000

    def __post_init__(self):
        for name in ("rank_rel", "schur_margin", "residual_abs", "riccati_tol"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if self.riccati_max_iter < 1:
            raise ValueError("riccati_max_iter must be at least 1")


DEFAULT_TOL = Tolerances()


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of a square matrix, deterministically ordered.

    Eigenvalues are sorted by decreasing modulus, ties broken by
    increasing angle in (-pi, pi].
    """

    eigenvalues: np.ndarray
    spectral_radius: float


def as_matrix(m, name="matrix"):
    """Coerce to a finite 2-D float array, raising ValueError otherwise."""
    a = np.asarray(m, dtype=float)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def _require_square(m, name="matrix"):
    a = as_matrix(m, name)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    return a


def mat_rank(m, tol=DEFAULT_TOL, scale=None):
    """Numerical rank: singular values above rank_rel times the largest.

    ``scale`` optionally anchors the cutoff at rank_rel * max(sigma_max,
    scale), for callers whose test matrix may degenerate to zero while
    the surrounding problem has a natural magnitude.
    """
    a = np.asarray(m)
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    anchor = s[0] if scale is None else max(s[0], scale)
    return int(np.count_nonzero(s > tol.rank_rel * anchor))


def pinv(m, tol=DEFAULT_TOL):
    """Moore-Penrose pseudoinverse via SVD.

    Singular values at or below ``rank_rel`` times the largest are
    treated as zero, which makes the result stable against the same rank
    decisions used everywhere else in the package.
    """
    a = as_matrix(m)
    return np.linalg.pinv(a, rcond=tol.rank_rel)


def spectrum(m):
    """Eigenvalues sorted by (modulus descending, angle ascending)."""
    a = _require_square(m)
    ev = np.linalg.eigvals(a)
    order = np.lexsort((np.angle(ev), -np.abs(ev)))
    ev = ev[order]
    return Spectrum(eigenvalues=ev, spectral_radius=float(np.max(np.abs(ev))))


def spectral_radius(m):
    """Largest eigenvalue modulus of a square matrix."""
    return spectrum(m).spectral_radius


def is_schur(m, tol=DEFAULT_TOL):
    """True iff the spectral radius is at most 1 - schur_margin."""
    return spectral_radius(m) <= 1.0 - tol.schur_margin


def pbh_stabilizable(a, b, tol=DEFAULT_TOL):
    """Rank test for stabilizability of the pair (a, b).

    Checks rank [a - lambda I | b] = n at every eigenvalue of ``a`` with
    modulus at least 1 - schur_margin.  Eigenvalues strictly inside that
    disc need no test: they are already Schur.  The rank cutoff is
    anchored at the magnitude of (a, b), so a test matrix that collapses
    to roundoff counts as rank deficient rather than trivially full.
    """
    a = _require_square(a, "a")
    b = as_matrix(b, "b")
    n = a.shape[0]
    if b.shape[0] != n:
        raise ValueError(f"b must have {n} rows, got {b.shape[0]}")
    scale = max(1.0, float(np.linalg.norm(a, 2)), float(np.linalg.norm(b, 2)))
    eye = np.eye(n)
    for lam in np.linalg.eigvals(a):
        if abs(lam) < 1.0 - tol.schur_margin:
            continue
        test = np.hstack([a - lam * eye, b])
        if mat_rank(test, tol, scale=scale) < n:
            return False
    return True


def stabilizing_feedback(a, b, tol=DEFAULT_TOL):
    """Schur-stabilizing state feedback via a Riccati fixed point.

    Iterates ``P <- a'Pa - a'Pb (I + b'Pb)^-1 b'Pa + I`` from ``P = I``
    (unit state and input weights) until the update is below
    ``riccati_tol`` in max norm relative to max(1, |P|); roundoff makes
    the absolute criterion unreachable once the cost grows.  Returns
    ``K = -(I + b'Pb)^-1 b'Pa``.  Unit weights make the fixed point exist
    for every stabilizable pair, so failure to converge, or a closed loop
    that fails the Schur test, signals that (a, b) is not stabilizable or
    is too badly conditioned to certify.

    Returns
    -------
    K : ndarray, shape (m, n)
        Feedback gain with ``is_schur(a + b @ K)``.

    Raises
    ------
    NotStabilizable
        If the iteration budget is exhausted, the iteration diverges, or
        the resulting closed loop is not Schur within the margin.
    """
    a = _require_square(a, "a")
    b = as_matrix(b, "b")
    n = a.shape[0]
    if b.shape[0] != n:
        raise ValueError(f"b must have {n} rows, got {b.shape[0]}")
    m = b.shape[1]
    eye_n = np.eye(n)
    eye_m = np.eye(m)

    # once max|P| passes this, increments can vanish in rounding and the
    # absolute stopping rule would certify a phantom fixed point
    p_cap = 1.0 / tol.riccati_tol

    p = eye_n.copy()
    converged = False
    # divergence shows up as overflow before the cap check trips; silence
    # the intermediate warnings, the checks below are authoritative
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(tol.riccati_max_iter):
            btp = b.T @ p
            gain = np.linalg.solve(eye_m + btp @ b, btp @ a)
            p_next = a.T @ p @ a - (a.T @ p @ b) @ gain + eye_n
            p_next = 0.5 * (p_next + p_next.T)
            if not np.all(np.isfinite(p_next)) or np.max(np.abs(p_next)) > p_cap:
                raise NotStabilizable("Riccati iteration diverged")
            delta = np.max(np.abs(p_next - p))
            scale = max(1.0, np.max(np.abs(p_next)))
            p = p_next
            if delta <= tol.riccati_tol * scale:
                converged = True
                break
    if not converged:
        raise NotStabilizable(
            f"Riccati iteration did not converge within {tol.riccati_max_iter} steps"
        )

    btp = b.T @ p
    k = -np.linalg.solve(eye_m + btp @ b, btp @ a)
    if not is_schur(a + b @ k, tol):
        raise NotStabilizable(
            f"closed loop not Schur (radius {spectral_radius(a + b @ k):.6g})"
        )
    return k


def solve_linear_ls(coeff, rhs, tol=DEFAULT_TOL):
    """Minimal-norm least-squares solve of ``coeff @ x = rhs``.

    Returns
    -------
    solution : ndarray
        Pseudoinverse solution, minimal norm among least-squares solutions.
    residual : float
        Max-norm of ``coeff @ solution - rhs``.
    """
    coeff = as_matrix(coeff, "coeff")
    rhs = as_matrix(rhs, "rhs")
    if coeff.shape[0] != rhs.shape[0]:
        raise ValueError(
            f"coeff has {coeff.shape[0]} rows but rhs has {rhs.shape[0]}"
        )
    solution = pinv(coeff, tol) @ rhs
    residual = float(np.max(np.abs(coeff @ solution - rhs)))
    return solution, residual
