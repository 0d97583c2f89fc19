"""Correlation matrices between token representations and their thresholded ranks.

The central object is the M x N matrix of inner products between M solution-token
representations (rows) and N problem-token representations (columns).  Its
singular spectrum, cut at a threshold ``delta``, gives a numerical-rank proxy for
how much independent structure the solution shares with the problem.

Three normalization modes are supported:

``raw``
    Plain inner products; ``delta`` is compared against absolute singular values.
``unit-rows``
    Every representation row is scaled to unit Euclidean norm before the
    products are taken.
``spectral``
    Raw products, but thresholding compares ``sigma_i / sigma_max`` against
    ``delta``, making the rank invariant to any global rescaling of the
    representations.  Recommended when comparing across representation models.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NORMALIZATION_MODES = ("raw", "unit-rows", "spectral")

#: Singular values below this fraction of sigma_max are treated as exact zeros
#: before any thresholding, to suppress floating-point noise.
RELATIVE_ZERO_CUTOFF = 1e-10


def _check_mode(mode: str) -> str:
    if mode not in NORMALIZATION_MODES:
        raise ValueError(
            f"unknown normalization mode {mode!r}; expected one of {NORMALIZATION_MODES}"
        )
    return mode


def _check_reps(reps, name: str) -> np.ndarray:
    """Validate a (tokens x dim) representation matrix and return it as float64."""
    arr = np.asarray(reps, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D (tokens x dim), got shape {arr.shape}")
    rows, dim = arr.shape
    if rows < 1 or dim < 1:
        raise ValueError(f"{name} must be non-empty, got {rows} rows x {dim} dims")
    finite_rows = np.isfinite(arr).all(axis=1)
    if not finite_rows.all():
        bad = int(np.flatnonzero(~finite_rows)[0])
        raise ValueError(f"{name} contains a non-finite entry in row {bad}")
    return arr


def _unit_rows(arr: np.ndarray, name: str) -> np.ndarray:
    norms = np.linalg.norm(arr, axis=1)
    if np.any(norms == 0.0):
        bad = int(np.flatnonzero(norms == 0.0)[0])
        raise ValueError(f"cannot unit-normalize zero row {bad} of {name}")
    return arr / norms[:, None]


@dataclass(eq=False)
class CorrelationMatrix:
    """M x N inner-product matrix between solution rows and problem columns.

    ``entries[i, j]`` is the inner product of solution representation ``i``
    with problem representation ``j``.  The singular spectrum is computed
    lazily and cached.
    """

    entries: np.ndarray
    mode: str = "raw"

    def __post_init__(self) -> None:
        _check_mode(self.mode)
        self.entries = np.asarray(self.entries, dtype=np.float64)
        if self.entries.ndim != 2 or 0 in self.entries.shape:
            raise ValueError(
                f"correlation matrix must be 2-D and non-empty, got shape {self.entries.shape}"
            )
        if not np.isfinite(self.entries).all():
            raise ValueError("correlation matrix contains non-finite entries")
        self._spectrum: np.ndarray | None = None

    @property
    def m(self) -> int:
        """Solution-token count (row count)."""
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        """Problem-token count (column count)."""
        return self.entries.shape[1]

    @property
    def spectrum(self) -> np.ndarray:
        """Singular values in non-increasing order (cached)."""
        if self._spectrum is None:
            self._spectrum = singular_values(self.entries)
        return self._spectrum


@dataclass(frozen=True)
class RankEstimate:
    """Thresholded rank of a correlation matrix plus its per-token normalization."""

    raw_rank: int
    normalized_rank: float
    delta: float
    normalization_mode: str


def correlation_matrix(solution_reps, problem_reps, mode: str = "raw") -> CorrelationMatrix:
    """Build the solution x problem inner-product matrix.

    Parameters
    ----------
    solution_reps : (M, d) array_like
        One row per solution token.
    problem_reps : (N, d) array_like
        One row per problem token.
    mode : {"raw", "unit-rows", "spectral"}
        Under ``unit-rows`` every row of both inputs is scaled to unit norm
        before the products; ``raw`` and ``spectral`` use the products as-is
        (``spectral`` defers its rescaling to thresholding time).

    Returns
    -------
    CorrelationMatrix
    """
    _check_mode(mode)
    sol = _check_reps(solution_reps, "solution_reps")
    prob = _check_reps(problem_reps, "problem_reps")
    if sol.shape[1] != prob.shape[1]:
        raise ValueError(
            "representation dimensionality mismatch: "
            f"solution d={sol.shape[1]}, problem d={prob.shape[1]}"
        )
    if mode == "unit-rows":
        sol = _unit_rows(sol, "solution_reps")
        prob = _unit_rows(prob, "problem_reps")
    return CorrelationMatrix(entries=sol @ prob.T, mode=mode)


def singular_values(matrix) -> np.ndarray:
    """Singular values of a matrix (or CorrelationMatrix), non-increasing.

    Raises
    ------
    ValueError
        If the input contains non-finite entries or the SVD fails to converge.
    """
    entries = matrix.entries if isinstance(matrix, CorrelationMatrix) else np.asarray(matrix, dtype=np.float64)
    if not np.isfinite(entries).all():
        raise ValueError("cannot compute singular values of a matrix with non-finite entries")
    try:
        return np.linalg.svd(entries, compute_uv=False)
    except np.linalg.LinAlgError as exc:  # pathological input; never silent
        raise ValueError(f"SVD did not converge: {exc}") from exc


def thresholded_rank(spectrum, delta: float, mode: str = "raw", sigma_max_ref: float | None = None) -> int:
    """Count singular values above ``delta``.

    Under ``raw`` and ``unit-rows`` the comparison is ``sigma_i > delta``;
    under ``spectral`` it is ``sigma_i / sigma_max > delta`` where
    ``sigma_max`` is ``sigma_max_ref`` if given, else the leading value of the
    spectrum.  Values below ``RELATIVE_ZERO_CUTOFF * sigma_max`` are zeroed
    first, so ``delta = 0`` counts the strictly positive singular values.
    """
    _check_mode(mode)
    if not np.isfinite(delta) or delta < 0:
        raise ValueError(f"delta must be finite and >= 0, got {delta}")
    s = np.asarray(spectrum, dtype=np.float64)
    if s.ndim != 1:
        raise ValueError(f"spectrum must be 1-D, got shape {s.shape}")
    if s.size == 0:
        return 0
    if np.any(s < 0):
        raise ValueError("spectrum must be non-negative")
    if np.any(np.diff(s) > 0):
        raise ValueError("spectrum must be non-increasing")
    sigma_max = float(s[0]) if sigma_max_ref is None else float(sigma_max_ref)
    if sigma_max <= 0.0:
        return 0
    kept = np.where(s > RELATIVE_ZERO_CUTOFF * sigma_max, s, 0.0)
    if mode == "spectral":
        return int(np.count_nonzero(kept / sigma_max > delta))
    return int(np.count_nonzero(kept > delta))


def numerical_rank(matrix) -> int:
    """Rank under the shared relative zero cutoff (``thresholded_rank`` at delta = 0)."""
    entries = matrix.entries if isinstance(matrix, CorrelationMatrix) else matrix
    return thresholded_rank(singular_values(entries), 0.0, "raw")


def rank_with_gap(matrix) -> tuple[int, float]:
    """Numerical rank plus the spectral gap across the zero cutoff.

    The gap is ``smallest kept / largest dropped`` singular value; ``inf``
    when nothing was dropped or everything was.  A gap near 1 flags an
    ill-determined rank.
    """
    s = singular_values(matrix)
    rank = thresholded_rank(s, 0.0, "raw")
    if rank == 0 or rank == s.size:
        return rank, float("inf")
    dropped = float(s[rank])
    if dropped == 0.0:
        return rank, float("inf")
    return rank, float(s[rank - 1]) / dropped


def normalized_rank(matrix: CorrelationMatrix, delta: float, mode: str | None = None) -> RankEstimate:
    """Thresholded rank of ``matrix`` divided by its solution-token count M.

    ``mode`` defaults to the mode the matrix was built under; passing a
    different one is rejected since the entries would not match it.
    """
    if mode is None:
        mode = matrix.mode
    elif mode != matrix.mode:
        raise ValueError(
            f"matrix was built under mode {matrix.mode!r} but rank was requested under {mode!r}"
        )
    if matrix.m < 1:
        raise ValueError("cannot normalize by a zero solution-token count")
    raw = thresholded_rank(matrix.spectrum, delta, mode)
    return RankEstimate(
        raw_rank=raw,
        normalized_rank=raw / matrix.m,
        delta=float(delta),
        normalization_mode=mode,
    )
