"""Small dense linear-algebra and angle helpers shared across the package.

State dimensions are at most 4, so everything is dense float64 and
correctness/robustness beats asymptotic cleverness.
"""

from __future__ import annotations

import math

import numpy as np

# Relative tolerance used to decide whether a matrix counts as symmetric.
SYMMETRY_RTOL = 1e-9

# Escalation steps of the jitter ladder (initial value plus 8 escalations).
JITTER_ESCALATIONS = 8

TWO_PI = 2.0 * math.pi


class NotSymmetricError(ValueError):
    """Matrix handed to a PSD factorization is not symmetric."""


class NotFactorizableError(ValueError):
    """Cholesky failed even after exhausting the jitter ladder."""


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Return (m + m.T) / 2."""
    m = np.asarray(m, dtype=float)
    return 0.5 * (m + m.T)


def cholesky_psd(m: np.ndarray, jitter_start: float = 1e-12) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of a (possibly barely) PSD matrix.

    Tries the plain factorization first; on failure walks the jitter
    ladder {jitter_start, 10*jitter_start, ...} (8 escalations) until
    m + eps*I factorizes.

    Returns:
        (L, eps) with L @ L.T == m + eps * I; eps is 0.0 when no jitter
        was needed.

    Raises:
        NotSymmetricError: if m is not symmetric to SYMMETRY_RTOL.
        NotFactorizableError: if the ladder is exhausted.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotSymmetricError(f"expected a square matrix, got shape {m.shape}")

    # Scalar fast path; the filters hit this constantly for 1-D problems.
    if m.shape == (1, 1):
        v = m[0, 0]
        if v > 0.0:
            return np.array([[math.sqrt(v)]]), 0.0
        eps = float(jitter_start)
        for _ in range(JITTER_ESCALATIONS + 1):
            if v + eps > 0.0:
                return np.array([[math.sqrt(v + eps)]]), eps
            eps *= 10.0
        raise NotFactorizableError(
            f"Cholesky failed up to jitter {eps / 10.0:g} (start {jitter_start:g})"
        )

    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    if m.size and float(np.max(np.abs(m - m.T))) > SYMMETRY_RTOL * scale:
        raise NotSymmetricError("matrix is not symmetric within tolerance")

    try:
        return np.linalg.cholesky(m), 0.0
    except np.linalg.LinAlgError:
        pass

    eye = np.eye(m.shape[0])
    eps = float(jitter_start)
    for _ in range(JITTER_ESCALATIONS + 1):
        try:
            return np.linalg.cholesky(m + eps * eye), eps
        except np.linalg.LinAlgError:
            eps *= 10.0
    raise NotFactorizableError(
        f"Cholesky failed up to jitter {eps / 10.0:g} (start {jitter_start:g})"
    )


def log_det_psd(m: np.ndarray, jitter_start: float = 1e-12) -> float:
    """log det of a PSD matrix via its Cholesky factor: 2 * sum(log(diag(L)))."""
    chol, _ = cholesky_psd(m, jitter_start)
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def wrap_angle(a):
    """Wrap angle(s) to (-pi, pi].

    Accepts a scalar or an ndarray; idempotent on already-wrapped input
    (bit-exact), and maps the open lower boundary -pi to +pi.
    """
    arr = np.asarray(a, dtype=float)
    r = arr - TWO_PI * np.rint(arr / TWO_PI)
    # rint can land one ulp outside the target interval near the boundaries.
    r = np.where(r > np.pi, r - TWO_PI, r)
    r = np.where(r <= -np.pi, np.pi, r)
    if np.ndim(a) == 0:
        return float(r)
    return r
