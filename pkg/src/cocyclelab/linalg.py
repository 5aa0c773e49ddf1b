"""Dense exact-shape linear algebra for small matrices.

Everything here treats a matrix as a plain ``numpy`` array of shape
``(d, d)`` with float64 or complex128 entries; the scalar field is the
dtype.  The spectral norm is the one matrix norm used throughout the
package.

The SVD is a one-sided Jacobi iteration rather than a LAPACK call: at
these dimensions it is fast enough, and it retains high relative
accuracy on strongly graded matrices, which matters because singular
value *ratios* feed the avalanche-principle hypothesis checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

from .errors import NumericalRefusal, ValidationError

# Conditioning threshold: below this ratio of extreme singular values a
# matrix is treated as numerically singular and GL(d) operations refuse.
INVERTIBILITY_RTOL = 1e-13

_JACOBI_TOL = 1e-15
_MAX_SWEEPS = 60


def _as_square(m) -> np.ndarray:
    a = np.asarray(m)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValidationError(f"expected a square matrix, got shape {a.shape}")
    if not np.issubdtype(a.dtype, np.complexfloating):
        a = a.astype(np.float64)
    else:
        a = a.astype(np.complex128)
    if not np.all(np.isfinite(a)):
        raise ValidationError("matrix has non-finite entries")
    return a


@dataclass(frozen=True)
class SvdResult:
    """Full SVD ``M = U @ diag(s) @ V.conj().T`` with ``s`` non-increasing."""

    singular_values: np.ndarray
    left_factor: np.ndarray
    right_factor: np.ndarray

    def reconstruct(self) -> np.ndarray:
        u, s, v = self.left_factor, self.singular_values, self.right_factor
        return (u * s) @ v.conj().T


def svd(m) -> SvdResult:
    """One-sided Jacobi SVD of a square real or complex matrix.

    Deterministic: identical input yields byte-identical output.
    """
    a = _as_square(m)
    d = a.shape[0]
    b = a.copy()
    v = np.eye(d, dtype=a.dtype)

    for _ in range(_MAX_SWEEPS):
        rotated = False
        for p in range(d - 1):
            for q in range(p + 1, d):
                bp = b[:, p].copy()
                bq = b[:, q].copy()
                app = float(np.real(np.vdot(bp, bp)))
                aqq = float(np.real(np.vdot(bq, bq)))
                g = np.vdot(bp, bq)  # conj(bp) . bq
                mag = abs(g)
                if mag <= _JACOBI_TOL * np.sqrt(app * aqq) or mag == 0.0:
                    continue
                rotated = True
                phase = g / mag
                tau = (aqq - app) / (2.0 * mag)
                t = np.sign(tau) / (abs(tau) + np.hypot(1.0, tau)) if tau != 0 else 1.0
                c = 1.0 / np.hypot(1.0, t)
                s = c * t
                # right-multiply columns (p,q) by diag(1, conj(phase)) then
                # the real rotation [[c, s], [-s, c]]; phase is +-1 for reals
                bq_al = bq * np.conj(phase)
                b[:, p] = c * bp - s * bq_al
                b[:, q] = s * bp + c * bq_al
                vp = v[:, p].copy()
                vq_al = v[:, q] * np.conj(phase)
                v[:, p] = c * vp - s * vq_al
                v[:, q] = s * vp + c * vq_al
        if not rotated:
            break
    else:
        raise NumericalRefusal("Jacobi SVD failed to converge")

    sigma = np.sqrt(np.sum(np.abs(b) ** 2, axis=0))
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    b = b[:, order]
    v = v[:, order]

    u = np.zeros_like(b)
    smax = sigma[0]
    for j in range(d):
        if smax > 0.0 and sigma[j] > d * np.finfo(np.float64).eps * smax:
            u[:, j] = b[:, j] / sigma[j]
        else:
            u[:, j] = _complete_column(u[:, :j])
    return SvdResult(singular_values=sigma, left_factor=u, right_factor=v)


def _complete_column(existing: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal completion: best identity column after
    projecting out the columns already placed."""
    d = existing.shape[0]
    best = None
    best_norm = -1.0
    for k in range(d):
        cand = np.zeros(d, dtype=existing.dtype)
        cand[k] = 1.0
        if existing.shape[1]:
            cand = cand - existing @ (existing.conj().T @ cand)
        nrm = float(np.linalg.norm(cand))
        if nrm > best_norm + 1e-12:
            best, best_norm = cand, nrm
    assert best is not None and best_norm > 0.0
    return best / best_norm


def singular_values(m) -> np.ndarray:
    return svd(m).singular_values


def operator_norm(m) -> float:
    """Spectral norm, i.e. the largest singular value."""
    a = _as_square(m)
    if a.shape[0] == 1:
        return float(abs(a[0, 0]))
    return float(svd(a).singular_values[0])


def is_invertible(m) -> bool:
    """Conditioning-based GL(d) membership test."""
    s = singular_values(m)
    return s[0] > 0.0 and float(s[-1] / s[0]) > INVERTIBILITY_RTOL


def require_invertible(m, context: str = "matrix"):
    if not is_invertible(m):
        raise NumericalRefusal(
            f"{context} is numerically singular "
            f"(singular value ratio below {INVERTIBILITY_RTOL:g})"
        )


def qr_positive(m) -> tuple[np.ndarray, np.ndarray]:
    """QR factorization with the diagonal of R strictly positive.

    This sign convention makes the factorization unique, which is what
    the renormalization cross-check relies on.  Raises on a numerically
    rank-deficient input, naming the offending pivot.
    """
    a = _as_square(m)
    q, r = np.linalg.qr(a)
    diag = np.diagonal(r).copy()
    mags = np.abs(diag)
    ref = float(np.max(mags)) if mags.size else 0.0
    for i, mag in enumerate(mags):
        if ref == 0.0 or mag <= INVERTIBILITY_RTOL * ref:
            raise NumericalRefusal(f"rank-deficient input: pivot {i} of R is negligible")
    phase = diag / mags
    q = q * phase[np.newaxis, :]
    r = r * np.conj(phase)[:, np.newaxis]
    return q, r


@dataclass(frozen=True)
class CompoundIndex:
    """Lexicographic basis of size-``p`` subsets of ``{0..d-1}``."""

    d: int
    p: int
    basis: tuple[tuple[int, ...], ...]

    @property
    def size(self) -> int:
        return len(self.basis)


def compound_index(d: int, p: int) -> CompoundIndex:
    if not 1 <= p <= d:
        raise ValidationError(f"compound order p={p} out of range 1..{d}")
    return CompoundIndex(d=d, p=p, basis=tuple(combinations(range(d), p)))


def exterior_power(m, p: int) -> np.ndarray:
    """Compound matrix of all ``p x p`` minors in the lexicographic basis.

    Multiplicative in its argument, and its spectral norm is the product
    of the ``p`` largest singular values of ``m``.
    """
    a = _as_square(m)
    d = a.shape[0]
    idx = compound_index(d, p)
    if p == 1:
        return a.copy()
    out = np.empty((idx.size, idx.size), dtype=a.dtype)
    for i, rows in enumerate(idx.basis):
        sub = a[np.ix_(rows, range(d))]
        for j, cols in enumerate(idx.basis):
            out[i, j] = np.linalg.det(sub[:, cols])
    return out


# --- batched helpers used by the orbit kernels -------------------------------

def spectral_norm_batch(batch: np.ndarray) -> np.ndarray:
    """Largest singular value of each matrix in a ``(B, d, d)`` stack."""
    b = np.asarray(batch)
    d = b.shape[-1]
    if d == 1:
        return np.abs(b[:, 0, 0])
    if d == 2:
        fro2 = np.sum(np.abs(b) ** 2, axis=(1, 2))
        det = b[:, 0, 0] * b[:, 1, 1] - b[:, 0, 1] * b[:, 1, 0]
        gap = np.sqrt(np.maximum(fro2 * fro2 - 4.0 * np.abs(det) ** 2, 0.0))
        return np.sqrt(0.5 * (fro2 + gap))
    return np.linalg.svd(b, compute_uv=False)[:, 0]


def extreme_singular_values_batch(batch: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(largest, smallest) singular values per matrix of a stack."""
    b = np.asarray(batch)
    d = b.shape[-1]
    if d == 1:
        s = np.abs(b[:, 0, 0])
        return s, s.copy()
    if d == 2:
        top = spectral_norm_batch(b)
        det = np.abs(b[:, 0, 0] * b[:, 1, 1] - b[:, 0, 1] * b[:, 1, 0])
        with np.errstate(divide="ignore", invalid="ignore"):
            low = np.where(top > 0.0, det / top, 0.0)
        return top, low
    s = np.linalg.svd(b, compute_uv=False)
    return s[:, 0], s[:, -1]


def det_batch(batch: np.ndarray) -> np.ndarray:
    b = np.asarray(batch)
    if b.shape[-1] == 1:
        return b[:, 0, 0].copy()
    if b.shape[-1] == 2:
        return b[:, 0, 0] * b[:, 1, 1] - b[:, 0, 1] * b[:, 1, 0]
    return np.linalg.det(b)


def compound_batch(batch: np.ndarray, p: int) -> np.ndarray:
    """Apply :func:`exterior_power` to every matrix of a ``(B, d, d)`` stack."""
    b = np.asarray(batch)
    d = b.shape[-1]
    if not 1 <= p <= d:
        raise ValidationError(f"compound order p={p} out of range 1..{d}")
    if p == 1:
        return b.copy()
    if p == d:
        return det_batch(b).reshape(-1, 1, 1)
    idx = compound_index(d, p)
    n = idx.size
    out = np.empty((b.shape[0], n, n), dtype=b.dtype)
    for i, rows in enumerate(idx.basis):
        for j, cols in enumerate(idx.basis):
            sub = b[:, rows, :][:, :, cols]
            out[:, i, j] = det_batch(sub) if p == 2 else np.linalg.det(sub)
    return out


def compound_dim(d: int, p: int) -> int:
    return comb(d, p)
