"""I.i.d. random matrix products: Monte Carlo exponents, projective
statistics, and large-deviation probabilities.

Randomness is counter-based and splittable: every trial owns a Philox
stream keyed ``(seed, stream_id)``, so results are independent of worker
count and schedule, and identical ``(seed, stream_id, n)`` always
reproduces the same draw.  Ladders reuse the same streams across scales
(the length-``n`` product is a prefix of the length-``2n`` one), which
sharpens doubling differences by common random numbers.

Strong irreducibility and contraction of a distribution are not
algorithmically certifiable; the shipped example distributions satisfy
them by construction, and :func:`contraction_probe` reports evidence
(normalized products approaching rank one), never a certificate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import ValidationError
from .rates import DichotomyVerdict, RateSeries, dichotomy, richardson_proxy
from .util import pairwise_mean


@dataclass(frozen=True)
class MatrixDistribution:
    """A probability distribution on GL(d): finite support or a named
    parametric sampler.

    Finite-support distributions have exponential moments trivially; a
    parametric sampler must document that property itself (the shipped
    ``uniform_rotation`` is supported on isometries, so it does).
    """

    dim: int
    seed: int
    support: tuple[tuple[np.ndarray, float], ...] | None = None
    sampler: str | None = None
    sampler_params: dict = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        if (self.support is None) == (self.sampler is None):
            raise ValidationError("exactly one of support/sampler must be given")
        if self.support is not None:
            mats = []
            total = 0.0
            for m, prob in self.support:
                a = np.asarray(m, dtype=np.float64)
                if a.shape != (self.dim, self.dim):
                    raise ValidationError("support matrix shape mismatch")
                linalg.require_invertible(a, context="support matrix")
                if prob < 0.0:
                    raise ValidationError("negative probability")
                mats.append((a, float(prob)))
                total += float(prob)
            if abs(total - 1.0) > 1e-12:
                raise ValidationError(f"probabilities sum to {total}, not 1")
            object.__setattr__(self, "support", tuple(mats))
        elif self.sampler not in ("uniform_rotation",):
            raise ValidationError(f"unknown sampler {self.sampler!r}")
        elif self.dim != 2:
            raise ValidationError("uniform_rotation sampler requires dim 2")

    def generator(self, stream_id: int) -> np.random.Generator:
        return np.random.Generator(
            np.random.Philox(key=[self.seed & (2**64 - 1), stream_id & (2**64 - 1)])
        )

    def sample_sequence(self, stream_id: int, n: int) -> np.ndarray:
        """The first ``n`` factors of stream ``stream_id``, shape (n, d, d)."""
        gen = self.generator(stream_id)
        if self.support is not None:
            mats = np.stack([m for m, _ in self.support])
            cum = np.cumsum([p for _, p in self.support])
            idx = np.searchsorted(cum, gen.random(n), side="right")
            return mats[np.minimum(idx, len(self.support) - 1)]
        angles = 2.0 * np.pi * gen.random(n)
        out = np.empty((n, 2, 2))
        out[:, 0, 0] = np.cos(angles)
        out[:, 0, 1] = -np.sin(angles)
        out[:, 1, 0] = np.sin(angles)
        out[:, 1, 1] = np.cos(angles)
        return out

    def exterior(self, p: int) -> "MatrixDistribution":
        """Pushforward under the compound map (finite support only); the
        route to top-exponent sums and d > 2 spectra."""
        if self.support is None:
            raise ValidationError("exterior pushforward needs finite support")
        pushed = tuple(
            (linalg.exterior_power(m, p), prob) for m, prob in self.support
        )
        return MatrixDistribution(
            dim=linalg.compound_dim(self.dim, p),
            seed=self.seed,
            support=pushed,
            label=f"{self.label or 'dist'}^wedge{p}",
        )


# -- shipped example distributions ----------------------------------------------


def single_matrix(matrix, seed: int = 0) -> MatrixDistribution:
    m = np.asarray(matrix, dtype=np.float64)
    return MatrixDistribution(
        dim=m.shape[0], seed=seed, support=((m, 1.0),), label="single"
    )


def _rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def two_rotations(alpha: float, beta: float, seed: int = 0) -> MatrixDistribution:
    """Equal mixture of two rotations: supported on isometries, exponent 0."""
    return MatrixDistribution(
        dim=2,
        seed=seed,
        support=((_rotation(alpha), 0.5), (_rotation(beta), 0.5)),
        label="two-rotations",
    )


def rotated_stretch_pair(
    theta: float = 0.3, stretch: float = 2.0, seed: int = 0
) -> MatrixDistribution:
    """Equal mixture of ``R(+-theta) @ diag(s, 1/s)``: strongly irreducible
    and contracting by construction (no invariant finite union of lines;
    normalized powers of either factor converge to rank one), the standard
    positive-exponent example."""
    d = np.diag([stretch, 1.0 / stretch])
    return MatrixDistribution(
        dim=2,
        seed=seed,
        support=((_rotation(theta) @ d, 0.5), (_rotation(-theta) @ d, 0.5)),
        label="rotated-stretch-pair",
    )


def stretch_or_rotate(
    stretch: float = 4.0, angle: float = 1.0, seed: int = 0
) -> MatrixDistribution:
    """Equal mixture of ``diag(s, 1/s)`` and a rotation: strongly
    irreducible and contracting, with per-step growth fluctuations
    comparable to the exponent itself, so finite-scale large-deviation
    events are actually observable."""
    return MatrixDistribution(
        dim=2,
        seed=seed,
        support=((np.diag([stretch, 1.0 / stretch]), 0.5), (_rotation(angle), 0.5)),
        label="stretch-or-rotate",
    )


def uniform_rotation(seed: int = 0) -> MatrixDistribution:
    return MatrixDistribution(
        dim=2, seed=seed, sampler="uniform_rotation", label="uniform-rotation"
    )


# -- Monte Carlo kernels ----------------------------------------------------------


def _batched_lognorms(
    dist: MatrixDistribution, n: int, streams, checkpoints=None
) -> np.ndarray:
    """``log||Y_n...Y_1||`` per stream, checkpointed; shape (len(cps), T)."""
    cps = tuple(checkpoints) if checkpoints is not None else (n,)
    if list(cps) != sorted(set(cps)) or cps[-1] != n or cps[0] < 1:
        raise ValidationError("checkpoints must be increasing and end at n")
    streams = list(streams)
    nt = len(streams)
    seqs = np.empty((nt, n, dist.dim, dist.dim))
    for t, sid in enumerate(streams):
        seqs[t] = dist.sample_sequence(int(sid), n)
    logs = np.zeros(nt)
    out = np.empty((len(cps), nt))
    prod = None
    ci = 0
    for j in range(n):
        f = seqs[:, j]
        prod = f.copy() if prod is None else np.matmul(f, prod)
        nrm = linalg.spectral_norm_batch(prod)
        prod /= nrm[:, np.newaxis, np.newaxis]
        logs += np.log(nrm)
        if j + 1 == cps[ci]:
            out[ci] = logs
            ci += 1
    return out


def sample_product(dist: MatrixDistribution, n: int, stream_id: int) -> float:
    """``log ||Y_n ... Y_1||`` for one stream, via scaled products."""
    if n < 1:
        raise ValidationError("n must be at least 1")
    return float(_batched_lognorms(dist, n, [stream_id])[0, 0])


def top_exponent_mc(
    dist: MatrixDistribution, n: int, trials: int
) -> tuple[float, float]:
    """Monte Carlo estimate of ``E[log||Y_n...Y_1||]/n`` with its standard
    error, over streams ``0..trials-1``."""
    if trials < 2:
        raise ValidationError("need at least two trials")
    logs = _batched_lognorms(dist, n, range(trials))[0] / n
    est = pairwise_mean(logs)
    stderr = float(np.std(logs, ddof=1) / np.sqrt(trials))
    return float(est), stderr


def projective_measure(
    dist: MatrixDistribution, n: int, trials: int, bins: int
) -> np.ndarray:
    """Histogram on [0, pi) of the directions of ``Y_n...Y_1 e_1`` over
    trials (projective line only, so d must be 2)."""
    if dist.dim != 2:
        raise ValidationError("projective histogram requires dim 2")
    if bins < 1 or trials < 1:
        raise ValidationError("bins and trials must be positive")
    seqs = np.empty((trials, n, 2, 2))
    for t in range(trials):
        seqs[t] = dist.sample_sequence(t, n)
    vecs = np.zeros((trials, 2))
    vecs[:, 0] = 1.0
    for j in range(n):
        vecs = np.einsum("tij,tj->ti", seqs[:, j], vecs)
        vecs /= np.linalg.norm(vecs, axis=1)[:, np.newaxis]
    angles = np.mod(np.arctan2(vecs[:, 1], vecs[:, 0]), np.pi)
    hist, _ = np.histogram(angles, bins=bins, range=(0.0, np.pi))
    return hist / trials


def ld_probability(
    dist: MatrixDistribution,
    n: int,
    delta: float,
    trials: int,
    lambda1: float | None = None,
) -> float:
    """Empirical ``P(|log||Y_n...Y_1|| - n lambda1| > n delta)``.

    ``lambda1`` defaults to the Monte Carlo mean at this same ``n``;
    supply the estimate from the largest scale when scanning a ladder.
    """
    if delta <= 0.0:
        raise ValidationError("delta must be positive")
    logs = _batched_lognorms(dist, n, range(trials))[0]
    if lambda1 is None:
        lambda1 = pairwise_mean(logs) / n
    return float(np.count_nonzero(np.abs(logs - n * lambda1) > n * delta)) / trials


def exponent_series(
    dist: MatrixDistribution, scales, trials: int
) -> tuple[RateSeries, float]:
    """Monte Carlo ``lambda_hat_{1,n}`` along a dyadic ladder from one
    checkpointed pass (common random numbers across rungs).  Returns the
    series and a noise floor of three times the worst rung stderr."""
    scales = tuple(sorted(set(int(s) for s in scales)))
    logs = _batched_lognorms(dist, scales[-1], range(trials), checkpoints=scales)
    values = []
    stderrs = []
    for i, n in enumerate(scales):
        per_trial = logs[i] / n
        values.append(pairwise_mean(per_trial))
        stderrs.append(float(np.std(per_trial, ddof=1) / np.sqrt(trials)))
    series = RateSeries(
        family_kind=f"random:{dist.label or dist.sampler or 'support'}",
        E=0.0,
        j=1,
        scales=scales,
        values=tuple(values),
        proxy_limit=richardson_proxy(tuple(values)),
        proxy_scale=scales[-1],
        stderrs=tuple(stderrs),
    )
    return series, 3.0 * max(stderrs)


def convergence_dichotomy_random(
    dist: MatrixDistribution,
    scales,
    trials: int,
    c1: float = 0.05,
    l0: int | None = None,
) -> tuple[DichotomyVerdict, RateSeries]:
    """Feed the Monte Carlo exponent ladder into the rate dichotomy.

    The stderr-derived noise floor marks deviations the trial budget
    cannot resolve; with enough trials the expected verdict for a
    contracting distribution is ``exponential``, and ``inconclusive``
    signals that noise dominates (reported, not hidden).
    """
    series, floor = exponent_series(dist, scales, trials)
    if l0 is None:
        l0 = min(series.scales[1], series.scales[-1] // 4)
    verdict = dichotomy(series, c1=c1, l0=l0, noise_floor=floor)
    return verdict, series


def contraction_probe(
    dist: MatrixDistribution, n: int, trials: int
) -> dict[str, float]:
    """Evidence (not proof) of contraction: singular value ratios of
    norm-normalized products at scale ``n``."""
    streams = range(trials)
    ratios = np.empty(trials)
    for t in streams:
        seq = dist.sample_sequence(t, n)
        prod = seq[0]
        for j in range(1, n):
            prod = seq[j] @ prod
            prod = prod / linalg.spectral_norm_batch(prod[np.newaxis])[0]
        top, low = linalg.extreme_singular_values_batch(prod[np.newaxis])
        ratios[t] = low[0] / top[0]
    return {
        "median_ratio": float(np.median(ratios)),
        "max_ratio": float(np.max(ratios)),
        "n": float(n),
        "trials": float(trials),
    }


@dataclass(frozen=True)
class RandomRateReport:
    """CLI-facing bundle: exponent rows, large-deviation rows, verdict."""

    rows: tuple[tuple[int, float, float, int], ...]  # (n, estimate, stderr, trials)
    ld_rows: tuple[tuple[int, float, float], ...]  # (n, delta, probability)
    verdict: DichotomyVerdict | None


def rate_report(
    dist: MatrixDistribution,
    scales,
    trials: int,
    deltas=(),
    ld_scales=(),
    c1: float = 0.05,
) -> RandomRateReport:
    verdict, series = convergence_dichotomy_random(dist, scales, trials, c1=c1)
    rows = tuple(
        (n, v, se, trials)
        for n, v, se in zip(series.scales, series.values, series.stderrs)
    )
    ld_rows = []
    if deltas and ld_scales:
        n_ref = max(ld_scales)
        lam_ref, _ = top_exponent_mc(dist, n_ref, trials)
        for n in sorted(ld_scales):
            for delta in deltas:
                ld_rows.append(
                    (int(n), float(delta), ld_probability(dist, n, delta, trials, lam_ref))
                )
    return RandomRateReport(rows=rows, ld_rows=tuple(ld_rows), verdict=verdict)
