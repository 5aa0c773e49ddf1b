"""Convergence-rate experiments and parameter-regularity estimation.

The infinite-scale exponent is never computable; its stand-in throughout
is the Richardson proxy ``2 lambda_{j,2l} - lambda_{j,l}`` at the top of
a dyadic ladder, whose defect is exponentially small in ``l`` wherever
the spectrum has uniform gaps.  Against that proxy the lab measures the
``C/n`` law, the doubling increments ``R(n)``, and the exponential-vs-1/n
dichotomy; across the parameter it regresses a Hölder exponent wherever
a gap check passes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import exp, floor

import numpy as np

from .cocycle import QUADRATURE_TOL, CocycleFamily
from .errors import NumericalRefusal, ValidationError


@dataclass(frozen=True)
class RateSeries:
    """Finite-scale exponents of one ``(family, E, j)`` along a complete
    dyadic ladder, with the Richardson proxy for the limit."""

    family_kind: str
    E: float
    j: int
    scales: tuple[int, ...]
    values: tuple[float, ...]
    proxy_limit: float
    proxy_scale: int
    stderrs: tuple[float, ...] | None = None

    def __post_init__(self):
        s = self.scales
        if len(s) < 2:
            raise ValidationError("rate series needs at least two rungs")
        for a, b in zip(s, s[1:]):
            if b != 2 * a:
                raise ValidationError("scales must form a complete dyadic ladder")
        if len(self.values) != len(s):
            raise ValidationError("values and scales disagree in length")

    def value_at(self, n: int) -> float:
        return self.values[self.scales.index(n)]


def richardson_proxy(values: tuple[float, ...]) -> float:
    """``2 * top - second`` on the last two rungs; exact on ``a + b/n``."""
    return 2.0 * values[-1] - values[-2]


def planted_series(
    scales, limit: float, coeff: float, law: str, rate: float = 0.0
) -> RateSeries:
    """Synthetic series ``limit + coeff/n`` or ``limit + coeff*exp(-rate*n)``
    for calibrating the classifiers."""
    scales = tuple(int(s) for s in scales)
    if law == "one_over_n":
        vals = tuple(limit + coeff / n for n in scales)
    elif law == "exponential":
        vals = tuple(limit + coeff * exp(-rate * n) for n in scales)
    elif law == "constant":
        vals = tuple(float(limit) for _ in scales)
    else:
        raise ValidationError(f"unknown planted law {law!r}")
    return RateSeries(
        family_kind=f"planted-{law}",
        E=0.0,
        j=1,
        scales=scales,
        values=vals,
        proxy_limit=richardson_proxy(vals),
        proxy_scale=scales[-1],
    )


def rate_series(
    fam: CocycleFamily, E: float, j: int, n_max: int, m: int, n_min: int = 4
) -> RateSeries:
    """Fill the dyadic ladder ``n_min..n_max`` for exponent index ``j``."""
    if n_max < 2 * n_min or n_max & (n_max - 1):
        raise ValidationError("n_max must be a power of two at least twice n_min")
    scales = []
    n = n_min
    while n <= n_max:
        scales.append(n)
        n *= 2
    ladder = fam.exponent_ladder(E, tuple(scales), m)
    vals = tuple(float(ladder[n][j - 1]) for n in scales)
    return RateSeries(
        family_kind=fam.kind,
        E=float(E),
        j=int(j),
        scales=tuple(scales),
        values=vals,
        proxy_limit=richardson_proxy(vals),
        proxy_scale=scales[-1],
    )


def extrapolate_exponent(series: RateSeries) -> float:
    """Richardson extrapolation at the top rung of the ladder."""
    return richardson_proxy(series.values)


def check_c_over_n(series: RateSeries) -> tuple[float, list[tuple[int, float]]]:
    """``C_est = max n |lambda_n - proxy|`` over rungs ``n <= n_max/4``
    (the top rungs are excluded: they define the proxy).  Also returns the
    per-rung table ``(n, n*|deviation|)``."""
    table = []
    c_est = 0.0
    cutoff = series.scales[-1] // 4
    for n, v in zip(series.scales, series.values):
        weighted = n * abs(v - series.proxy_limit)
        table.append((n, float(weighted)))
        if n <= cutoff:
            c_est = max(c_est, float(weighted))
    return c_est, table


@dataclass(frozen=True)
class RSequenceReport:
    rows: tuple[tuple[int, float], ...]  # (n, R(n) = 2n|lambda_{1,2n} - lambda_{1,n}|)
    tail_max: float
    median: float
    bounded: bool  # tail max within 10x the median


def r_sequence(series: RateSeries) -> RSequenceReport:
    """Doubling increments ``R(n)``; flags an unbounded-looking tail."""
    if len(series.scales) < 3:
        raise ValidationError("need at least three rungs for the R sequence")
    rows = []
    for i in range(len(series.scales) - 1):
        n = series.scales[i]
        rows.append((n, 2.0 * n * abs(series.values[i + 1] - series.values[i])))
    rvals = np.array([r for _, r in rows])
    med = float(np.median(rvals))
    tail = rvals[len(rvals) // 2 :]
    tail_max = float(np.max(tail))
    return RSequenceReport(
        rows=tuple(rows),
        tail_max=tail_max,
        median=med,
        bounded=bool(tail_max <= 10.0 * med) if med > 0 else True,
    )


@dataclass(frozen=True)
class DichotomyVerdict:
    classification: str  # exponential | one_over_n | inconclusive
    c1: float
    c1_est: float
    trigger_scale: int | None
    evidence: tuple[tuple[int, float, float], ...]  # (l, second_difference, threshold)
    noise_floor: float = 0.0


def dichotomy(
    series: RateSeries, c1: float, l0: int, noise_floor: float = 0.0
) -> DichotomyVerdict:
    """Classify convergence as exponential or genuinely ``1/n``.

    Trigger: the first rung ``l1 >= l0`` whose deviation from the proxy
    exceeds ``4 exp(-c1 l1)`` (and the noise floor).  Once triggered, the
    halving cascade ``|lambda_{2^k l1} - proxy| > 2^-(k+1) |lambda_{l1} -
    proxy|`` must hold on every later rung for a ``one_over_n`` verdict.
    Untriggered series are ``exponential`` when the Richardson second
    differences stay under ``exp(-c1 l)`` (or the floor) and the weighted
    deviations ``l * |lambda_l - proxy|`` die out rather than plateau;
    anything else is ``inconclusive``.

    ``noise_floor`` admits Monte Carlo series: structure below the floor
    is treated as unresolved zero, exactly like the degenerate constant
    case.
    """
    if c1 <= 0.0:
        raise ValidationError("c1 must be positive")
    if series.scales[-1] < 4 * l0:
        raise ValidationError("ladder too short: need scales up to at least 4*l0")
    # working-precision floor: exponent differences below it are float noise
    noise_floor = max(noise_floor, 1e-12 * max(1.0, abs(series.proxy_limit)))
    scales = series.scales
    devs = {n: abs(v - series.proxy_limit) for n, v in zip(scales, series.values)}

    evidence = []
    for i, n in enumerate(scales):
        if 2 * n in devs:
            second = abs(
                series.proxy_limit - 2.0 * series.value_at(2 * n) + series.value_at(n)
            )
            evidence.append((n, float(second), float(4.0 * exp(-c1 * n))))

    # trigger scan
    trigger = None
    for n in scales:
        if n >= l0 and devs[n] > max(4.0 * exp(-c1 * n), noise_floor):
            trigger = n
            break

    # empirical decay rate of the positive second differences
    pos = [(n, s) for n, s, _ in evidence if s > 0.0]
    if len(pos) >= 2:
        xs = np.array([n for n, _ in pos], dtype=np.float64)
        ys = np.log(np.array([s for _, s in pos]))
        slope = float(np.polyfit(xs, ys, 1)[0])
        c1_est = max(-slope, 0.0)
    else:
        c1_est = c1

    if trigger is not None:
        base_dev = devs[trigger]
        cascade_ok = True
        k = 1
        while trigger * 2**k in devs:
            if devs[trigger * 2**k] <= base_dev / 2.0 ** (k + 1):
                cascade_ok = False
                break
            k += 1
        cls = "one_over_n" if cascade_ok else "inconclusive"
        return DichotomyVerdict(
            classification=cls,
            c1=c1,
            c1_est=c1_est,
            trigger_scale=trigger,
            evidence=tuple(evidence),
            noise_floor=noise_floor,
        )

    tail = [(n, s, thr) for n, s, thr in evidence if n >= l0]
    second_ok = all(s <= max(thr, noise_floor) for _, s, thr in tail)
    weighted = [(n, n * devs[n]) for n in scales if n >= l0]
    if weighted:
        w_first = weighted[0][1]
        w_last = weighted[-1][1]
        dev_last = devs[weighted[-1][0]]
        shrinking = (w_last <= 0.5 * w_first + 1e-14) or (dev_last <= noise_floor)
    else:
        shrinking = True
    cls = "exponential" if (second_ok and shrinking) else "inconclusive"
    return DichotomyVerdict(
        classification=cls,
        c1=c1,
        c1_est=c1_est,
        trigger_scale=None,
        evidence=tuple(evidence),
        noise_floor=noise_floor,
    )


# -- gap monitoring and parameter regularity ------------------------------------


@dataclass(frozen=True)
class GapRecord:
    E: float
    min_gap: float
    gaps: tuple[float, ...]
    passes: bool


def gap_monitor(
    fam: CocycleFamily, E_values, n: int, m: int, kappa: float
) -> list[GapRecord]:
    """Per-parameter minimal consecutive exponent gap at scale ``n``,
    tested against ``kappa``.  For ``d = 1`` the gap is vacuous (+inf)."""
    out = []
    for E in np.asarray(E_values, dtype=np.float64):
        spec = fam.finite_scale_exponents(float(E), n, m)
        if fam.dim == 1:
            gaps: tuple[float, ...] = (float("inf"),)
        else:
            gaps = tuple(float(g) for g in -np.diff(spec))
        min_gap = min(gaps)
        out.append(
            GapRecord(E=float(E), min_gap=min_gap, gaps=gaps, passes=min_gap > kappa)
        )
    return out


@dataclass(frozen=True)
class CrudeContinuityReport:
    lhs: float  # max_x || A^(n)_x(E) - A^(n)_x(E') ||
    rhs: float  # exp(C n) * d(E,E')^beta0
    growth_constant: float
    passes: bool


def crude_continuity_check(
    fam: CocycleFamily, E: float, E_prime: float, n: int, m: int
) -> CrudeContinuityReport:
    """Telescoped one-step Hölder continuity of the full product.

    ``lhs`` is assembled from unscaled products (refused when the growth
    budget would overflow); ``rhs = exp(C n) * |E - E'|^beta0`` with
    ``C = max log||A|| + max log||A^-1|| + log(1 + K)`` over both
    parameters, K the family's one-step Hölder constant.  The bound is a
    documented telescoping estimate, generous by design.
    """
    if E == E_prime:
        raise ValidationError("parameters must differ")
    top1, inv1 = fam.one_step_log_extremes(E, m)
    top2, inv2 = fam.one_step_log_extremes(E_prime, m)
    growth = max(top1, top2, 0.0) + max(inv1, inv2, 0.0) + np.log1p(fam.e_holder_constant())
    if n * max(top1, top2, 0.0) > 600.0:
        raise NumericalRefusal(
            "unscaled product difference would overflow at this scale"
        )
    from .cocycle import torus_grid  # local import to avoid cycle at module load

    xs = torus_grid(fam.base.nu, m)
    prod_a = None
    prod_b = None
    for j in range(1, n + 1):
        pts = fam.base.orbit_points(xs, j)
        fa = fam.evaluate_batch(pts, E)
        fb = fam.evaluate_batch(pts, E_prime)
        prod_a = fa if prod_a is None else np.matmul(fa, prod_a)
        prod_b = fb if prod_b is None else np.matmul(fb, prod_b)
    from .linalg import spectral_norm_batch

    lhs = float(np.max(spectral_norm_batch(prod_a - prod_b)))
    rhs = float(np.exp(growth * n) * abs(E - E_prime) ** fam.beta0)
    return CrudeContinuityReport(
        lhs=lhs, rhs=rhs, growth_constant=float(growth), passes=lhs <= rhs
    )


@dataclass(frozen=True)
class HolderEstimate:
    """Log-log regression of exponent differences against parameter
    distance over deterministic low-discrepancy pairs."""

    j: int
    window: tuple[float, float]
    n: int
    gamma_est: float
    residual: float
    kappa_min: float
    pairs_used: int
    pairs_excluded: int
    zero_variation: bool
    beta0_check: CrudeContinuityReport | None
    stretched_sigma: float | None = None  # weaker-modulus fit, emitted for nu >= 2
    stretched_c: float | None = None
    pair_rows: tuple[tuple[float, float], ...] = ()  # (distance, |dLambda|)


_GOLDEN = 0.6180339887498949


def _holder_pairs(window, decades: int, per_decade: int, seed: int):
    """Deterministic low-discrepancy pairs spanning the requested decades
    of parameter distance."""
    lo, hi = window
    width = hi - lo
    offset = ((seed * 2654435761) % 2**32) / 2**32
    pairs = []
    i = 0
    for k in range(decades):
        delta = width * 10.0 ** (-(k + 1))
        for _ in range(per_decade):
            t = (offset + i * _GOLDEN) % 1.0
            a = lo + t * (width - delta)
            pairs.append((a, a + delta))
            i += 1
    return pairs


def holder_estimate(
    fam: CocycleFamily,
    j: int,
    window: tuple[float, float],
    n: int,
    m: int,
    pair_budget: int = 24,
    kappa: float = 0.05,
    seed: int = 0,
    decades: int = 4,
    beta0_scale: int = 16,
) -> HolderEstimate:
    """Hölder exponent of ``E -> lambda_{j,n}(E)`` over a window.

    Refuses unless a gap check at level ``kappa`` passes across the
    window.  Pairs with exponent difference below ten times the
    quadrature tolerance are excluded (and counted): they are below the
    resolution of the grid averages.
    """
    lo, hi = float(window[0]), float(window[1])
    if not hi > lo:
        raise ValidationError("window must have positive width")
    probes = np.linspace(lo, hi, 5)
    records = gap_monitor(fam, probes, n, m, kappa)
    kappa_min = min(r.min_gap for r in records)
    if not all(r.passes for r in records):
        raise NumericalRefusal(
            f"gap check failed on the window: min gap {kappa_min:.6g} <= kappa {kappa}"
        )
    decades = max(3, int(decades))
    per_decade = max(1, pair_budget // decades)
    pairs = _holder_pairs((lo, hi), decades, per_decade, seed)
    rows = []
    excluded = 0
    for a, b in pairs:
        la = fam.finite_scale_exponents(a, n, m)[j - 1]
        lb = fam.finite_scale_exponents(b, n, m)[j - 1]
        dist = abs(b - a)
        dlam = abs(lb - la)
        if dlam < 10.0 * QUADRATURE_TOL:
            excluded += 1
            continue
        rows.append((dist, dlam))
    beta_chk = None
    if len(rows) < 2:
        return HolderEstimate(
            j=j, window=(lo, hi), n=n, gamma_est=float("nan"), residual=float("nan"),
            kappa_min=kappa_min, pairs_used=len(rows), pairs_excluded=excluded,
            zero_variation=True, beta0_check=beta_chk, pair_rows=tuple(rows),
        )
    x = np.log(np.array([r[0] for r in rows]))
    y = np.log(np.array([r[1] for r in rows]))
    a_mat = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(a_mat, y, rcond=None)
    residual = float(np.sqrt(np.mean((a_mat @ coef - y) ** 2)))
    beta_chk = crude_continuity_check(fam, pairs[0][0], pairs[0][1], beta0_scale, m)
    sigma = None
    stretched_c = None
    if fam.base.nu >= 2:
        # weaker modulus |dLambda| ~ C exp(-c |log dist|^sigma)
        best = None
        for sig in np.linspace(0.1, 0.95, 18):
            design = np.stack([-np.abs(x) ** sig, np.ones_like(x)], axis=1)
            cf, *_ = np.linalg.lstsq(design, y, rcond=None)
            res = float(np.sqrt(np.mean((design @ cf - y) ** 2)))
            if best is None or res < best[0]:
                best = (res, float(sig), float(cf[0]))
        _, sigma, stretched_c = best
    return HolderEstimate(
        j=j, window=(lo, hi), n=n, gamma_est=float(coef[0]), residual=residual,
        kappa_min=kappa_min, pairs_used=len(rows), pairs_excluded=excluded,
        zero_variation=False, beta0_check=beta_chk,
        stretched_sigma=sigma, stretched_c=stretched_c, pair_rows=tuple(rows),
    )


# -- experiment-design helpers ---------------------------------------------------


@dataclass(frozen=True)
class DesignKnobs:
    """Scale-coupling knobs; they parameterize experiment design only and
    are never asserted constants."""

    delta0: float
    delta1: float
    n0: int = 64


def design_knobs(kappa: float) -> DesignKnobs:
    delta0 = kappa / 10.0
    return DesignKnobs(delta0=delta0, delta1=delta0**2 / 10.0, n0=64)


def coupled_scale(n: int, delta1: float) -> int:
    """Propose the long scale ``N = floor(exp(delta1 * n))`` coupled to a
    short scale ``n``.  Advisory: at realistic ``n`` this exceeds desk
    scale, and nothing in the suite asserts claims at such ``N``."""
    if delta1 <= 0.0:
        raise ValidationError("delta1 must be positive")
    if delta1 * n > 700.0:
        raise ValidationError("proposed scale overflows a float; reduce delta1 or n")
    return int(floor(exp(delta1 * n)))
