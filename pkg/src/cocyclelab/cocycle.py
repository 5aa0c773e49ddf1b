"""Shift bases, analytic cocycle families, and finite-scale exponents.

A family is a map ``(x, E) -> A(x, E)`` in GL(d) over a torus shift.
Scale-``n`` products are accumulated with a per-step renormalization
(divide by the current spectral norm, add its log to a running scale),
so orbits of length 10^5+ never overflow.

Per-point log singular values come from the top-growth of the exterior
power (compound) cocycles: ``log sigma_1...sigma_p = log ||Lambda^p
A^(n)_x||``, and consecutive differences recover each ``log sigma_j``.
This is numerically stable where an SVD of the assembled product is not:
the small singular values of a long product are unrecoverable directly.
A QR-accumulation estimator is provided as a cross-check.

Finite-scale exponents are uniform-grid averages of the per-point
profiles; reductions use a fixed-order pairwise tree so results do not
depend on how grid work is scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .diophantine import rational_witness
from .errors import NumericalRefusal, ValidationError
from .util import pairwise_mean

GOLDEN_MEAN = (np.sqrt(5.0) - 1.0) / 2.0
#: default two-torus shift: componentwise fractional parts of sqrt(2), sqrt(3)
DEFAULT_OMEGA_2D = (np.sqrt(2.0) - 1.0, np.sqrt(3.0) - 1.0)

#: documented quadrature tolerance of grid averages at the default grids
QUADRATURE_TOL = 1e-6


@dataclass(frozen=True)
class ShiftBase:
    """Torus shift ``x -> x + omega (mod 1)`` on ``T^nu``."""

    omega: tuple[float, ...]
    dio_exponent: float = 2.0

    def __post_init__(self):
        if isinstance(self.omega, (int, float)):
            object.__setattr__(self, "omega", (float(self.omega),))
        else:
            object.__setattr__(self, "omega", tuple(float(w) for w in self.omega))
        if len(self.omega) < 1:
            raise ValidationError("shift needs at least one frequency")
        if self.dio_exponent <= 1.0:
            raise ValidationError("dio_exponent must exceed 1")
        for i, w in enumerate(self.omega):
            if not 0.0 < w < 1.0:
                raise ValidationError(f"omega[{i}]={w} outside (0,1)")
            witness = rational_witness(w)
            if witness is not None:
                p, q = witness
                raise ValidationError(
                    f"omega[{i}]={w} is rational to working precision ({p}/{q})"
                )

    @property
    def nu(self) -> int:
        return len(self.omega)

    def orbit_points(self, xs: np.ndarray, step: int) -> np.ndarray:
        """``xs + step*omega`` mod 1 for a ``(B, nu)`` stack of points."""
        w = np.asarray(self.omega)
        return np.mod(xs + step * w[np.newaxis, :], 1.0)


def golden_base(dio_exponent: float = 2.0) -> ShiftBase:
    return ShiftBase(omega=(GOLDEN_MEAN,), dio_exponent=dio_exponent)


def torus_grid(nu: int, m: int) -> np.ndarray:
    """Uniform grid ``{k/m}^nu`` as a ``(m^nu, nu)`` array in a fixed
    (C-order) enumeration."""
    if m < 1:
        raise ValidationError("grid size must be positive")
    axis = np.arange(m, dtype=np.float64) / m
    if nu == 1:
        return axis[:, np.newaxis]
    grids = np.meshgrid(*([axis] * nu), indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=-1)


def as_points(x, nu: int) -> np.ndarray:
    """Coerce a point or batch of points into a ``(B, nu)`` array."""
    a = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if a.ndim == 1:
        if nu == 1:
            a = a[:, np.newaxis]
        else:
            if a.shape[0] != nu:
                raise ValidationError(f"point has {a.shape[0]} coords, base has nu={nu}")
            a = a[np.newaxis, :]
    if a.shape[-1] != nu:
        raise ValidationError(f"points have {a.shape[-1]} coords, base has nu={nu}")
    return a


def _phase(pts: np.ndarray) -> np.ndarray:
    # scalar analytic phase t(x) = sum of coordinates; a single harmonic in
    # t averages to zero exactly on any uniform grid
    return np.sum(pts, axis=-1)


def _cos_sin_series(t: np.ndarray, cos_coeffs, sin_coeffs) -> np.ndarray:
    out = np.zeros_like(t)
    for k, c in enumerate(cos_coeffs):
        if c:
            out = out + c * np.cos(2.0 * np.pi * k * t)
    for k, c in enumerate(sin_coeffs, start=1):
        if c:
            out = out + c * np.sin(2.0 * np.pi * k * t)
    return out


@dataclass(frozen=True)
class CocycleFamily:
    """Analytic GL(d) cocycle family over a torus shift.

    Concrete kinds override :meth:`evaluate_batch`; everything else
    (products, exponents, profiles) is generic.  ``param_values`` is the
    declared parameter grid, used for construction-time invertibility
    checks and CLI sweeps; operations accept any ``E`` in its range.
    """

    base: ShiftBase
    dim: int
    param_values: np.ndarray = field(default_factory=lambda: np.array([0.0]))
    beta0: float = 1.0
    check_grid: int = 64

    kind = "abstract"

    def __post_init__(self):
        object.__setattr__(
            self, "param_values", np.asarray(self.param_values, dtype=np.float64)
        )
        if self.dim < 1:
            raise ValidationError("dimension must be at least 1")
        if not 0.0 < self.beta0 <= 1.0:
            raise ValidationError("beta0 must lie in (0, 1]")
        if self.param_values.ndim != 1 or self.param_values.size < 1:
            raise ValidationError("param_values must be a non-empty 1-d grid")
        if np.any(np.diff(self.param_values) < 0):
            raise ValidationError("param_values must be sorted")
        self._validate_invertibility()

    # -- kind-specific surface ------------------------------------------------

    def evaluate_batch(self, pts: np.ndarray, E: float) -> np.ndarray:
        raise NotImplementedError

    def e_holder_constant(self) -> float:
        """Constant K with ||A(x,E)-A(x,E')|| <= K * |E-E'|^beta0 over the
        declared parameter range (0 for parameter-free kinds)."""
        raise NotImplementedError

    @property
    def unit_determinant(self) -> bool:
        return False

    # -- generic machinery ----------------------------------------------------

    def _validate_invertibility(self):
        if self.check_grid < 1:
            return
        pts = torus_grid(self.base.nu, self.check_grid)
        for E in self.param_values:
            mats = self.evaluate_batch(pts, float(E))
            top, low = linalg.extreme_singular_values_batch(mats)
            bad = ~((top > 0.0) & (low / np.maximum(top, 1e-300) > linalg.INVERTIBILITY_RTOL))
            if np.any(bad):
                i = int(np.argmax(bad))
                raise ValidationError(
                    f"family is numerically singular at x={tuple(pts[i])}, E={E}"
                )

    def evaluate(self, x, E: float) -> np.ndarray:
        """Single-point evaluation with an invertibility check."""
        pts = as_points(x, self.base.nu)
        m = self.evaluate_batch(pts, float(E))[0]
        top, low = linalg.extreme_singular_values_batch(m[np.newaxis])
        if not (top[0] > 0.0 and low[0] / top[0] > linalg.INVERTIBILITY_RTOL):
            raise NumericalRefusal(f"singular cocycle matrix at x={x}, E={E}")
        return m

    def orbit_lognorms(
        self,
        E: float,
        xs: np.ndarray,
        n: int,
        p: int = 1,
        checkpoints: tuple[int, ...] | None = None,
    ) -> np.ndarray:
        """``log || Lambda^p A^(n)_x ||`` for every ``x`` in a point stack.

        Returns shape ``(len(checkpoints), B)``; ``checkpoints`` defaults
        to ``(n,)`` and must be increasing with final entry ``n``.
        """
        if n < 1:
            raise ValidationError("orbit length must be at least 1")
        cps = tuple(checkpoints) if checkpoints is not None else (n,)
        if list(cps) != sorted(set(cps)) or cps[-1] != n or cps[0] < 1:
            raise ValidationError("checkpoints must be increasing and end at n")
        xs = as_points(xs, self.base.nu)
        nbatch = xs.shape[0]
        logs = np.zeros(nbatch, dtype=np.float64)
        out = np.empty((len(cps), nbatch), dtype=np.float64)
        prod: np.ndarray | None = None
        ci = 0
        for j in range(1, n + 1):
            factors = linalg.compound_batch(
                self.evaluate_batch(self.base.orbit_points(xs, j), E), p
            )
            prod = factors if prod is None else np.matmul(factors, prod)
            nrm = linalg.spectral_norm_batch(prod)
            if not np.all(np.isfinite(nrm)) or np.any(nrm <= 0.0):
                raise NumericalRefusal(
                    f"degenerate factor in orbit product at step {j} (E={E})"
                )
            prod /= nrm[:, np.newaxis, np.newaxis]
            logs += np.log(nrm)
            if j == cps[ci]:
                out[ci] = logs
                ci += 1
        return out

    def product_orbit(self, x, E: float, n: int) -> "ScaledProduct":
        """Scale-``n`` product over the orbit of ``x``, renormalized every
        step; ``log_scale`` is reproducible bit for bit."""
        if n < 1:
            raise ValidationError("orbit length must be at least 1")
        xs = as_points(x, self.base.nu)
        logs = 0.0
        prod: np.ndarray | None = None
        for j in range(1, n + 1):
            m = self.evaluate_batch(self.base.orbit_points(xs, j), E)[0]
            prod = m if prod is None else m @ prod
            nrm = float(linalg.spectral_norm_batch(prod[np.newaxis])[0])
            if not np.isfinite(nrm) or nrm <= 0.0:
                raise NumericalRefusal(f"singular cocycle factor at step {j}, E={E}")
            prod = prod / nrm
            logs += np.log(nrm)
        return ScaledProduct(normalized=prod, log_scale=float(logs), length=n)

    def log_singular_profile(self, x, E: float, n: int) -> np.ndarray:
        """Per-point profile ``(1/n) log sigma_j(A^(n)_x)``, j = 1..d,
        via compound top growth."""
        xs = as_points(x, self.base.nu)
        partial = np.empty(self.dim + 1, dtype=np.float64)
        partial[0] = 0.0
        for p in range(1, self.dim + 1):
            partial[p] = self.orbit_lognorms(E, xs, n, p=p)[0, 0]
        return np.diff(partial) / n

    def profile_batch(self, E: float, xs: np.ndarray, n: int) -> np.ndarray:
        """Stack of per-point profiles, shape ``(d, B)``."""
        xs = as_points(xs, self.base.nu)
        partial = np.zeros((self.dim + 1, xs.shape[0]), dtype=np.float64)
        for p in range(1, self.dim + 1):
            partial[p] = self.orbit_lognorms(E, xs, n, p=p)[0]
        return np.diff(partial, axis=0) / n

    def finite_scale_exponents(self, E: float, n: int, m: int) -> np.ndarray:
        """Grid-averaged exponents ``lambda_{j,n}(E)``, j = 1..d."""
        if m < 1:
            raise ValidationError("grid size must be at least 1")
        xs = torus_grid(self.base.nu, m)
        partial = np.zeros(self.dim + 1, dtype=np.float64)
        for p in range(1, self.dim + 1):
            partial[p] = pairwise_mean(self.orbit_lognorms(E, xs, n, p=p)[0])
        return np.diff(partial) / n

    def exponent_ladder(
        self, E: float, scales: tuple[int, ...], m: int
    ) -> dict[int, np.ndarray]:
        """``finite_scale_exponents`` at every scale of an increasing ladder,
        from a single orbit pass per compound order."""
        scales = tuple(sorted(set(int(s) for s in scales)))
        if not scales or scales[0] < 1:
            raise ValidationError("scales must be positive")
        xs = torus_grid(self.base.nu, m)
        n_top = scales[-1]
        partial = np.zeros((len(scales), self.dim + 1), dtype=np.float64)
        for p in range(1, self.dim + 1):
            lognorms = self.orbit_lognorms(E, xs, n_top, p=p, checkpoints=scales)
            for i in range(len(scales)):
                partial[i, p] = pairwise_mean(lognorms[i])
        return {
            ncur: np.diff(partial[i]) / ncur for i, ncur in enumerate(scales)
        }

    def finite_scale_exponents_qr(self, E: float, n: int, m: int) -> np.ndarray:
        """QR-accumulation (diagonal-of-R) cross-check estimator.

        Exact on families whose frames stay axis-aligned; for generic
        families it differs from the compound estimator by an O(1/n)
        frame-alignment correction.
        """
        xs = torus_grid(self.base.nu, m)
        nbatch = xs.shape[0]
        q = np.broadcast_to(np.eye(self.dim), (nbatch, self.dim, self.dim)).copy()
        sums = np.zeros((nbatch, self.dim), dtype=np.float64)
        for j in range(1, n + 1):
            w = np.matmul(self.evaluate_batch(self.base.orbit_points(xs, j), E), q)
            q, r = np.linalg.qr(w)
            diag = np.diagonal(r, axis1=1, axis2=2)
            signs = np.where(diag < 0.0, -1.0, 1.0)
            q = q * signs[:, np.newaxis, :]
            mags = np.abs(diag)
            if np.any(mags <= 0.0):
                raise NumericalRefusal(f"rank collapse in QR accumulation at step {j}")
            sums += np.log(mags)
        return np.array([pairwise_mean(sums[:, j]) for j in range(self.dim)]) / n

    def one_step_log_extremes(self, E: float, m: int) -> tuple[float, float]:
        """Grid maxima of ``log||A||`` and ``log||A^-1||`` at one step."""
        pts = torus_grid(self.base.nu, m)
        top, low = linalg.extreme_singular_values_batch(self.evaluate_batch(pts, E))
        return float(np.max(np.log(top))), float(np.max(-np.log(low)))


@dataclass(frozen=True)
class ScaledProduct:
    """A matrix product stored as ``exp(log_scale) * normalized`` with
    ``||normalized|| = 1``."""

    normalized: np.ndarray
    log_scale: float
    length: int

    def __post_init__(self):
        if not np.isfinite(self.log_scale):
            raise ValidationError("log_scale must be finite")

    def matrix(self) -> np.ndarray:
        """Assembled product; may overflow for long expanding orbits."""
        return np.exp(self.log_scale) * self.normalized


# -- concrete kinds ------------------------------------------------------------


@dataclass(frozen=True)
class ConstantFamily(CocycleFamily):
    """x- and E-independent cocycle: a single GL(d) matrix."""

    matrix: np.ndarray = field(default_factory=lambda: np.eye(2))

    kind = "constant"

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (self.dim, self.dim):
            raise ValidationError(f"matrix shape {m.shape} does not match dim={self.dim}")
        object.__setattr__(self, "matrix", m)
        super().__post_init__()

    def evaluate_batch(self, pts, E):
        return np.broadcast_to(self.matrix, (pts.shape[0],) + self.matrix.shape).copy()

    def e_holder_constant(self) -> float:
        return 0.0

    @property
    def unit_determinant(self) -> bool:
        return bool(abs(abs(np.linalg.det(self.matrix)) - 1.0) < 1e-12)


@dataclass(frozen=True)
class DiagonalExpFamily(CocycleFamily):
    """``diag_j exp(x_amp[j] * cos(2 pi t(x)) + e_amp[j] * E)``.

    With opposite-sign amplitude pairs this is the canonical
    determinant-one toy family; with ``x_amp = 0`` the exponents are
    linear in ``E``, which pins the regularity regression slope at 1.
    """

    x_amp: np.ndarray = field(default_factory=lambda: np.zeros(2))
    e_amp: np.ndarray = field(default_factory=lambda: np.zeros(2))

    kind = "diagonal-exp"

    def __post_init__(self):
        xa = np.asarray(self.x_amp, dtype=np.float64)
        ea = np.asarray(self.e_amp, dtype=np.float64)
        if xa.shape != (self.dim,) or ea.shape != (self.dim,):
            raise ValidationError("amplitude arrays must have length dim")
        object.__setattr__(self, "x_amp", xa)
        object.__setattr__(self, "e_amp", ea)
        super().__post_init__()

    def evaluate_batch(self, pts, E):
        t = _phase(pts)
        exponents = (
            self.x_amp[np.newaxis, :] * np.cos(2.0 * np.pi * t)[:, np.newaxis]
            + self.e_amp[np.newaxis, :] * E
        )
        out = np.zeros((pts.shape[0], self.dim, self.dim), dtype=np.float64)
        idx = np.arange(self.dim)
        out[:, idx, idx] = np.exp(exponents)
        return out

    def e_holder_constant(self) -> float:
        if not np.any(self.e_amp):
            return 0.0
        emax = float(np.max(np.abs(self.param_values)))
        peak = float(np.max(np.abs(self.x_amp))) + float(np.max(np.abs(self.e_amp))) * emax
        return float(np.max(np.abs(self.e_amp))) * np.exp(peak)

    @property
    def unit_determinant(self) -> bool:
        return bool(abs(np.sum(self.x_amp)) < 1e-14 and abs(np.sum(self.e_amp)) < 1e-14)


@dataclass(frozen=True)
class TrigPolyFamily(CocycleFamily):
    """Entrywise trigonometric polynomials in the scalar phase ``t(x)``:
    ``A[i,j](x) = sum_k cos_coeffs[i,j,k] cos(2 pi k t) + sin terms``.
    Parameter-independent."""

    cos_coeffs: np.ndarray = field(default_factory=lambda: np.zeros((2, 2, 1)))
    sin_coeffs: np.ndarray = field(default_factory=lambda: np.zeros((2, 2, 0)))

    kind = "trig-poly"

    def __post_init__(self):
        cc = np.asarray(self.cos_coeffs, dtype=np.float64)
        sc = np.asarray(self.sin_coeffs, dtype=np.float64)
        if cc.ndim != 3 or cc.shape[:2] != (self.dim, self.dim):
            raise ValidationError("cos_coeffs must have shape (dim, dim, degree+1)")
        if sc.ndim != 3 or sc.shape[:2] != (self.dim, self.dim):
            raise ValidationError("sin_coeffs must have shape (dim, dim, degree)")
        object.__setattr__(self, "cos_coeffs", cc)
        object.__setattr__(self, "sin_coeffs", sc)
        super().__post_init__()

    def evaluate_batch(self, pts, E):
        t = _phase(pts)
        out = np.empty((pts.shape[0], self.dim, self.dim), dtype=np.float64)
        for i in range(self.dim):
            for j in range(self.dim):
                out[:, i, j] = _cos_sin_series(
                    t, self.cos_coeffs[i, j], self.sin_coeffs[i, j]
                )
        return out

    def e_holder_constant(self) -> float:
        return 0.0


@dataclass(frozen=True)
class SchrodingerFamily(CocycleFamily):
    """One-step transfer matrix ``[[v(x) - E, -1], [1, 0]]`` with sampling
    ``v = coupling * (cos/sin series in t(x))``; always 2x2 with unit
    determinant.  Default sampling is ``2 cos(2 pi t)``."""

    coupling: float = 1.0
    sampling_cos: np.ndarray = field(default_factory=lambda: np.array([0.0, 2.0]))
    sampling_sin: np.ndarray = field(default_factory=lambda: np.zeros(0))

    kind = "schrodinger"

    def __post_init__(self):
        if self.dim != 2:
            raise ValidationError("schrodinger kind requires dim = 2")
        object.__setattr__(
            self, "sampling_cos", np.asarray(self.sampling_cos, dtype=np.float64)
        )
        object.__setattr__(
            self, "sampling_sin", np.asarray(self.sampling_sin, dtype=np.float64)
        )
        super().__post_init__()

    def potential(self, pts: np.ndarray) -> np.ndarray:
        t = _phase(pts)
        return self.coupling * _cos_sin_series(t, self.sampling_cos, self.sampling_sin)

    def evaluate_batch(self, pts, E):
        v = self.potential(pts)
        out = np.empty((pts.shape[0], 2, 2), dtype=np.float64)
        out[:, 0, 0] = v - E
        out[:, 0, 1] = -1.0
        out[:, 1, 0] = 1.0
        out[:, 1, 1] = 0.0
        return out

    def e_holder_constant(self) -> float:
        return 1.0

    @property
    def unit_determinant(self) -> bool:
        return True


# -- exponent tables -----------------------------------------------------------


@dataclass
class LyapunovTable:
    """Finite-scale exponents indexed by ``(E, n, j)`` with ``j`` 1-based."""

    grid_size: int
    method: str
    entries: dict[tuple[float, int, int], float] = field(default_factory=dict)

    def put_spectrum(self, E: float, n: int, values: np.ndarray):
        for j, v in enumerate(values, start=1):
            self.entries[(float(E), int(n), j)] = float(v)

    def value(self, E: float, n: int, j: int) -> float:
        return self.entries[(float(E), int(n), int(j))]

    def spectrum(self, E: float, n: int) -> np.ndarray:
        d = max(j for (_, _, j) in self.entries)
        return np.array([self.value(E, n, j) for j in range(1, d + 1)])

    def params(self) -> list[float]:
        return sorted({e for (e, _, _) in self.entries})

    def scales(self) -> list[int]:
        return sorted({n for (_, n, _) in self.entries})

    def rows(self):
        for key in sorted(self.entries):
            yield key + (self.entries[key],)

    def check(self, unit_determinant: bool = False, tol: float = 1e-9):
        """Validate spectrum ordering (and the zero-sum rule for unit
        determinant families) at every table slot."""
        for E in self.params():
            for n in self.scales():
                spec = self.spectrum(E, n)
                if np.any(np.diff(spec) > tol):
                    raise ValidationError(
                        f"exponent ordering violated at E={E}, n={n}: {spec}"
                    )
                if unit_determinant and abs(float(np.sum(spec))) > tol:
                    raise ValidationError(
                        f"zero-sum rule violated at E={E}, n={n}: sum={np.sum(spec)}"
                    )


def exponent_table(
    fam: CocycleFamily,
    param_values,
    scales,
    m: int,
    method: str = "compound",
) -> LyapunovTable:
    """Finite-scale exponents for every combination of parameter and scale."""
    scales = tuple(sorted(set(int(s) for s in scales)))
    table = LyapunovTable(grid_size=m, method=method)
    for E in np.asarray(param_values, dtype=np.float64):
        if method == "compound":
            ladder = fam.exponent_ladder(float(E), scales, m)
            for n, spec in ladder.items():
                table.put_spectrum(float(E), n, spec)
        elif method == "qr":
            for n in scales:
                table.put_spectrum(float(E), n, fam.finite_scale_exponents_qr(float(E), n, m))
        else:
            raise ValidationError(f"unknown exponent method {method!r}")
    return table
