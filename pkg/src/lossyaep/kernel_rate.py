"""Product-Poisson ball kernel and the rate functions built on it.

The kernel puts mass ``sigma(a) * prod_b Poisson(pi(a, b) / sigma(a))(l(b))``
on the ball ``(a, l)``, truncated to ``l(b) <= L_max`` and renormalized.
Everything else here is a functional of the log-moment generating function

    Lambda(t) = sum_x K(x) log sum_y K(y) exp(t rho(x, y))

and its Legendre transform.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np
from scipy.special import logsumexp
from scipy.stats import poisson

from .measures import (Alphabet, Ball, DistortionFn, TruncationError, ValidationError,
                       is_consistent, marginal, relative_entropy, unshuffle)

T_LOWER = -64.0
MAX_ITER = 200


@dataclass(frozen=True, eq=False)
class Kernel:
    alphabet: Alphabet
    sigma: np.ndarray
    pi: np.ndarray
    L_max: int
    colors: np.ndarray          # (N,) color index of each atom
    degrees: np.ndarray         # (N, m) degree vector of each atom
    probs: np.ndarray           # (N,) renormalized masses
    truncation_mass: float
    tail_tol: float

    def __len__(self):
        return len(self.probs)

    @cached_property
    def balls(self) -> list[Ball]:
        sym = self.alphabet.symbols
        return [Ball(sym[c], tuple(int(x) for x in d)) for c, d in zip(self.colors, self.degrees)]

    @cached_property
    def atoms(self) -> dict[Ball, float]:
        return dict(zip(self.balls, self.probs.tolist()))

    @cached_property
    def log_probs(self) -> np.ndarray:
        return np.log(self.probs)

    def mean_degrees(self) -> np.ndarray:
        """``sum_l l(b) K(a, l)`` as an ``(m, m)`` array; approximates pi."""
        out = np.zeros((len(self.alphabet),) * 2)
        np.add.at(out, self.colors, self.probs[:, None] * self.degrees)
        return out

    def distortion_matrix(self, rho: DistortionFn) -> np.ndarray:
        return rho.pairwise(self.colors[:, None], self.degrees[:, None, :],
                            self.colors[None, :], self.degrees[None, :, :], self.alphabet)


def build_kernel(sigma, pi, alphabet: Alphabet | None = None, tail_tol: float = 1e-12,
                 L_limit: int = 200) -> Kernel:
    """Truncated product-Poisson kernel for color law ``sigma`` and pair law ``pi``.

    ``L_max`` is the smallest cap for which both the mass and the first
    moment lost outside the box are below ``tail_tol``.
    """
    sigma = np.asarray([float(s) for s in sigma], dtype=float)
    pi = np.asarray([[float(x) for x in row] for row in pi], dtype=float)
    m = len(sigma)
    if alphabet is None:
        alphabet = Alphabet(tuple(f"c{i}" for i in range(m)))
    if pi.shape != (m, m):
        raise ValidationError(f"pi must be {m}x{m}")
    if np.any(sigma < 0) or abs(sigma.sum() - 1) > 1e-9:
        raise ValidationError("sigma must be a probability vector")
    if np.any(pi < 0) or not np.allclose(pi, pi.T, atol=1e-12, rtol=0):
        raise ValidationError("pi must be symmetric and nonnegative")
    for a in range(m):
        if sigma[a] == 0 and np.any(pi[a] > 0):
            raise ValidationError(f"sigma({alphabet.symbols[a]}) = 0 but pi({alphabet.symbols[a]}, .) > 0")
    if tail_tol <= 0:
        raise ValidationError("tail_tol must be positive")
    live = np.flatnonzero(sigma > 0)
    lam = np.zeros((m, m))
    lam[live] = pi[live] / sigma[live, None]

    def tails(L):
        mass = 0.0
        moment = 0.0
        for a in live:
            log_inside = 0.0
            for b in range(m):
                if lam[a, b] > 0:
                    log_inside += math.log1p(-poisson.sf(L, lam[a, b]))
                    moment += sigma[a] * lam[a, b] * poisson.sf(L - 1, lam[a, b])
            mass += sigma[a] * -math.expm1(log_inside)
        return mass, moment

    L = 0
    mass, moment = tails(0)
    while (mass >= tail_tol or moment >= tail_tol) and lam.max() > 0:
        L += 1
        if L > L_limit:
            raise ValidationError(f"degree cap above {L_limit} needed for tail_tol={tail_tol}")
        mass, moment = tails(L)

    colors, degrees, raw = [], [], []
    for a in live:
        ranges = [range(L + 1) if lam[a, b] > 0 else range(1) for b in range(m)]
        pmfs = [poisson.pmf(np.arange(L + 1), lam[a, b]) if lam[a, b] > 0 else np.ones(1)
                for b in range(m)]
        for ell in itertools.product(*ranges):
            colors.append(a)
            degrees.append(ell)
            raw.append(sigma[a] * math.prod(pmfs[b][ell[b]] for b in range(m)))
    raw = np.asarray(raw)
    total = math.fsum(raw)
    return Kernel(alphabet, sigma, pi, L, np.asarray(colors, dtype=np.int64),
                  np.asarray(degrees, dtype=np.int64).reshape(len(raw), m),
                  raw / total, 1.0 - total, tail_tol)


def product_kernel(K: Kernel) -> dict[tuple[Ball, Ball], float]:
    p = K.probs
    return {(bx, by): p[i] * p[j] for i, bx in enumerate(K.balls) for j, by in enumerate(K.balls)}


class RateProblem:
    """A kernel with a fixed distortion; caches the distortion matrix.

    All the rate functions below accept either a ``RateProblem`` or a
    ``(Kernel, DistortionFn)`` pair.
    """

    def __init__(self, K: Kernel, rho: DistortionFn):
        self.K = K
        self.rho = rho
        self.D = K.distortion_matrix(rho)
        if not np.all(np.isfinite(self.D)) or np.any(self.D < 0):
            raise ValidationError("distortion must be finite and nonnegative on the kernel support")
        self.p = K.probs
        self.logp = K.log_probs

    @cached_property
    def bound(self) -> float:
        return float(self.D.max())

    @cached_property
    def d_min(self) -> float:
        return float(self.p @ self.D.min(axis=1))

    @cached_property
    def d_max(self) -> float:
        return float(self.p @ self.D.max(axis=1))

    @cached_property
    def d_av(self) -> float:
        return float(self.p @ self.D @ self.p)

    def _log_weights(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        A = self.logp[None, :] + t * self.D
        logZ = logsumexp(A, axis=1)
        return A - logZ[:, None], logZ

    def log_mgf(self, t: float) -> float:
        if t == 0:
            return 0.0
        _, logZ = self._log_weights(t)
        return float(self.p @ logZ)

    @cached_property
    def D2(self) -> np.ndarray:
        return self.D**2

    def moments(self, t: float) -> tuple[float, float, float]:
        """``(Lambda(t), Lambda'(t), Lambda''(t))``."""
        A = self.logp[None, :] + t * self.D
        top = A.max(axis=1)
        E = np.exp(A - top[:, None])
        Z = E.sum(axis=1)
        m1 = (E * self.D).sum(axis=1) / Z
        m2 = (E * self.D2).sum(axis=1) / Z
        logZ = top + np.log(Z)
        return float(self.p @ logZ), float(self.p @ m1), float(self.p @ np.maximum(m2 - m1**2, 0.0))

    def boundary_rate(self, side: str = "min") -> float:
        """Limit of the rate at ``d_min`` (or ``d_max``): ``-sum_x K(x) log K(argmin_y rho(x, y))``."""
        ext = self.D.min(axis=1) if side == "min" else self.D.max(axis=1)
        hit = np.isclose(self.D, ext[:, None], rtol=0, atol=1e-12)
        mass = (hit * self.p[None, :]).sum(axis=1)
        return float(-(self.p @ np.log(mass)))


def _problem(K, rho=None) -> RateProblem:
    if isinstance(K, RateProblem):
        return K
    if rho is None:
        raise ValidationError("distortion function required")
    return RateProblem(K, rho)


def log_mgf(K, rho, t: float) -> float:
    return _problem(K, rho).log_mgf(t)


def d_min(K, rho=None) -> float:
    return _problem(K, rho).d_min


def d_av(K, rho=None) -> float:
    return _problem(K, rho).d_av


def d_min_infinity(K, rho=None) -> float:
    """Smallest d with finite single-letter rate; a diagnostic only."""
    return _problem(K, rho).d_min


@dataclass(frozen=True, eq=False)
class TiltedCoupling:
    kernel: Kernel
    t: float
    matrix: np.ndarray      # (N, N) joint masses
    mean_distortion: float
    entropy: float

    @cached_property
    def atoms(self) -> dict[tuple[Ball, Ball], float]:
        balls = self.kernel.balls
        N = len(balls)
        return {(balls[i], balls[j]): float(self.matrix[i, j])
                for i in range(N) for j in range(N) if self.matrix[i, j] > 0}


def tilted_coupling(K, rho, t: float) -> TiltedCoupling:
    """``nu_t(x, y) = K(x) K(y) exp(t rho(x, y)) / Z(x, t)``."""
    P = _problem(K, rho)
    logW, logZ = P._log_weights(t)
    M = P.p[:, None] * np.exp(logW)
    mean = float((M * P.D).sum())
    lam = float(P.p @ logZ)
    return TiltedCoupling(P.K, t, M, mean, max(t * mean - lam, 0.0))


@dataclass(frozen=True)
class RateResult:
    d: float
    R: float
    t_star: float
    status: str                # exact | clamped_zero | infinite | boundary
    truncation_mass: float = 0.0
    residual: float = 0.0      # |Lambda'(t*) - d|
    near_d_min_inf: bool = False


def _solve_tilt(P: RateProblem, d: float, lo: float, hi: float, tol: float):
    """Root of the increasing function ``Lambda'(t) - d`` on ``[lo, hi]``.

    Bisection safeguarded Newton: a Newton step is taken only when it lands
    strictly inside the current bracket.
    """
    _, d0, v0 = P.moments(0.0)
    t = (d - d0) / v0 if v0 > 0 else 0.5 * (lo + hi)
    if not lo < t < hi:
        t = 0.5 * (lo + hi)
    for _ in range(MAX_ITER):
        lam, dl, ddl = P.moments(t)
        f = dl - d
        if abs(f) <= tol:
            return t, lam, dl
        if f > 0:
            hi = t
        else:
            lo = t
        step = t - f / ddl if ddl > 0 else math.nan
        t = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo < 1e-15 * max(1.0, abs(t)):
            break
    lam, dl, _ = P.moments(t)
    return t, lam, dl


def _legendre(P: RateProblem, z: float, side: str) -> RateResult:
    trunc = P.K.truncation_mass
    near = abs(z - P.d_min) <= 1e-9
    tol = 1e-12 * max(1.0, P.d_av)
    if abs(z - P.d_av) <= tol:
        return RateResult(z, 0.0, 0.0, "clamped_zero" if side == "lower" else "exact", trunc, 0.0, near)
    if side == "lower":
        edge, t_end = P.d_min, T_LOWER
        if z < edge - tol:
            return RateResult(z, math.inf, -math.inf, "infinite", trunc, math.nan, near)
    else:
        edge, t_end = P.d_max, -T_LOWER
        if z > edge + tol:
            return RateResult(z, math.inf, math.inf, "infinite", trunc, math.nan, near)
    if abs(z - edge) <= tol:
        return RateResult(z, P.boundary_rate("min" if side == "lower" else "max"),
                          math.copysign(math.inf, t_end), "boundary", trunc, 0.0, near)
    lam_end, dl_end, _ = P.moments(t_end)
    beyond = dl_end > z if side == "lower" else dl_end < z
    if beyond:
        # optimal tilt past the bracket: report the dual value at the bracket end
        return RateResult(z, max(t_end * z - lam_end, 0.0), t_end, "boundary", trunc,
                          abs(dl_end - z), near)
    lo, hi = (t_end, 0.0) if side == "lower" else (0.0, t_end)
    t, lam, dl = _solve_tilt(P, z, lo, hi, 1e-10 * max(1.0, P.d_av))
    return RateResult(z, max(t * z - lam, 0.0), t, "exact", trunc, abs(dl - z), near)


def rate_distortion(K, rho, d: float) -> RateResult:
    """``R(d) = sup_{t <= 0} (t d - Lambda(t))``; zero from ``d_av`` on, infinite below ``d_min``."""
    P = _problem(K, rho)
    if d >= P.d_av:
        return RateResult(d, 0.0, 0.0, "clamped_zero", P.K.truncation_mass, 0.0,
                          abs(d - P.d_min) <= 1e-9)
    return _legendre(P, d, "lower")


def distortion_ldp_rate(K, rho, z: float) -> RateResult:
    """Two-sided Legendre transform ``sup_t (t z - Lambda(t))``."""
    P = _problem(K, rho)
    return _legendre(P, z, "lower" if z <= P.d_av else "upper")


def rate_curve(K, rho, ds) -> list[RateResult]:
    P = _problem(K, rho)
    return [rate_distortion(P, None, float(d)) for d in ds]


def rate_curve_rows(results) -> list[dict]:
    return [{"d": r.d, "R_nats": r.R, "t_star": r.t_star, "status": r.status,
             "truncation_mass": r.truncation_mass} for r in results]


def _support_index(K: Kernel, measure_balls) -> dict[Ball, int]:
    index = {b: i for i, b in enumerate(K.balls)}
    for b in measure_balls:
        if b not in index:
            raise TruncationError(f"ball {b} lies outside the kernel's truncated support (L_max={K.L_max})")
    return index


def _marginals_ok(nu, K: Kernel, tol: float, mode: str) -> bool:
    sym = K.alphabet.symbols
    for i in (0, 1):
        mi = marginal(nu, i)
        if mode == "ball":
            if any(abs(float(mi.get(b, 0)) - p) > tol for b, p in K.atoms.items()):
                return False
            continue
        col = {a: 0.0 for a in sym}
        for b, w in mi.items():
            col[b.color] += float(w)
        if any(abs(col[a] - K.sigma[k]) > tol for k, a in enumerate(sym)):
            return False
    return True


def eval_I1(nu: Mapping[tuple[Ball, Ball], float], K: Kernel, tol: float = 1e-9,
            marginal_mode: str = "color") -> float:
    """``H(nu || K x K)`` if nu is consistent with the right marginals, else ``+inf``.

    ``marginal_mode="color"`` requires both color marginals to equal sigma;
    ``"ball"`` requires both ball marginals to equal the kernel.
    """
    if marginal_mode not in ("color", "ball"):
        raise ValidationError(f"unknown marginal mode {marginal_mode!r}")
    support = {b for key, w in nu.items() if w > 0 for b in key}
    _support_index(K, support)
    if not is_consistent(nu, K.alphabet, tol) or not _marginals_ok(nu, K, tol, marginal_mode):
        return math.inf
    atoms = K.atoms
    ref = {(bx, by): atoms[bx] * atoms[by] for (bx, by), w in nu.items() if w > 0}
    return relative_entropy(nu, ref)


def eval_I2(omega: Mapping[tuple, float], K: Kernel, tol: float = 1e-9,
            marginal_mode: str = "color") -> float:
    """Rate of a reshuffled measure over ``((a_x, a_y), (l_x, l_y))`` atoms."""
    return eval_I1(unshuffle(omega), K, tol, marginal_mode)
