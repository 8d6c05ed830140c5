"""Large-array mean and variance of the relay mutual information.

The asymptotic distribution is parametrised by six nonnegative scalars
``s1, s2, s3, t1, t2, t3`` solving a coupled system of trace equations.
The ``t`` equations involve only the transmit-side matrices ``T_s``, ``T_r``
and the ``s`` equations only the receive-side matrices ``R_r``, ``R_d``;
the pair ``(s3, t3)`` is decoupled from the rest.

Products of relay- and destination-side matrices are formed after
zero-padding both to ``m = max(n_r, n_d)`` (see :func:`model.star_embed`).
In the code below ``P = R_r* R_d*`` and

    M = I_m + t2 R_d* + t1 t2 P

is the common resolvent argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.optimize import brentq

from . import model
from .errors import ConvergenceError, DegenerateHessianError, NumericError
from .linalg import logabsdet, logdet_hpd
from .model import ChannelConfig, EffectiveCovariances, S2Variant

DAMPING = 0.5
MAX_ITER = 10_000
UPDATE_TOL = 1e-12
RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class SaddlePoint:
    s1: float
    s2: float
    s3: float
    t1: float
    t2: float
    t3: float
    residual: float = 0.0
    iterations: int = 0

    @property
    def s(self) -> Tuple[float, float, float]:
        return (self.s1, self.s2, self.s3)

    @property
    def t(self) -> Tuple[float, float, float]:
        return (self.t1, self.t2, self.t3)


@dataclass(frozen=True)
class VCoefficients:
    """Hessian entries: ``v1`` holds v_1^(1)..v_12^(1), ``v2`` and ``v3`` likewise."""

    v1: Tuple[float, ...]
    v2: Tuple[float, float]
    v3: Tuple[float, float, float, float]


@dataclass(frozen=True)
class ReplicaResult:
    mean_nats: float
    variance_nats2: float
    v1: Tuple[float, ...]
    v2: Tuple[float, float]
    v3: Tuple[float, float, float, float]
    logdet_V1: float
    logdet_V2: float
    logdet_V3: float
    saddle: SaddlePoint


class _Starred:
    """Star-embedded matrices of one scenario, computed once per evaluation."""

    def __init__(self, config: ChannelConfig, covs: EffectiveCovariances):
        self.n_s, self.n_r, self.n_d = config.n_s, config.n_r, config.n_d
        self.rho, self.alpha = config.rho, config.alpha
        m = self.m = config.star_dim
        self.I = np.eye(m)
        self.T_s = np.asarray(covs.T_s)
        self.T_r = np.asarray(covs.T_r)
        self.R_d = np.asarray(covs.R_d)
        self.Rr = model.star_embed(np.asarray(covs.R_r), m)
        self.Rd = model.star_embed(self.R_d, m)
        self.Tr = model.star_embed(self.T_r, m)
        self.P = self.Rr @ self.Rd
        self.eig_Ts = np.linalg.eigvalsh(self.T_s)
        self.eig_Tr = np.linalg.eigvalsh(self.T_r)
        self.eig_Rd = np.linalg.eigvalsh(self.R_d)

    def M(self, t1, t2):
        return self.I + t2 * self.Rd + (t1 * t2) * self.P

    def t_update(self, s1, s2, s3):
        rho, alpha = self.rho, self.alpha
        t1 = np.sum(rho * self.eig_Ts / (1.0 + rho * s1 * self.eig_Ts)) / self.n_s
        t2 = np.sum(alpha * self.eig_Tr / (1.0 + alpha * s2 * self.eig_Tr)) / self.n_r
        t3 = np.sum(alpha * self.eig_Tr / (1.0 + alpha * s3 * self.eig_Tr)) / self.n_r
        return t1, t2, t3

    def s3_update(self, t3):
        return np.sum(self.eig_Rd / (1.0 + t3 * self.eig_Rd)) / self.n_r

    def s12_update(self, t1, t2, variant):
        Minv = np.linalg.inv(self.M(t1, t2))
        s1 = np.trace(t2 * self.P @ Minv).real / self.n_s
        if variant is S2Variant.AS_PRINTED:
            numer = self.Rr + t2 * self.P
        else:
            # stationarity of the mean in t2
            numer = self.Rd + t1 * self.P
        s2 = np.trace(numer @ Minv).real / self.n_r
        return s1, s2


def _rel(x, fx):
    scale = max(abs(x), abs(fx))
    return 0.0 if scale == 0.0 else abs(x - fx) / scale


def _residual(st: _Starred, p, variant):
    """Max relative residual of the six equations, evaluated from scratch."""
    s1, s2, s3, t1, t2, t3 = p
    T = st.t_update(s1, s2, s3)
    S12 = st.s12_update(t1, t2, variant)
    S3 = st.s3_update(t3)
    pairs = [(t1, T[0]), (t2, T[1]), (t3, T[2]), (s1, S12[0]), (s2, S12[1]), (s3, S3)]
    return max(_rel(a, b) for a, b in pairs)


def _check_finite(values, iteration):
    if not all(math.isfinite(v) for v in values):
        raise NumericError(f"non-finite value in saddle-point iteration {iteration}: {values}")


def _solve_decoupled(st: _Starred):
    """Root of ``s3 = g(t3(s3))`` on ``[0, n_d / n_r]``; both maps are monotone."""

    def f(s3):
        return s3 - st.s3_update(st.t_update(1.0, 1.0, s3)[2])

    upper = float(np.sum(st.eig_Rd)) / st.n_r  # s3_update never exceeds this
    if f(upper) == 0.0:
        s3, iters = upper, 1
    else:
        s3, info = brentq(f, 0.0, upper, xtol=1e-15, rtol=4 * np.finfo(float).eps, full_output=True)
        iters = info.iterations
    t3 = st.t_update(1.0, 1.0, s3)[2]
    _check_finite((s3, t3), iters)
    return float(s3), float(t3), iters


def solve_saddle(config: ChannelConfig, covs: EffectiveCovariances = None, *,
                 damping=DAMPING, max_iter=MAX_ITER) -> SaddlePoint:
    """Damped fixed-point iteration for the six coupled trace equations.

    ``(s3, t3)`` is solved first, as a bracketed scalar root. The remaining four unknowns then alternate
    a ``t``-update (taken as is) and a damped ``s``-update until the relative
    update drops below 1e-12; the returned point is re-checked against all six
    equations.
    """
    covs = covs if covs is not None else config.effective_covariances()
    st = _Starred(config, covs)
    variant = config.s2_variant
    d = damping

    s3, t3, _ = _solve_decoupled(st)

    # (s2, t2) equals (s3, t3) without a source signal and stays close otherwise
    t1, t2 = st.t_update(s3, s3, s3)[:2]
    s1, s2 = st.s12_update(t1, t2, variant)
    for it in range(1, max_iter + 1):
        T = st.t_update(s1, s2, s3)
        t1_next, t2_next = T[0], T[1]
        S = st.s12_update(t1_next, t2_next, variant)
        s1_next = (1 - d) * s1 + d * S[0]
        s2_next = (1 - d) * s2 + d * S[1]
        _check_finite((s1_next, s2_next, t1_next, t2_next), it)
        step = max(_rel(s1, s1_next), _rel(s2, s2_next), _rel(t1, t1_next), _rel(t2, t2_next))
        s1, s2, t1, t2 = s1_next, s2_next, t1_next, t2_next
        if step < UPDATE_TOL:
            break

    point = (s1, s2, s3, t1, t2, t3)
    residual = _residual(st, point, variant)
    iterations = it
    if residual >= RESIDUAL_TOL or step >= UPDATE_TOL:
        raise ConvergenceError("saddle-point iteration did not converge", residual, iterations)
    return SaddlePoint(*(float(x) for x in point), residual=float(residual), iterations=iterations)


def saddle_residual(config: ChannelConfig, covs: EffectiveCovariances, saddle: SaddlePoint) -> float:
    st = _Starred(config, covs)
    p = (saddle.s1, saddle.s2, saddle.s3, saddle.t1, saddle.t2, saddle.t3)
    return _residual(st, p, config.s2_variant)


def _mean(st: _Starred, p: SaddlePoint) -> float:
    rho, alpha = st.rho, st.alpha
    I_s, I_r, I_d = np.eye(st.n_s), np.eye(st.n_r), np.eye(st.n_d)
    total = logdet_hpd(I_s + rho * p.s1 * st.T_s, "I + rho s1 T_s")
    total += logdet_hpd(I_r + alpha * p.s2 * st.T_r, "I + alpha s2 T_r")
    total -= logdet_hpd(I_r + alpha * p.s3 * st.T_r, "I + alpha s3 T_r")
    total -= logdet_hpd(I_d + p.t3 * st.R_d, "I + t3 R_d")
    # det(I + t2 R_d* + t1 t2 R_r* R_d*) = det(I + t2 L^H R_d* L), L L^H = I + t1 R_r*
    try:
        L = np.linalg.cholesky(st.I + p.t1 * st.Rr)
    except np.linalg.LinAlgError:
        raise NumericError("I + t1 R_r* is not positive definite") from None
    total += logdet_hpd(st.I + p.t2 * (L.conj().T @ st.Rd @ L), "I + t2 R_d* + t1 t2 R_r* R_d*")
    total -= st.n_s * p.s1 * p.t1 + st.n_r * p.s2 * p.t2 - st.n_r * p.s3 * p.t3
    return float(total)


def mean_mutual_information(config: ChannelConfig, covs: EffectiveCovariances, saddle: SaddlePoint) -> float:
    """Asymptotic ergodic mutual information in nats (no half-duplex pre-log)."""
    return _mean(_Starred(config, covs), saddle)


def _tr(A) -> float:
    return float(np.trace(A).real)


def _inv(A, what):
    try:
        return np.linalg.inv(A)
    except np.linalg.LinAlgError:
        raise NumericError(f"singular resolvent in {what}") from None


def variance_coefficients(config: ChannelConfig, covs: EffectiveCovariances, saddle: SaddlePoint,
                          *, as_printed: bool = False) -> VCoefficients:
    """The 18 Hessian entries at a saddle point.

    The Grassmann-block entries ``v3`` are scaled by ``sqrt(n_d/n_r) / min(n_r, n_d)``
    and all four carry the relay gain ``alpha``. This is the normalization under
    which the variance vanishes identically at ``rho = 0`` for every ``alpha`` and
    every antenna configuration; it reduces to ``1/n`` at equal array sizes.
    ``as_printed=True`` uses a plain ``1/n_r`` with ``alpha`` on the first entry
    only, which is exact only at ``alpha = 1`` and ``n_r = n_d``.
    """
    st = _Starred(config, covs)
    rho, alpha = st.rho, st.alpha
    n_s, n_r = st.n_s, st.n_r
    s1, s2, s3, t1, t2, t3 = saddle.s1, saddle.s2, saddle.s3, saddle.t1, saddle.t2, saddle.t3
    I, Rr, Rd, Tr, P = st.I, st.Rr, st.Rd, st.Tr, st.P

    G_s = rho * st.T_s @ _inv(np.eye(n_s) + rho * s1 * st.T_s, "v1(1)")
    G_r2 = alpha * st.T_r @ _inv(np.eye(n_r) + alpha * s2 * st.T_r, "v2(1)")
    G_r3 = alpha * st.T_r @ _inv(np.eye(n_r) + alpha * s3 * st.T_r, "v1(2)")

    Minv = _inv(st.M(t1, t2), "M")
    Minv2 = Minv @ Minv
    A = I + t2 * Rd
    B = I + t1 * t2 * P
    Rd2 = Rd @ Rd
    RrRd2 = Rr @ Rd2

    def sq(X):
        return _tr(X @ X)

    v1 = (
        sq(G_s) / n_s**2,
        sq(G_r2) / n_r**2,
        -_tr(P @ (A @ Minv) @ (A @ Minv)),
        -_tr(Rr @ (t2 * Rd @ Minv) @ (t2 * Rd @ Minv)),
        sq(t1 * P @ A @ Minv),
        sq(t1 * t2 * RrRd2 @ Minv),
        sq((Rd + t1 * t2 * RrRd2) @ Minv),
        _tr(t2 * P @ Rd @ A @ Minv2),
        -_tr(t2 * Rd @ A @ (t1 * P @ Minv) @ (t1 * P @ Minv)),
        _tr(t1 * RrRd2 @ A @ B @ Minv2),
        -_tr(t1 * t2 * RrRd2 @ B @ Minv2),
        sq(t2 * P @ Minv),
    )

    G_d = st.R_d @ _inv(np.eye(st.n_d) + t3 * st.R_d, "v2(2)")
    v2 = (sq(G_r3) / n_r**2, sq(G_d))

    RdTr = Rd @ Tr
    inv_t3 = _inv(I + t3 * Rd, "v1(3)")
    inv_s2 = _inv(I + alpha * s2 * Tr, "v1(3)")
    inv_s3 = _inv(I + alpha * s3 * Tr, "v2(3)")
    if as_printed:
        scale, gain = 1.0 / n_r, 1.0
    else:
        scale, gain = math.sqrt(st.n_d / n_r) / min(n_r, st.n_d), alpha
    v3 = (
        scale * _tr(alpha * RdTr @ inv_t3 @ inv_s2),
        scale * gain * _tr(t1 * t2 * RdTr @ P @ Minv @ inv_s3),
        scale * gain * _tr(RdTr @ B @ Minv @ inv_s3),
        scale * gain * _tr(RdTr @ (t1 * Rr + t1 * t2 * P) @ Minv @ inv_s3),
    )
    return VCoefficients(v1=v1, v2=v2, v3=v3)


def hessians(v: VCoefficients):
    """Assemble the three Hessian blocks ``(V1, V2, V3)`` from their entries."""
    (a1, a2, a3, a4, a5, a6, a7, a8, a9, a10, a11, a12) = v.v1
    V1 = np.array([
        [a1, 1, 0, 0, 0, 0, 0, 0, 0, 0],
        [1, a12, 0, a3, 0, a8, 0, a8, 0, a4],
        [0, 0, a2, 1, a2, 0, a2, 0, a2, 0],
        [0, a3, 1, a5, 0, a9, 0, a9, 0, a6],
        [0, 0, a2, 0, a2, 1, a2, 0, a2, 0],
        [0, a8, 0, a9, 1, a6, 0, a10, 0, a11],
        [0, 0, a2, 0, a2, 0, a2, 1, a2, 0],
        [0, a8, 0, a9, 0, a10, 1, a6, 0, a11],
        [0, 0, a2, 0, a2, 0, a2, 0, a2, 1],
        [0, a4, 0, a6, 0, a11, 0, a11, 1, a7],
    ], dtype=float)
    b1, b2 = v.v2
    V2 = np.array([[b1, 1], [1, b2]], dtype=float)
    c1, c2, c3, c4 = v.v3
    V3 = np.array([
        [1, -c1, 0, c1],
        [-c4, 1, c2, 0],
        [0, c1, -1, -c1],
        [c2, 0, -c3, -1],
    ], dtype=float)
    return V1, V2, V3


def variance_mutual_information(v: VCoefficients) -> Tuple[float, float, float, float]:
    """Return ``(variance, ln|det V1|, ln|det V2|, ln|det V3|)``."""
    if not all(math.isfinite(x) for x in (*v.v1, *v.v2, *v.v3)):
        raise NumericError("non-finite variance coefficient")
    logdets = []
    for name, V in zip(("V1", "V2", "V3"), hessians(v)):
        try:
            logdets.append(logabsdet(V, name))
        except NumericError as exc:
            raise DegenerateHessianError(f"degenerate Hessian: {exc}") from None
    l1, l2, l3 = logdets
    return -l1 - l2 + 2.0 * l3, l1, l2, l3


def evaluate(config: ChannelConfig, covs: EffectiveCovariances = None) -> ReplicaResult:
    """Solve the saddle point and evaluate both moments for one scenario."""
    covs = covs if covs is not None else config.effective_covariances()
    saddle = solve_saddle(config, covs)
    mean = mean_mutual_information(config, covs, saddle)
    v = variance_coefficients(config, covs, saddle)
    var, l1, l2, l3 = variance_mutual_information(v)
    return ReplicaResult(
        mean_nats=mean, variance_nats2=var, v1=v.v1, v2=v.v2, v3=v.v3,
        logdet_V1=l1, logdet_V2=l2, logdet_V3=l3, saddle=saddle,
    )


# --------------------------------------------------------------------------
# scalar reduction for identity correlations and n_s = n_r = n_d


@dataclass(frozen=True)
class ScalarSaddle:
    q1: float
    q2: float
    q8: float
    r1: float
    r2_tilde: float
    r8: float


def _scalar_map(rho, alpha, q1, q2, q8):
    r1 = q2 / (1 + q1 * q2 + q2)
    r2 = (1 + q1) / (1 + q1 * q2 + q2)
    r8 = 1 / (1 + q8)
    return r1, r2, r8, rho / (1 + rho * r1), alpha / (1 + alpha * r2), alpha / (1 + alpha * r8)


def scalar_residual(rho, alpha, p: ScalarSaddle) -> float:
    eqs = (
        p.q1 - rho / (1 + rho * p.r1),
        p.q2 - alpha / (1 + alpha * p.r2_tilde),
        p.q8 - alpha / (1 + alpha * p.r8),
        p.r1 - p.q2 / (1 + p.q1 * p.q2 + p.q2),
        p.r2_tilde - (1 + p.q1) / (1 + p.q1 * p.q2 + p.q2),
        p.r8 - 1 / (1 + p.q8),
    )
    return max(abs(e) for e in eqs)


def scalar_saddle(rho: float, alpha: float, *, tol=1e-13, max_iter=200_000) -> ScalarSaddle:
    """Solve the six scalar stationarity equations of the i.i.d. equal-size case."""
    if rho < 0 or alpha <= 0:
        raise ValueError("need rho >= 0 and alpha > 0")
    q1, q2, q8 = rho, alpha, alpha
    for it in range(max_iter):
        r1, r2, r8, f1, f2, f8 = _scalar_map(rho, alpha, q1, q2, q8)
        step = max(abs(f1 - q1), abs(f2 - q2), abs(f8 - q8))
        q1 += 0.5 * (f1 - q1)
        q2 += 0.5 * (f2 - q2)
        q8 += 0.5 * (f8 - q8)
        if step < tol:
            break
    r1, r2, r8, *_ = _scalar_map(rho, alpha, q1, q2, q8)
    out = ScalarSaddle(q1=q1, q2=q2, q8=q8, r1=r1, r2_tilde=r2, r8=r8)
    res = scalar_residual(rho, alpha, out)
    if res > 1e-12:
        raise ConvergenceError("scalar saddle point did not converge", res, it + 1)
    return out


def scalar_mean(rho: float, alpha: float, n: int) -> float:
    p = scalar_saddle(rho, alpha)
    xi = (
        math.log1p(rho * p.r1)
        + math.log1p(alpha * p.r2_tilde)
        + math.log1p(p.q2 + p.q1 * p.q2)
        - math.log1p(alpha * p.r8)
        - math.log1p(p.q8)
        - (p.r1 * p.q1 + p.r2_tilde * p.q2 - p.r8 * p.q8)
    )
    return n * xi
