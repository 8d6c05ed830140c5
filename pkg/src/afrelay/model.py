"""Scenario configuration, correlation matrices and the star-embedding algebra.

A scenario is a two-hop amplify-and-forward link: ``n_s`` source antennas,
``n_r`` relay antennas and ``n_d`` destination antennas, with Kronecker
correlated Rayleigh fading on both hops. The precoder ``F_s`` and the
normalised forwarding matrix ``F_r`` are deterministic, so they are folded
into the transmit-side correlation matrices once, up front:

    T_s_eff = F_s T_s F_s^H,    T_r_eff = F_r T_r F_r^H
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy.linalg import toeplitz

from .errors import ValidationError
from .linalg import HERMITIAN_TOL, hermitian_part, is_hermitian

TRACE_TOL = 1e-12
BEAMFORMER_TRACE_TOL = 1e-9

MatrixSource = Union[str, Path, np.ndarray]


class S2Variant(str, enum.Enum):
    """Numerator used in the relay-side ``s2`` trace equation."""

    AS_PRINTED = "as_printed"
    SCALAR_CONSISTENT = "scalar_consistent"

    @classmethod
    def parse(cls, text: str) -> "S2Variant":
        aliases = {"printed": cls.AS_PRINTED, "consistent": cls.SCALAR_CONSISTENT}
        key = text.strip().lower()
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise ValidationError(f"unknown s2 variant {text!r}", "s2_variant") from None


# --------------------------------------------------------------------------
# matrix text files

_REAL = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_ENTRY = re.compile(rf"^(?P<re>{_REAL})(?:(?P<im>[+-](?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)i)?$")


def parse_complex(token: str) -> complex:
    """Parse one matrix entry: ``a``, ``a+bi`` or ``a-bi``."""
    m = _ENTRY.match(token)
    if m is None:
        raise ValueError(f"malformed matrix entry {token!r}")
    im = m.group("im")
    return complex(float(m.group("re")), float(im) if im else 0.0)


def parse_matrix_text(text: str) -> np.ndarray:
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            rows.append([parse_complex(tok) for tok in line.split()])
        except ValueError as exc:
            raise ValidationError(f"line {lineno}: {exc}", "format") from None
    if not rows:
        raise ValidationError("matrix file contains no rows", "dimension")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValidationError("ragged matrix rows", "dimension")
    return np.array(rows, dtype=complex)


def read_matrix_file(path: Union[str, Path]) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"matrix file not found: {path}", "file")
    return parse_matrix_text(path.read_text())


def format_matrix(A) -> str:
    """Inverse of :func:`parse_matrix_text` (lossless for float64 entries)."""
    lines = []
    for row in np.atleast_2d(np.asarray(A, dtype=complex)):
        toks = []
        for z in row:
            if z.imag == 0.0:
                toks.append(repr(float(z.real)))
            else:
                toks.append(f"{float(z.real)!r}{float(z.imag):+.17g}i")
        lines.append(" ".join(toks))
    return "\n".join(lines) + "\n"


def _load(source: MatrixSource) -> np.ndarray:
    if isinstance(source, np.ndarray):
        return np.array(source, dtype=complex)
    return read_matrix_file(source)


# --------------------------------------------------------------------------
# matrices


@dataclass(frozen=True)
class CorrelationMatrix:
    """Validated Hermitian positive-definite correlation matrix.

    With ``normalized=True`` (the four raw Kronecker factors) the trace must
    also equal the dimension. Folded effective matrices skip that check.
    """

    entries: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        A = np.array(self.entries, dtype=complex)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
            raise ValidationError(f"correlation matrix must be square, got shape {A.shape}", "dimension")
        if not np.all(np.isfinite(A)):
            raise ValidationError("correlation matrix has non-finite entries", "finite")
        if not is_hermitian(A, HERMITIAN_TOL):
            raise ValidationError("correlation matrix is not Hermitian", "hermitian")
        try:
            np.linalg.cholesky(A)
        except np.linalg.LinAlgError:
            raise ValidationError("correlation matrix is not positive definite", "positive_definite") from None
        n = A.shape[0]
        if self.normalized and abs(np.trace(A).real - n) > TRACE_TOL * n:
            raise ValidationError(
                f"correlation matrix trace {np.trace(A).real!r} != dimension {n}", "trace"
            )
        A.setflags(write=False)
        object.__setattr__(self, "entries", A)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


@dataclass(frozen=True)
class CovarianceSpec:
    """How a correlation matrix is built: identity, exponential or explicit."""

    kind: str = "identity"
    r: Optional[float] = None
    source: Optional[MatrixSource] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("identity", "exponential", "explicit"):
            raise ValidationError(f"unknown covariance kind {self.kind!r}", "kind")
        if self.kind == "exponential":
            if self.r is None or not (0.0 <= float(self.r) < 1.0):
                raise ValidationError(f"exponential correlation needs 0 <= r < 1, got {self.r!r}", "r")
        if self.kind == "explicit" and self.source is None:
            raise ValidationError("explicit covariance needs a file path or matrix", "file")

    @classmethod
    def identity(cls):
        return cls("identity")

    @classmethod
    def exponential(cls, r: float):
        return cls("exponential", r=float(r))

    @classmethod
    def explicit(cls, source: MatrixSource):
        return cls("explicit", source=source)

    def describe(self) -> str:
        if self.kind == "exponential":
            return f"exponential {self.r!r}"
        if self.kind == "explicit":
            return f"explicit {self.source}" if not isinstance(self.source, np.ndarray) else "explicit <array>"
        return "identity"


@dataclass(frozen=True)
class BeamformerSpec:
    kind: str = "identity"
    source: Optional[MatrixSource] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("identity", "explicit"):
            raise ValidationError(f"unknown beamformer kind {self.kind!r}", "kind")
        if self.kind == "explicit" and self.source is None:
            raise ValidationError("explicit beamformer needs a file path or matrix", "file")

    @classmethod
    def identity(cls):
        return cls("identity")

    @classmethod
    def explicit(cls, source: MatrixSource):
        return cls("explicit", source=source)

    def resolve(self, dim: int) -> np.ndarray:
        """Return the square matrix, checking only its shape."""
        if self.kind == "identity":
            return np.eye(dim, dtype=complex)
        F = _load(self.source)
        if F.shape != (dim, dim):
            raise ValidationError(f"beamformer must be {dim}x{dim}, got {F.shape}", "dimension")
        if not np.all(np.isfinite(F)):
            raise ValidationError("beamformer has non-finite entries", "finite")
        return F

    def describe(self) -> str:
        if self.kind == "explicit":
            return f"explicit {self.source}" if not isinstance(self.source, np.ndarray) else "explicit <array>"
        return "identity"


def build_covariance(spec: CovarianceSpec, dim: int) -> CorrelationMatrix:
    if not isinstance(dim, (int, np.integer)) or dim < 1:
        raise ValidationError(f"dimension must be a positive integer, got {dim!r}", "dimension")
    if spec.kind == "identity":
        return CorrelationMatrix(np.eye(dim))
    if spec.kind == "exponential":
        return CorrelationMatrix(toeplitz(float(spec.r) ** np.arange(dim)))
    A = _load(spec.source)
    if A.shape != (dim, dim):
        raise ValidationError(f"covariance must be {dim}x{dim}, got {A.shape}", "dimension")
    return CorrelationMatrix(A)


def check_beamformer_trace(F, what="beamformer"):
    """Enforce ``Tr{F F^H} = dim``."""
    F = np.asarray(F)
    n = F.shape[0]
    power = float(np.sum(np.abs(F) ** 2))
    if abs(power - n) > BEAMFORMER_TRACE_TOL * n:
        raise ValidationError(f"{what} violates Tr{{F F^H}} = {n} (got {power!r})", "trace")


def _fold(T, F, what):
    T = np.asarray(T)
    F = np.asarray(F, dtype=complex)
    if F.ndim != 2 or F.shape != T.shape:
        raise ValidationError(f"{what} must be {T.shape[0]}x{T.shape[0]}, got {F.shape}", "dimension")
    check_beamformer_trace(F, what)
    try:
        return CorrelationMatrix(hermitian_part(F @ T @ F.conj().T), normalized=False)
    except ValidationError as exc:
        if exc.invariant == "positive_definite":
            raise ValidationError("effective covariance not positive definite", "positive_definite") from None
        raise


def fold_forwarder(T_r, F_r) -> CorrelationMatrix:
    """``F_r T_r F_r^H``: absorbs the normalised forwarding matrix into ``T_r``."""
    return _fold(T_r, F_r, "forwarder")


def fold_precoder(T_s, F_s) -> CorrelationMatrix:
    """``F_s T_s F_s^H``: absorbs the source precoder into ``T_s``."""
    return _fold(T_s, F_s, "precoder")


def star_embed(A, target: int) -> np.ndarray:
    """Zero-pad square ``A`` to ``target x target``, keeping it in the top-left corner."""
    A = np.asarray(A)
    a = A.shape[0]
    if target < a:
        raise ValidationError(f"cannot embed a {a}x{a} matrix into {target}x{target}", "dimension")
    if target == a:
        return A
    out = np.zeros((target, target), dtype=np.result_type(A, float))
    out[:a, :a] = A
    return out


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class EffectiveCovariances:
    """The four matrices the asymptotic formulas and the simulator consume."""

    T_s: CorrelationMatrix
    R_r: CorrelationMatrix
    T_r: CorrelationMatrix
    R_d: CorrelationMatrix


def _positive_int(name, value):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
        raise ValidationError(f"{name} must be a positive integer, got {value!r}", name)
    return int(value)


@dataclass(frozen=True)
class ChannelConfig:
    n_s: int
    n_r: int
    n_d: int
    rho: float
    alpha: float
    cov_Ts: CovarianceSpec = CovarianceSpec()
    cov_Rr: CovarianceSpec = CovarianceSpec()
    cov_Tr: CovarianceSpec = CovarianceSpec()
    cov_Rd: CovarianceSpec = CovarianceSpec()
    precoder: BeamformerSpec = BeamformerSpec()
    forwarder: BeamformerSpec = BeamformerSpec()
    s2_variant: S2Variant = S2Variant.SCALAR_CONSISTENT

    def __post_init__(self):
        for name in ("n_s", "n_r", "n_d"):
            object.__setattr__(self, name, _positive_int(name, getattr(self, name)))
        rho, alpha = float(self.rho), float(self.alpha)
        if not math.isfinite(rho) or rho < 0:
            raise ValidationError(f"rho must be finite and >= 0, got {self.rho!r}", "rho")
        if not math.isfinite(alpha) or alpha <= 0:
            raise ValidationError(f"alpha must be finite and > 0, got {self.alpha!r}", "alpha")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "alpha", alpha)
        if not isinstance(self.s2_variant, S2Variant):
            object.__setattr__(self, "s2_variant", S2Variant.parse(str(self.s2_variant)))

    @property
    def star_dim(self) -> int:
        return max(self.n_r, self.n_d)

    def effective_covariances(self) -> EffectiveCovariances:
        T_s = build_covariance(self.cov_Ts, self.n_s)
        R_r = build_covariance(self.cov_Rr, self.n_r)
        T_r = build_covariance(self.cov_Tr, self.n_r)
        R_d = build_covariance(self.cov_Rd, self.n_d)
        F_s = self.precoder.resolve(self.n_s)
        F_r = self.forwarder.resolve(self.n_r)
        return EffectiveCovariances(
            T_s=fold_precoder(T_s, F_s),
            R_r=R_r,
            T_r=fold_forwarder(T_r, F_r),
            R_d=R_d,
        )
