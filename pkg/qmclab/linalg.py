"""
Dense complex linear algebra on composite Hilbert spaces.

Subsystems are ordered left to right and the composite basis index is big-endian in
that order: the first subsystem is the slowest-varying index, matching np.kron.
Every matrix function goes through the eigendecomposition of the hermitized input.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
import numpy.typing as npt
from scipy import linalg as sla
from scipy.special import entr

from qmclab.config import (
    HERMITIAN_TOL,
    PSD_CLIP_TOL,
    PSD_ERROR_TOL,
    TRACE_TOL,
    DENSITY_EIG_TOL,
    max_total_dim,
)
from qmclab.errors import (
    DimensionError,
    InvalidExponentError,
    NotHermitianError,
    NotPSDError,
    TraceError,
)

logger = logging.getLogger(__name__)

ComplexMatrix = npt.NDArray[np.complex128]

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class SystemLayout:
    """
    Ordered subsystem dimensions of a composite Hilbert space.

    Parameters
    ----------
    dims: tuple[int, ...]
        Subsystem dimensions d_1..d_m, first subsystem most significant.
    labels: tuple[str, ...], optional
        Optional names, one per subsystem.
    """

    dims: tuple[int, ...]
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if len(dims) < 1:
            raise DimensionError("a layout needs at least one subsystem")
        for i, d in enumerate(dims):
            if d < 1:
                raise DimensionError(
                    f"subsystem {i} has dimension {d}; dimensions must be >= 1",
                    subsystem=i,
                )
        if self.labels is not None:
            labels = tuple(self.labels)
            object.__setattr__(self, "labels", labels)
            if len(labels) != len(dims):
                raise DimensionError(
                    f"{len(labels)} labels given for {len(dims)} subsystems"
                )

    @classmethod
    def of(cls, *dims: int) -> "SystemLayout":
        return cls(tuple(dims))

    def __len__(self) -> int:
        return len(self.dims)

    @property
    def total(self) -> int:
        return math.prod(self.dims)

    def dim_of(self, indices: Iterable[int]) -> int:
        return math.prod(self.dims[i] for i in indices)

    def keep(self, indices: Sequence[int]) -> "SystemLayout":
        """Layout of the listed subsystems, in their original order."""
        indices = sorted(indices)
        labels = None if self.labels is None else tuple(self.labels[i] for i in indices)
        return SystemLayout(tuple(self.dims[i] for i in indices), labels)

    def permuted(self, order: Sequence[int]) -> "SystemLayout":
        labels = None if self.labels is None else tuple(self.labels[i] for i in order)
        return SystemLayout(tuple(self.dims[i] for i in order), labels)

    def concat(self, other: "SystemLayout") -> "SystemLayout":
        labels = None
        if self.labels is not None and other.labels is not None:
            labels = self.labels + other.labels
        return SystemLayout(self.dims + other.dims, labels)

    def check_index(self, index: int) -> None:
        if not 0 <= index < len(self.dims):
            raise DimensionError(
                f"subsystem index {index} is not in a layout of "
                f"{len(self.dims)} subsystems",
                subsystem=index,
            )

    def check_square(self, x: np.ndarray, what: str = "matrix") -> None:
        """Raises DimensionError unless x is square with this layout's dimension."""
        if x.ndim != 2 or x.shape[0] != x.shape[1]:
            raise DimensionError(f"{what} must be square, got shape {x.shape}")
        if x.shape[0] != self.total:
            raise DimensionError(
                f"{what} has dimension {x.shape[0]} but layout {self.dims} "
                f"has total dimension {self.total}"
            )


@dataclass(frozen=True, eq=False)
class HermitianSpectrum:
    """Eigenvalues in descending order with the matching unitary eigenvector matrix."""

    eigenvalues: npt.NDArray[np.float64]
    eigenvectors: ComplexMatrix

    def apply(self, fn: Callable[[np.ndarray], np.ndarray]) -> ComplexMatrix:
        """Returns U diag(fn(eigenvalues)) U†, hermitized."""
        u = self.eigenvectors
        return hermitize((u * fn(self.eigenvalues)) @ u.conj().T)

    def reconstruct(self) -> ComplexMatrix:
        return self.apply(lambda lam: lam)

    @property
    def max_abs(self) -> float:
        if self.eigenvalues.size == 0:
            return 0.0
        return float(np.max(np.abs(self.eigenvalues)))


def as_matrix(x) -> ComplexMatrix:
    """Returns x as a 2-d complex128 array, rejecting non-finite entries."""
    m = np.asarray(x, dtype=np.complex128)
    if m.ndim != 2:
        raise DimensionError(f"expected a 2-d matrix, got {m.ndim} dimensions")
    if not np.all(np.isfinite(m)):
        raise DimensionError("matrix has non-finite entries")
    return m


def _check_cap(rows: int, cols: int) -> None:
    cap = max_total_dim()
    if max(rows, cols) > cap:
        raise DimensionError(
            f"result of shape {rows}x{cols} exceeds the maximum total dimension {cap}"
        )


def kron(a: ComplexMatrix, b: ComplexMatrix) -> ComplexMatrix:
    """
    Kronecker product. The first factor is the most significant index.

    Parameters
    ----------
    a: ComplexMatrix
        Left factor.
    b: ComplexMatrix
        Right factor.

    Returns
    -------
    ComplexMatrix: a ⊗ b
    """
    a, b = as_matrix(a), as_matrix(b)
    _check_cap(a.shape[0] * b.shape[0], a.shape[1] * b.shape[1])
    return np.kron(a, b)


def kron_all(*mats: ComplexMatrix) -> ComplexMatrix:
    if not mats:
        raise DimensionError("kron_all needs at least one factor")
    result = as_matrix(mats[0])
    for m in mats[1:]:
        result = kron(result, m)
    return result


def identity(d: int) -> ComplexMatrix:
    return np.eye(d, dtype=np.complex128)


def hermitize(a: ComplexMatrix) -> ComplexMatrix:
    """(A + A†) / 2"""
    return (a + a.conj().T) / 2


def _normalize_traced(layout: SystemLayout, traced: Iterable[int]) -> list[int]:
    traced = sorted(set(int(i) for i in traced))
    for i in traced:
        layout.check_index(i)
    return traced


def partial_trace(
    x: ComplexMatrix, layout: SystemLayout, traced: Iterable[int]
) -> ComplexMatrix:
    """
    Traces out the listed subsystems.

    Parameters
    ----------
    x: ComplexMatrix
        Square operator on the composite space described by layout.
    layout: SystemLayout
        Subsystem dimensions of x.
    traced: Iterable[int]
        Indices of the subsystems to trace out. An empty selection returns x.

    Returns
    -------
    ComplexMatrix: Operator on the remaining subsystems in their original order. If
    every subsystem is traced, a 1x1 matrix holding tr(x).
    """
    x = as_matrix(x)
    layout.check_square(x)
    traced = _normalize_traced(layout, traced)
    if not traced:
        return x.copy()
    m = len(layout)
    kept = [i for i in range(m) if i not in traced]
    d_kept = layout.dim_of(kept)
    d_traced = layout.dim_of(traced)
    perm = kept + traced
    perm = perm + [i + m for i in perm]
    t = x.reshape(layout.dims + layout.dims).transpose(perm)
    t = t.reshape(d_kept, d_traced, d_kept, d_traced)
    return np.trace(t, axis1=1, axis2=3)


def permute_systems(
    x: ComplexMatrix, layout: SystemLayout, order: Sequence[int]
) -> tuple[ComplexMatrix, SystemLayout]:
    """
    Reorders subsystems so that new subsystem k is old subsystem order[k].

    Returns
    -------
    tuple[ComplexMatrix, SystemLayout]: The permuted operator and its layout.
    """
    x = as_matrix(x)
    layout.check_square(x)
    order = [int(i) for i in order]
    if sorted(order) != list(range(len(layout))):
        raise DimensionError(
            f"{order} is not a permutation of {len(layout)} subsystems"
        )
    m = len(layout)
    perm = order + [i + m for i in order]
    t = x.reshape(layout.dims + layout.dims).transpose(perm)
    return t.reshape(x.shape), layout.permuted(order)


def spectrum(p: ComplexMatrix) -> HermitianSpectrum:
    """
    Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.

    Raises NotHermitianError if p deviates from Hermitian by more than
    HERMITIAN_TOL relative to its operator norm.
    """
    p = as_matrix(p)
    if p.shape[0] != p.shape[1]:
        raise DimensionError(f"matrix must be square, got shape {p.shape}")
    scale = max(float(np.linalg.norm(p, 2)), np.finfo(float).tiny)
    skew = float(np.linalg.norm(p - p.conj().T, 2)) / 2
    if skew > HERMITIAN_TOL * scale:
        raise NotHermitianError("matrix is not Hermitian", skew / scale)
    lam, u = sla.eigh(hermitize(p))
    return HermitianSpectrum(lam[::-1].copy(), u[:, ::-1].copy())


def psd_spectrum(p: ComplexMatrix) -> HermitianSpectrum:
    """
    Spectrum of a PSD matrix with rounding-level negative eigenvalues clipped to 0.

    Raises NotPSDError if an eigenvalue is below -PSD_ERROR_TOL * ||p||_inf.
    """
    spec = spectrum(p)
    lam = spec.eigenvalues
    scale = spec.max_abs
    if lam.size and lam[-1] < 0:
        if lam[-1] < -PSD_ERROR_TOL * scale:
            raise NotPSDError("matrix is not positive semidefinite", -lam[-1] / scale)
        if lam[-1] < -PSD_CLIP_TOL * scale:
            logger.debug(
                f"Clipping negative eigenvalue {lam[-1]:.3e} (operator norm {scale:.3e})"
            )
        lam = np.clip(lam, 0.0, None)
    return HermitianSpectrum(lam, spec.eigenvectors)


def support_tol(spec: HermitianSpectrum, tol: float | None = None) -> float:
    """Default support cutoff: dim * machine epsilon * largest eigenvalue."""
    if tol is not None:
        return float(tol)
    return len(spec.eigenvalues) * np.finfo(float).eps * spec.max_abs


def herm_sqrt(p: ComplexMatrix) -> ComplexMatrix:
    """Positive square root of a Hermitian PSD matrix."""
    return psd_spectrum(p).apply(np.sqrt)


def pinv_sqrt(p: ComplexMatrix, tol: float | None = None) -> ComplexMatrix:
    """
    Inverse square root on the support of a Hermitian PSD matrix.

    Parameters
    ----------
    p: ComplexMatrix
        Hermitian PSD matrix.
    tol: float, optional
        Eigenvalues at or below tol are treated as zero. Defaults to
        dim * machine epsilon * largest eigenvalue.

    Returns
    -------
    ComplexMatrix: p^{-1/2} on the support of p, zero elsewhere.
    """
    spec = psd_spectrum(p)
    cutoff = support_tol(spec, tol)

    def inv_sqrt(lam):
        out = np.zeros_like(lam)
        mask = lam > cutoff
        out[mask] = lam[mask] ** -0.5
        return out

    return spec.apply(inv_sqrt)


def support_projector(p: ComplexMatrix, tol: float | None = None) -> ComplexMatrix:
    spec = psd_spectrum(p)
    cutoff = support_tol(spec, tol)
    return spec.apply(lambda lam: (lam > cutoff).astype(float))


def schatten_norm(x: ComplexMatrix, p: float) -> float:
    """
    Schatten p-norm, (sum of singular values ** p) ** (1/p).

    Parameters
    ----------
    x: ComplexMatrix
        Any matrix.
    p: float
        Exponent, at least 1. math.inf gives the operator norm.

    Returns
    -------
    float: The norm.
    """
    if not p >= 1:
        raise InvalidExponentError(f"Schatten exponent must be >= 1, got {p}")
    x = as_matrix(x)
    if p == 2:
        return float(np.linalg.norm(x, "fro"))
    s = sla.svdvals(x)
    if s.size == 0:
        return 0.0
    top = float(s.max())
    if math.isinf(p) or top == 0.0:
        return top
    # Rescale by the largest singular value so s ** p cannot overflow.
    return top * float(np.sum((s / top) ** p) ** (1.0 / p))


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")


def trace_distance(rho: ComplexMatrix, sigma: ComplexMatrix) -> float:
    """Full trace norm ||rho - sigma||_1 (not halved)."""
    rho, sigma = as_matrix(rho), as_matrix(sigma)
    _check_same_shape(rho, sigma)
    return schatten_norm(rho - sigma, 1)


def trace_distance_half(rho: ComplexMatrix, sigma: ComplexMatrix) -> float:
    return trace_distance(rho, sigma) / 2


def check_density_matrix(m: ComplexMatrix) -> ComplexMatrix:
    """
    Validates a density matrix and returns it hermitized.

    Raises NotHermitianError, NotPSDError or TraceError with the measured
    violation. Never normalizes.
    """
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"density matrix must be square, got shape {m.shape}")
    spec = spectrum(m)
    lam_min = float(spec.eigenvalues[-1])
    if lam_min < -DENSITY_EIG_TOL:
        raise NotPSDError("matrix is not positive semidefinite", -lam_min)
    tr = float(np.trace(m).real)
    if abs(tr - 1.0) > TRACE_TOL:
        raise TraceError(f"trace is {tr!r}, expected 1", abs(tr - 1.0))
    return hermitize(m)


def _fidelity_psd(rho: ComplexMatrix, sigma: ComplexMatrix) -> float:
    """tr|rho^{1/2} sigma^{1/2}| for PSD inputs of any trace."""
    return float(np.sum(sla.svdvals(herm_sqrt(rho) @ herm_sqrt(sigma))))


def fidelity(rho: ComplexMatrix, sigma: ComplexMatrix, validate: bool = True) -> float:
    """
    Fidelity F(rho, sigma) = tr|rho^{1/2} sigma^{1/2}| (root fidelity, not squared).

    Parameters
    ----------
    rho: ComplexMatrix
        Density matrix.
    sigma: ComplexMatrix
        Density matrix of the same shape.
    validate: bool, optional
        Validate both inputs as density matrices. Internal callers working with
        sub-normalized recovery outputs pass False. Defaults to True.

    Returns
    -------
    float: Fidelity in [0, 1] up to rounding.
    """
    rho, sigma = as_matrix(rho), as_matrix(sigma)
    _check_same_shape(rho, sigma)
    if validate:
        rho = check_density_matrix(rho)
        sigma = check_density_matrix(sigma)
    return _fidelity_psd(rho, sigma)


def sqrt_overlap(rho: ComplexMatrix, sigma: ComplexMatrix) -> float:
    """tr(rho^{1/2} sigma^{1/2}), real for PSD inputs."""
    return float(np.trace(herm_sqrt(rho) @ herm_sqrt(sigma)).real)


def vn_entropy(rho: ComplexMatrix, validate: bool = True) -> float:
    """Von Neumann entropy in bits, with 0 log 0 = 0."""
    if validate:
        rho = check_density_matrix(rho)
    lam = psd_spectrum(rho).eigenvalues
    return max(float(np.sum(entr(lam))) / _LN2, 0.0)


def relative_entropy(
    rho: ComplexMatrix,
    sigma: ComplexMatrix,
    tol: float | None = None,
    validate: bool = True,
) -> float:
    """
    Relative entropy S(rho || sigma) in bits.

    Parameters
    ----------
    rho: ComplexMatrix
        Density matrix.
    sigma: ComplexMatrix
        Density matrix of the same shape.
    tol: float, optional
        Support cutoff for sigma. Defaults to dim * machine epsilon * largest
        eigenvalue.
    validate: bool, optional
        Validate both inputs as density matrices. Defaults to True.

    Returns
    -------
    float: The relative entropy, or math.inf when the support of rho is not
    contained in the support of sigma.
    """
    rho, sigma = as_matrix(rho), as_matrix(sigma)
    _check_same_shape(rho, sigma)
    if validate:
        rho = check_density_matrix(rho)
        sigma = check_density_matrix(sigma)
    sig_spec = psd_spectrum(sigma)
    cutoff = support_tol(sig_spec, tol)
    on_support = sig_spec.eigenvalues > cutoff
    v = sig_spec.eigenvectors
    # Weight of rho outside the support of sigma.
    rho_in_basis = np.real(np.einsum("ij,jk,ki->i", v.conj().T, rho, v))
    leakage = float(np.sum(rho_in_basis[~on_support]))
    if leakage > TRACE_TOL:
        return math.inf

    rho_lam = psd_spectrum(rho).eigenvalues
    neg_entropy = -float(np.sum(entr(rho_lam)))
    log_sig = np.zeros_like(sig_spec.eigenvalues)
    log_sig[on_support] = np.log(sig_spec.eigenvalues[on_support])
    cross = float(np.sum(rho_in_basis * log_sig))
    value = (neg_entropy - cross) / _LN2
    if value < -1e-9:
        logger.warning(f"Relative entropy {value:.3e} is negative beyond rounding")
    return max(value, 0.0)
