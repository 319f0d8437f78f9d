"""Eigenspectrum entropies over normalized Gram matrices.

All quantities are in bits (base-2 logs). The alpha-order entropy of a
unit-trace Gram matrix A is S_alpha(A) = log2(sum_i lambda_i^alpha) / (1-alpha);
joint entropy composes marginal Gram matrices by Hadamard product followed
by trace renormalization, and multivariate mutual information (MMI) between
a reference variable B and a group {A_1..A_C} follows by inclusion-exclusion:
S(B) + S(A_1..A_C) - S(A_1..A_C, B).
"""

import math
from dataclasses import dataclass

import numpy as np

from .gram import GramMatrix

# Round-off allowance for "zero" information; negative MMI beyond this is a
# real estimator artifact and gets flagged rather than clamped.
_NEG_TOL = 1e-9


class SaturationError(ArithmeticError):
    """Hadamard chain collapsed to exact zero trace; no spectrum remains."""


@dataclass(frozen=True)
class EntropyConfig:
    """alpha order plus numerical guards.

    alpha must be positive and not 1 (1.01 approximates the Shannon limit).
    Eigenvalues below eig_clamp are zeroed and the spectrum renormalized to
    sum 1 when that moves the total. saturation_epsilon is the off-diagonal
    mass threshold used by saturation_check.
    """

    alpha: float = 1.01
    eig_clamp: float = 1e-12
    saturation_epsilon: float = 1e-3

    def __post_init__(self):
        if not self.alpha > 0 or self.alpha == 1.0:
            raise ValueError(f"alpha must be > 0 and != 1, got {self.alpha}")
        if self.eig_clamp < 0 or self.saturation_epsilon < 0:
            raise ValueError("clamp and epsilon must be nonnegative")


@dataclass(frozen=True)
class EntropyValue:
    """Entropy in bits together with the sample count it was computed at."""

    bits: float
    n: int

    @property
    def max_bits(self):
        return math.log2(self.n)


@dataclass(frozen=True)
class MmiValue:
    """Mutual-information estimate in bits.

    negative_flag marks results below the round-off allowance; they are
    reported unclamped so estimator pathologies stay visible.
    """

    bits: float
    n: int
    negative_flag: bool = False


@dataclass(frozen=True)
class SaturationResult:
    saturated: bool
    off_diag_mean: float
    threshold: float


def _spectrum_entropy_bits(eigenvalues, cfg):
    lam = np.clip(eigenvalues, 0.0, 1.0)
    lam[lam < cfg.eig_clamp] = 0.0
    total = lam.sum()
    if total <= 0.0:
        raise SaturationError("spectrum vanished after clamping")
    if abs(total - 1.0) > 1e-12:
        lam = lam / total
    power_sum = float(np.power(lam[lam > 0.0], cfg.alpha).sum())
    return math.log2(power_sum) / (1.0 - cfg.alpha)


def matrix_entropy(A, cfg=None):
    """alpha-order entropy of one normalized Gram matrix, in bits.

    Always lands in [0, log2 n] once the clamped spectrum is renormalized.
    """
    cfg = cfg if cfg is not None else EntropyConfig()
    bits = _spectrum_entropy_bits(np.linalg.eigvalsh(A.a), cfg)
    return EntropyValue(bits=bits, n=A.n)


def _hadamard_accumulate(As):
    """Hadamard product with per-step trace renormalization.

    Renormalizing each step is a scalar rescale, so the result equals the
    once-at-the-end normalization of the full product but cannot underflow
    for long chains.
    """
    if not As:
        raise ValueError("need at least one Gram matrix")
    n = As[0].n
    for A in As[1:]:
        if A.n != n:
            raise ValueError(f"Gram matrices disagree on n: {A.n} vs {n}")
    m = As[0].a
    for A in As[1:]:
        m = m * A.a
        t = m.trace()
        if t <= 0.0:
            raise SaturationError("Hadamard chain trace underflowed to zero")
        m = m / t
    return GramMatrix(m)


def joint_entropy(As, cfg=None):
    """Joint entropy of C variables via their Hadamard-composed Gram matrix.

    A single-element list degenerates to matrix_entropy.
    """
    cfg = cfg if cfg is not None else EntropyConfig()
    return matrix_entropy(_hadamard_accumulate(list(As)), cfg)


def mmi(B, As, cfg=None):
    """Multivariate mutual information I(B; {A_1..A_C}) in bits.

    Tiny negative round-off (within 1e-9) is clamped to zero; anything more
    negative is returned as-is with negative_flag set.
    """
    cfg = cfg if cfg is not None else EntropyConfig()
    As = list(As)
    h_b = matrix_entropy(B, cfg).bits
    h_group = joint_entropy(As, cfg).bits
    h_all = joint_entropy(As + [B], cfg).bits
    bits = h_b + h_group - h_all
    if bits < 0.0:
        if bits >= -_NEG_TOL:
            bits = 0.0
        else:
            return MmiValue(bits=bits, n=B.n, negative_flag=True)
    return MmiValue(bits=bits, n=B.n)


def cmi(Ar, Ay, As=(), cfg=None):
    """Conditional mutual information I(R; Y | S) in bits.

    Uses the chain identity H(R,S) + H(Y,S) - H(S) - H(R,Y,S) with every
    term a Hadamard joint entropy; an empty conditioning set reduces it to
    the pairwise MI I(R; Y).
    """
    cfg = cfg if cfg is not None else EntropyConfig()
    Ar = list(Ar)
    As = list(As)
    if not Ar:
        raise ValueError("need at least one Gram matrix on the R side")
    h_rs = joint_entropy(Ar + As, cfg).bits
    h_ys = joint_entropy([Ay] + As, cfg).bits
    h_s = joint_entropy(As, cfg).bits if As else 0.0
    h_rys = joint_entropy(Ar + [Ay] + As, cfg).bits
    bits = h_rs + h_ys - h_s - h_rys
    if bits < 0.0:
        if bits >= -_NEG_TOL:
            bits = 0.0
        else:
            return MmiValue(bits=bits, n=Ay.n, negative_flag=True)
    return MmiValue(bits=bits, n=Ay.n)


def saturation_check(As, epsilon):
    """Detect Hadamard-chain saturation.

    Long chains of sub-unit entries drive the composed matrix towards
    diagonal 1/n with near-zero off-diagonal mass, flattening the spectrum.
    Saturated means the mean off-diagonal entry of the normalized product
    fell below epsilon * (1/n).
    """
    product = _hadamard_accumulate(list(As))
    n = product.n
    if n == 1:
        return SaturationResult(saturated=False, off_diag_mean=0.0, threshold=0.0)
    # Summing the full matrix and subtracting the trace would cancel the
    # off-diagonal mass to 0 exactly in the saturated regime; mask instead.
    off = np.array(product.a)
    np.fill_diagonal(off, 0.0)
    off_mean = off.sum() / (n * (n - 1))
    threshold = epsilon / n
    return SaturationResult(
        saturated=bool(off_mean < threshold),
        off_diag_mean=float(off_mean),
        threshold=float(threshold),
    )
