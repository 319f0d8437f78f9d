"""Normalized Gram matrices from sample matrices.

The entropy functional operates on an n x n kernel matrix rescaled to unit
trace with uniform diagonal: A_ij = (1/n) K_ij / sqrt(K_ii K_jj). Two
kernels are shipped: the RBF kernel exp(-||x_i - x_j||^2 / (2 sigma^2))
for real-valued samples and the class-indicator (delta) kernel for labels.
"""

from dataclasses import dataclass

import numpy as np

# Symmetric eigensolvers emit slightly negative eigenvalues on PSD input;
# anything below -1e-10 * n is treated as a genuinely broken matrix.
_PSD_SLACK = 1e-10


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus bandwidth rule.

    family: "rbf" or "label_delta". The delta kernel ignores the bandwidth
    fields. For "rbf", bandwidth_rule is "silverman" (sigma = h * n**(-1/(4+d)),
    d taken from the sample matrix the Gram is built from) or "fixed".
    """

    family: str = "rbf"
    bandwidth_rule: str = "silverman"
    h: float = 5.0
    sigma: float = None

    def __post_init__(self):
        if self.family not in ("rbf", "label_delta"):
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.family == "rbf":
            if self.bandwidth_rule == "silverman":
                if not self.h > 0:
                    raise ValueError("silverman rule needs h > 0")
            elif self.bandwidth_rule == "fixed":
                if self.sigma is None or not self.sigma > 0:
                    raise ValueError("fixed bandwidth needs sigma > 0")
            else:
                raise ValueError(f"unknown bandwidth rule {self.bandwidth_rule!r}")

    @classmethod
    def rbf_silverman(cls, h=5.0):
        return cls(family="rbf", bandwidth_rule="silverman", h=h)

    @classmethod
    def rbf_fixed(cls, sigma):
        return cls(family="rbf", bandwidth_rule="fixed", sigma=sigma)

    @classmethod
    def label_delta(cls):
        return cls(family="label_delta")

    def resolve_sigma(self, n, d):
        if self.bandwidth_rule == "fixed":
            return float(self.sigma)
        return silverman_sigma(n, d, self.h)


@dataclass(frozen=True)
class GramMatrix:
    """n x n symmetric kernel matrix normalized to trace 1.

    Constructor validation covers the cheap invariants (shape, symmetry,
    unit trace, uniform 1/n diagonal, nonnegative entries); positive
    semidefiniteness is checked spectrally in validate_psd.
    """

    a: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise ValueError(f"Gram matrix must be square and non-empty, got {a.shape}")
        if not np.isfinite(a).all():
            raise ValueError("Gram matrix contains non-finite entries")
        n = a.shape[0]
        if abs(a.trace() - 1.0) > 1e-12:
            raise ValueError(f"Gram matrix trace {a.trace()!r} is not 1")
        if np.abs(np.diag(a) - 1.0 / n).max() > 1e-9:
            raise ValueError("Gram matrix diagonal is not uniform 1/n")
        if not np.array_equal(a, a.T):
            if np.abs(a - a.T).max() > 1e-12:
                raise ValueError("Gram matrix is not symmetric")
            a = (a + a.T) / 2.0
        if a.min() < -1e-12:
            raise ValueError("Gram matrix has negative entries")
        a = np.ascontiguousarray(a)
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    @property
    def n(self):
        return self.a.shape[0]

    def eigenvalues(self):
        """Ascending eigenvalues of the matrix (symmetric solver)."""
        return np.linalg.eigvalsh(self.a)

    def validate_psd(self):
        """Raise if the spectrum dips below the PSD round-off allowance."""
        lo = self.eigenvalues()[0]
        if lo < -_PSD_SLACK * self.n:
            raise ValueError(f"Gram matrix is not positive semidefinite (min eig {lo})")

    def permuted(self, perm):
        """Gram matrix of the consistently row-permuted sample set: P A P^T."""
        perm = np.asarray(perm)
        return GramMatrix(self.a[np.ix_(perm, perm)])


def silverman_sigma(n, d, h):
    """Bandwidth rule sigma = h * n**(-1/(4+d)) for an n x d sample matrix."""
    if n < 1 or d < 1:
        raise ValueError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    if not h > 0:
        raise ValueError(f"need h > 0, got {h}")
    return h * float(n) ** (-1.0 / (4.0 + d))


def _rbf_kernel(samples, sigma):
    sq_norms = np.einsum("ij,ij->i", samples, samples)
    d2 = sq_norms[:, None] + sq_norms[None, :] - 2.0 * (samples @ samples.T)
    d2 = np.maximum(d2, 0.0)
    d2 = (d2 + d2.T) / 2.0
    k = np.exp(-d2 / (2.0 * sigma * sigma))
    np.fill_diagonal(k, 1.0)
    return k


def _normalize(k):
    n = k.shape[0]
    diag = np.sqrt(np.diag(k))
    a = k / (n * np.outer(diag, diag))
    a = (a + a.T) / 2.0
    np.fill_diagonal(a, 1.0 / n)
    return a


def gram(samples, kernel=None):
    """Build the normalized Gram matrix of an n x d sample matrix.

    Defaults to the RBF kernel with the Silverman rule at h=5. Dividing
    every sample and sigma by the same factor leaves the result unchanged;
    permuting rows permutes the matrix consistently.
    """
    kernel = kernel if kernel is not None else KernelSpec()
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples.reshape(-1, 1)
    if samples.ndim != 2 or samples.shape[0] == 0:
        raise ValueError(f"need a non-empty n x d sample matrix, got shape {samples.shape}")
    n, d = samples.shape
    if kernel.family == "label_delta":
        same = (samples[:, None, :] == samples[None, :, :]).all(axis=-1)
        return GramMatrix(_normalize(same.astype(np.float64)))
    sigma = kernel.resolve_sigma(n, max(d, 1))
    if not sigma > 0:
        raise ValueError(f"degenerate bandwidth sigma={sigma}")
    return GramMatrix(_normalize(_rbf_kernel(samples, sigma)))


def label_gram(labels):
    """Normalized Gram matrix of the class-indicator kernel.

    K_ij = 1 when labels match, else 0; parameter-free and positive
    definite, so it slots into the same unit-trace normalization.
    """
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.shape[0] == 0:
        raise ValueError("labels must be a non-empty 1-d vector of class ids")
    k = (labels[:, None] == labels[None, :]).astype(np.float64)
    return GramMatrix(_normalize(k))
