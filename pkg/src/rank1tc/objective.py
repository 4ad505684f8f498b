"""The biquadratic completion objective as a PSD quadratic form.

For each slice k and each pair of observed positions (i_s, j_s), (i_t, j_t)
in Omega_k, the data induces the bilinear form

    phi(a, b) = A_{i_s j_s k} * a_{i_t} b_{j_t} - A_{i_t j_t k} * a_{i_s} b_{j_s},

which vanishes on exact rank-1 data.  The objective f(a, b) = sum phi^2 is a
biquadratic form, represented here as f(a, b) = (a (x) b)^T B (a (x) b) with a
symmetric PSD matrix B of side n1*n2.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import ObservedTensor, SliceIndex


@dataclass(frozen=True)
class PhiPair:
    """One slice-k pair (s < t) of observed positions with its data values."""

    k: int
    s: int
    t: int
    coeffs: tuple[float, float]                       # (A_{i_s j_s k}, A_{i_t j_t k})
    supports: tuple[tuple[int, int], tuple[int, int]]  # ((i_s, j_s), (i_t, j_t))


@dataclass(frozen=True)
class QuadForm:
    """Symmetric PSD matrix B of side n1*n2 with f(a,b) = (a(x)b)^T B (a(x)b)."""

    n1: int
    n2: int
    B: np.ndarray

    def __post_init__(self):
        B = np.asarray(self.B, dtype=np.float64)
        if B.shape != (self.n1 * self.n2, self.n1 * self.n2):
            raise ValueError(f"B must have side n1*n2 = {self.n1 * self.n2}, got {B.shape}")
        B.flags.writeable = False
        object.__setattr__(self, "B", B)

    @property
    def side(self) -> int:
        return self.n1 * self.n2


def build_phi(slices: SliceIndex, tensor: ObservedTensor) -> list[PhiPair]:
    """Enumerate all slice-wise pairs, k ascending then (s, t) lexicographic.

    The count is sum_k C(m_k, 2).
    """
    val = tensor.value_map
    pairs: list[PhiPair] = []
    for k0, omega_k in enumerate(slices.slices):
        k = k0 + 1
        m = len(omega_k)
        for s in range(m):
            i_s, j_s = omega_k[s]
            a_s = val[(i_s, j_s, k)]
            for t in range(s + 1, m):
                i_t, j_t = omega_k[t]
                pairs.append(PhiPair(
                    k=k, s=s, t=t,
                    coeffs=(a_s, val[(i_t, j_t, k)]),
                    supports=((i_s, j_s), (i_t, j_t)),
                ))
    return pairs


def assemble_quadform(pairs: list[PhiPair], dims: tuple[int, int]) -> QuadForm:
    """Accumulate B = sum_pairs w w^T with
    w = A_{i_s j_s k} e_{i_t}(x)e_{j_t} - A_{i_t j_t k} e_{i_s}(x)e_{j_s}.

    Each w has two nonzeros, so the sum is assembled by scatter-adds.
    """
    n1, n2 = dims
    N = n1 * n2
    B = np.zeros((N, N))
    if pairs:
        p = np.empty(len(pairs), dtype=np.int64)   # position of e_{i_t}(x)e_{j_t}
        q = np.empty(len(pairs), dtype=np.int64)   # position of e_{i_s}(x)e_{j_s}
        alpha = np.empty(len(pairs))
        beta = np.empty(len(pairs))
        for m, pair in enumerate(pairs):
            (i_s, j_s), (i_t, j_t) = pair.supports
            q[m] = (i_s - 1) * n2 + (j_s - 1)
            p[m] = (i_t - 1) * n2 + (j_t - 1)
            alpha[m] = pair.coeffs[0]
            beta[m] = -pair.coeffs[1]
        np.add.at(B, (p, p), alpha * alpha)
        np.add.at(B, (q, q), beta * beta)
        np.add.at(B, (p, q), alpha * beta)
        np.add.at(B, (q, p), alpha * beta)
    return QuadForm(n1=n1, n2=n2, B=B)


def build_quadform(tensor: ObservedTensor, slices: SliceIndex | None = None) -> QuadForm:
    """Convenience: Omega slices -> Phi pairs -> quadratic form."""
    from .tensor import omega_slices
    if slices is None:
        slices = omega_slices(tensor)
    return assemble_quadform(build_phi(slices, tensor), tensor.dims[:2])


def eval_f(form: QuadForm, a: np.ndarray, b: np.ndarray) -> float:
    """Evaluate f(a, b) = (a (x) b)^T B (a (x) b)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) != form.n1 or len(b) != form.n2:
        raise ValueError(f"expected vectors of length {form.n1}, {form.n2}")
    w = np.outer(a, b).ravel()
    return float(w @ form.B @ w)


def eval_f_direct(pairs: list[PhiPair], a: np.ndarray, b: np.ndarray) -> float:
    """Evaluate f as the explicit sum of squared pair forms.

    Independent of the matrix representation; used to cross-check eval_f.
    """
    total = 0.0
    for pair in pairs:
        (i_s, j_s), (i_t, j_t) = pair.supports
        a_s, a_t = pair.coeffs
        phi = a_s * a[i_t - 1] * b[j_t - 1] - a_t * a[i_s - 1] * b[j_s - 1]
        total += phi * phi
    return total


def grad_f(form: QuadForm, a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradient of the quartic f in (a, b).

    With v = a (x) b and g = 2 B v reshaped to n1 x n2:
    grad_a = g b, grad_b = g^T a.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) != form.n1 or len(b) != form.n2:
        raise ValueError(f"expected vectors of length {form.n1}, {form.n2}")
    v = np.outer(a, b).ravel()
    g = (2.0 * (form.B @ v)).reshape(form.n1, form.n2)
    return g @ b, g.T @ a
