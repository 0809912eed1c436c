"""Dense operator algebra on tensor-power Hilbert spaces.

Everything works on plain numpy complex matrices. A system of ``n`` sites
with ``d`` levels each lives on a ``d**n`` dimensional space. Flat indices
follow the big-endian mixed-radix convention (site 1 is the most significant
digit), so the basis vector ``e_{j1} (x) ... (x) e_{jn}`` has flat index
``j1*d**(n-1) + j2*d**(n-2) + ... + jn``. With this convention a two-site
operator lifted to sites (1, 2) is a left-aligned block structure and the
partial trace over trailing sites is a contiguous block sum.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import MemoryGuardError, NumericalInvariantError

#: Default cap on the total dimension d**n of any materialized operator.
#: A 4096 x 4096 complex matrix already weighs 256 MB; pass an explicit
#: ``cap`` to the constructing functions to go beyond.
DIM_CAP = 4096


def check_dim_guard(d: int, n: int, cap: int | None = None) -> None:
    """Raise :class:`MemoryGuardError` if ``d**n`` exceeds the dimension cap."""
    limit = DIM_CAP if cap is None else cap
    if d**n > limit:
        raise MemoryGuardError(
            f"total dimension {d}**{n} = {d ** n} exceeds the cap {limit}"
        )


@dataclass(frozen=True)
class SiteSpace:
    """The n-fold tensor power of a d-level single-site space."""

    d: int
    n: int

    def __post_init__(self) -> None:
        if self.d < 1 or self.n < 1:
            raise ValueError(f"need d >= 1 and n >= 1, got d={self.d}, n={self.n}")
        check_dim_guard(self.d, self.n)

    @property
    def dim(self) -> int:
        return self.d**self.n


def num_sites(total_dim: int, d: int) -> int:
    """Return n with ``d**n == total_dim``, or raise ``ValueError``."""
    if d < 1 or total_dim < 1:
        raise ValueError(f"invalid dimensions total_dim={total_dim}, d={d}")
    if d == 1:
        if total_dim != 1:
            raise ValueError(f"{total_dim} is not a power of 1")
        return 1
    n, x = 0, 1
    while x < total_dim:
        x *= d
        n += 1
    if x != total_dim:
        raise ValueError(f"{total_dim} is not a power of the site dimension {d}")
    return max(n, 1)


def _as_square(mat: np.ndarray, what: str = "operator") -> np.ndarray:
    mat = np.asarray(mat)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{what} must be a square matrix, got shape {mat.shape}")
    return mat


def tensor(a: np.ndarray, b: np.ndarray, d: int, cap: int | None = None) -> np.ndarray:
    """Tensor (Kronecker) product of two operators over the same site dimension.

    Site 1 of ``a`` stays the most significant digit of the combined index,
    i.e. ``tensor(a, b)[(i1, i2), (j1, j2)] = a[i1, j1] * b[i2, j2]``.
    """
    a = _as_square(a, "left factor")
    b = _as_square(b, "right factor")
    na = num_sites(a.shape[0], d)
    nb = num_sites(b.shape[0], d)
    check_dim_guard(d, na + nb, cap)
    return np.kron(a, b)


def kron_power(a: np.ndarray, k: int, d: int, cap: int | None = None) -> np.ndarray:
    """k-fold tensor power ``a (x) a (x) ... (x) a``."""
    if k < 1:
        raise ValueError(f"need k >= 1, got {k}")
    a = _as_square(a)
    na = num_sites(a.shape[0], d)
    check_dim_guard(d, na * k, cap)
    out = a
    for _ in range(k - 1):
        out = np.kron(out, a)
    return out


def partial_trace(rho: np.ndarray, keep: int, d: int) -> np.ndarray:
    """Trace out the last ``n - keep`` sites of an operator on ``d**n``.

    Parameters
    ----------
    rho : complex matrix on d**n
        Operator to reduce. Does not need to be a density operator; the
        partial trace is applied linearly.
    keep : int
        Number of leading sites to keep, ``1 <= keep <= n``.
    d : int
        Single-site dimension.

    Returns
    -------
    Complex matrix on ``d**keep``; equals the sum over the computational
    basis of the traced sites. ``keep == n`` returns a copy of the input.
    """
    rho = _as_square(rho)
    n = num_sites(rho.shape[0], d)
    if not 1 <= keep <= n:
        raise ValueError(f"keep={keep} out of range 1..{n}")
    if keep == n:
        return np.array(rho)
    dk = d**keep
    dr = d ** (n - keep)
    return np.trace(rho.reshape(dk, dr, dk, dr), axis1=1, axis2=3)


def trace_norm(t: np.ndarray) -> float:
    """Sum of singular values (for Hermitian t, the sum of |eigenvalues|)."""
    t = _as_square(t)
    return float(np.linalg.svd(t, compute_uv=False).sum())


def _validated_images(images: Sequence[int]) -> np.ndarray:
    arr = np.asarray(images, dtype=int)
    n = arr.size
    if n < 1 or sorted(arr.tolist()) != list(range(1, n + 1)):
        raise ValueError(f"images {list(images)} is not a bijection of 1..{n}")
    return arr


def permutation_index_map(images: Sequence[int], d: int) -> np.ndarray:
    """Flat-index map f of the site permutation, with ``U e_x = e_{f(x)}``.

    ``images[i]`` is the 1-based image pi(i+1); the unitary sends the simple
    tensor ``x_1 (x) ... (x) x_n`` to ``x_pi(1) (x) ... (x) x_pi(n)``, so the
    basis state with digits ``(j_1 .. j_n)`` maps to digits ``(j_pi(1) ..
    j_pi(n))``.
    """
    arr = _validated_images(images)
    n = arr.size
    check_dim_guard(d, n)
    dim = d**n
    digits = np.stack(np.unravel_index(np.arange(dim), (d,) * n), axis=1)
    permuted = digits[:, arr - 1]
    return np.ravel_multi_index(tuple(permuted.T), (d,) * n)


def permutation_unitary(images: Sequence[int], d: int) -> np.ndarray:
    """The 0/1 unitary permuting tensor factors according to ``images``."""
    fmap = permutation_index_map(images, d)
    dim = fmap.size
    u = np.zeros((dim, dim))
    u[fmap, np.arange(dim)] = 1.0
    return u


def conjugate_by_permutation(mat: np.ndarray, images: Sequence[int], d: int) -> np.ndarray:
    """Return ``U* mat U`` for the permutation unitary U of ``images``.

    Computed by index relabeling, no matrix products: the result's (a, b)
    entry is ``mat[f(a), f(b)]``.
    """
    mat = _as_square(mat)
    fmap = permutation_index_map(images, d)
    if fmap.size != mat.shape[0]:
        raise ValueError("permutation length does not match operator dimension")
    return mat[np.ix_(fmap, fmap)]


def adjacent_transpositions(n: int) -> Iterator[tuple[int, ...]]:
    """Yield the images arrays of the transpositions (i, i+1), i = 1..n-1."""
    for i in range(1, n):
        images = list(range(1, n + 1))
        images[i - 1], images[i] = images[i], images[i - 1]
        yield tuple(images)


def symmetry_class(rho: np.ndarray, d: int, tol: float = 1e-10) -> str:
    """Classify a density operator under site exchange.

    Returns one of ``"fermi"``, ``"bose"``, ``"symmetric"``, ``"none"``,
    checked in that order using the adjacent transpositions (they generate
    the full permutation group):

    * symmetric: ``|U rho - rho U|_tr <= tol`` for every generator U,
    * bose: additionally ``|rho U - rho|_tr <= tol``,
    * fermi: ``|rho U + rho|_tr <= tol`` (transpositions have sign -1).

    A single site (n=1) is vacuously Bose; the exchange conditions need at
    least two sites.
    """
    rho = _as_square(rho)
    n = num_sites(rho.shape[0], d)
    if n == 1:
        return "bose"
    comm_dev = bose_dev = fermi_dev = 0.0
    for images in adjacent_transpositions(n):
        u = permutation_unitary(images, d)
        ru = rho @ u
        comm_dev = max(comm_dev, trace_norm(u @ rho - ru))
        bose_dev = max(bose_dev, trace_norm(ru - rho))
        fermi_dev = max(fermi_dev, trace_norm(ru + rho))
    if fermi_dev <= tol:
        return "fermi"
    if bose_dev <= tol:
        return "bose"
    if comm_dev <= tol:
        return "symmetric"
    return "none"


def herm_expm(h: np.ndarray, theta: float) -> np.ndarray:
    """``exp(-i * theta * h)`` for Hermitian h, via eigendecomposition."""
    h = _as_square(h, "generator")
    if np.abs(h - h.conj().T).max() > 1e-10:
        raise ValueError("generator is not Hermitian within 1e-10")
    w, q = np.linalg.eigh(h)
    return (q * np.exp(-1j * theta * w)) @ q.conj().T


def pure_state_projector(v: np.ndarray) -> np.ndarray:
    """Projector onto the span of a (nonzero) complex vector."""
    v = np.asarray(v, dtype=complex).reshape(-1)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise ValueError("cannot project onto the zero vector")
    v = v / norm
    return np.outer(v, v.conj())


def density_defects(rho: np.ndarray) -> tuple[float, float, float]:
    """(hermiticity, negativity, trace) defects of a would-be density operator.

    Negativity is ``max(0, -min eigenvalue)`` of the Hermitian part; all three
    are 0 for an exact density operator.
    """
    rho = _as_square(rho, "density")
    herm = float(np.abs(rho - rho.conj().T).max())
    sym = (rho + rho.conj().T) / 2.0
    min_eig = float(np.linalg.eigvalsh(sym)[0])
    neg = max(0.0, -min_eig)
    tr = abs(complex(np.trace(rho)) - 1.0)
    return herm, neg, float(tr)


def check_density(rho: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Validate Hermiticity, positivity and unit trace within ``tol``.

    Returns the input (as a complex ndarray) so it can be used inline.
    """
    rho = np.asarray(rho, dtype=complex)
    herm, neg, tr = density_defects(rho)
    if herm > tol or neg > tol or tr > tol:
        raise NumericalInvariantError(
            "not a valid density operator within tol="
            f"{tol:g}: hermiticity defect {herm:.3e}, negativity {neg:.3e}, "
            f"trace defect {tr:.3e}"
        )
    return rho


def operator_to_json(mat: np.ndarray, d: int) -> dict:
    """JSON-friendly dict ``{"d", "n", "re", "im"}`` with row-major entries."""
    mat = _as_square(mat)
    n = num_sites(mat.shape[0], d)
    mat = np.asarray(mat, dtype=complex)
    return {
        "d": int(d),
        "n": int(n),
        "re": mat.real.tolist(),
        "im": mat.imag.tolist(),
    }


def operator_from_json(obj: dict) -> tuple[np.ndarray, int]:
    """Inverse of :func:`operator_to_json`; returns ``(matrix, d)``."""
    try:
        d = int(obj["d"])
        n = int(obj["n"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj["im"], dtype=float)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed operator JSON: {exc}") from exc
    if re.shape != im.shape:
        raise ValueError("re and im blocks have different shapes")
    mat = _as_square(re + 1j * im)
    if mat.shape[0] != d**n:
        raise ValueError(
            f"operator JSON claims dimension {d}**{n} but has shape {mat.shape}"
        )
    return mat, d
