"""POVM read maps, encode maps, and measurement-derived Markov kernels.

The pipeline: classical laws are *encoded* as product-mixture states,
*developed* by a completely positive map, and *read* back through a POVM
applied site by site. Periodic measurement of a complete observable turns
the developed dynamics into a Markov chain on label tuples; its transition
matrix is ``K(j, j') = Tr(Q_j phi(Q_j'))`` with ``Q_j`` the product-basis
projectors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .chaos import DiscreteMeasure
from .dynamics import KrausMap, apply_heisenberg
from .errors import MemoryGuardError
from .operators import (
    check_density,
    check_dim_guard,
    num_sites,
    operator_from_json,
    pure_state_projector,
)

#: Cap on the entry count of a dense transition kernel (dim**2 real numbers).
KERNEL_ENTRY_CAP = 2**24

#: Negative kernel/measure entries beyond this are genuine CP violations,
#: anything closer to zero is clamped as floating-point dust.
NEGATIVITY_DUST = 1e-12

#: The random generator recorded in serialized outputs.
RNG_ALGORITHM = "pcg64"


@dataclass(eq=False)
class MeasurementBasis:
    """Orthonormal basis of the single-site space; columns of a unitary.

    Outcome labels are 0..d-1 in column order.
    """

    vectors: np.ndarray
    tol: float = 1e-10

    def __post_init__(self) -> None:
        v = np.asarray(self.vectors, dtype=complex)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"basis must be a square matrix, got {v.shape}")
        gram = v.conj().T @ v
        if np.abs(gram - np.eye(v.shape[0])).max() > self.tol:
            raise ValueError(f"basis columns not orthonormal within {self.tol:g}")
        self.vectors = v

    @property
    def d(self) -> int:
        return self.vectors.shape[0]


def basis_from_spec(spec, d: int = 2) -> MeasurementBasis:
    """Resolve a basis spec: ``"computational"``, ``"hadamard"``, JSON, matrix."""
    if isinstance(spec, MeasurementBasis):
        return spec
    if isinstance(spec, str):
        if spec == "computational":
            return MeasurementBasis(np.eye(d, dtype=complex))
        if spec == "hadamard":
            if d != 2:
                raise ValueError("hadamard basis is a qubit built-in (d=2)")
            return MeasurementBasis(np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2))
        raise ValueError(f"unknown basis id {spec!r}")
    if isinstance(spec, dict):
        mat, _ = operator_from_json(spec)
        return MeasurementBasis(mat)
    return MeasurementBasis(np.asarray(spec, dtype=complex))


@dataclass(eq=False)
class Povm:
    """Finite family of positive operators on the single-site space summing to I."""

    elements: list
    psd_tol: float = 1e-10
    closure_tol: float = 1e-9

    def __post_init__(self) -> None:
        if not self.elements:
            raise ValueError("a POVM needs at least one element")
        els = [np.asarray(x, dtype=complex) for x in self.elements]
        dim = els[0].shape[0]
        total = np.zeros((dim, dim), dtype=complex)
        for x in els:
            if x.shape != (dim, dim):
                raise ValueError("POVM elements must share one square shape")
            if np.abs(x - x.conj().T).max() > self.psd_tol:
                raise ValueError("POVM element is not Hermitian")
            if np.linalg.eigvalsh((x + x.conj().T) / 2)[0] < -self.psd_tol:
                raise ValueError(
                    f"POVM element has eigenvalue below -{self.psd_tol:g}"
                )
            total += x
        if np.abs(total - np.eye(dim)).max() > self.closure_tol:
            raise ValueError(f"POVM elements do not sum to I within {self.closure_tol:g}")
        self.elements = els

    @property
    def j_size(self) -> int:
        return len(self.elements)

    @property
    def d(self) -> int:
        return self.elements[0].shape[0]


@dataclass(eq=False)
class StatePreparation:
    """Density operator per label, used to encode measures as states."""

    states: list
    tol: float = 1e-9

    def __post_init__(self) -> None:
        if not self.states:
            raise ValueError("a preparation needs at least one state")
        sts = [check_density(s, self.tol) for s in self.states]
        dim = sts[0].shape[0]
        if any(s.shape != (dim, dim) for s in sts):
            raise ValueError("preparation states must share one dimension")
        self.states = sts

    @property
    def j_size(self) -> int:
        return len(self.states)

    @property
    def d(self) -> int:
        return self.states[0].shape[0]


@dataclass(eq=False)
class TransitionKernel:
    """Row-stochastic matrix on the label tuples J^n, indexed big-endian."""

    j_size: int
    n: int
    matrix: np.ndarray
    row_tol: float = 1e-9

    def __post_init__(self) -> None:
        dim = self.j_size**self.n
        if dim * dim > KERNEL_ENTRY_CAP:
            raise MemoryGuardError(
                f"kernel of {dim}x{dim} entries exceeds the cap {KERNEL_ENTRY_CAP}"
            )
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (dim, dim):
            raise ValueError(f"expected a {dim}x{dim} matrix, got {m.shape}")
        if m.min(initial=0.0) < -NEGATIVITY_DUST:
            raise ValueError(
                f"kernel entry {m.min():.3e} below the dust threshold "
                f"-{NEGATIVITY_DUST:g}"
            )
        m = np.where(m < 0.0, 0.0, m)
        rows = m.sum(axis=1)
        if np.abs(rows - 1.0).max() > self.row_tol:
            raise ValueError(
                f"rows sum to 1 within {np.abs(rows - 1.0).max():.3e} > {self.row_tol:g}"
            )
        self.matrix = m


def projective_povm(basis: MeasurementBasis) -> Povm:
    """Rank-one projectors onto the basis columns; a resolution of identity."""
    return Povm([pure_state_projector(basis.vectors[:, j]) for j in range(basis.d)])


def projective_preparation(basis: MeasurementBasis) -> StatePreparation:
    """Prepare the pure basis state for each label."""
    return StatePreparation([pure_state_projector(basis.vectors[:, j]) for j in range(basis.d)])


def noisy_preparation(basis: MeasurementBasis, eps: float) -> StatePreparation:
    """Basis projectors mixed with the maximally mixed state by weight eps."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"mixing weight must lie in [0, 1], got {eps}")
    d = basis.d
    mixed = np.eye(d, dtype=complex) / d
    return StatePreparation(
        [(1.0 - eps) * pure_state_projector(basis.vectors[:, j]) + eps * mixed for j in range(d)]
    )


def _product_traces(op: np.ndarray, mats: list, d: int) -> np.ndarray:
    """All values Tr(op (M_{j1} (x) ... (x) M_{jn})), flat over big-endian j.

    Contracts one site at a time, so the cost stays polynomial in the number
    of sites instead of enumerating J**n tensor products.
    """
    n = num_sites(op.shape[0], d)
    t = op.reshape((d,) * (2 * n))
    order = [ax for i in range(n) for ax in (i, n + i)]
    c = t.transpose(order).reshape((d * d,) * n)
    stacked = np.stack([np.asarray(m, dtype=complex).T.reshape(-1) for m in mats])
    for _ in range(n):
        c = np.tensordot(c, stacked, axes=([0], [1]))
    return c.reshape(-1)


def _product_mixture(weights: np.ndarray, mats: list, d: int, n: int) -> np.ndarray:
    """``sum_j w[j] M_{j1} (x) ... (x) M_{jn}`` via per-site contraction."""
    j_size = len(mats)
    check_dim_guard(d, n)
    c = np.asarray(weights, dtype=complex).reshape((j_size,) * n)
    stacked = np.stack([np.asarray(m, dtype=complex).reshape(-1) for m in mats])
    for _ in range(n):
        c = np.tensordot(c, stacked, axes=([0], [0]))
    t = c.reshape((d, d) * n)
    order = [2 * i for i in range(n)] + [2 * i + 1 for i in range(n)]
    return t.transpose(order).reshape(d**n, d**n)


def read_probability(rho: np.ndarray, povm: Povm) -> DiscreteMeasure:
    """Outcome law of one measurement: ``w_j = Tr(rho X_j)``."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (povm.d, povm.d):
        raise ValueError(f"state shape {rho.shape} does not match POVM on d={povm.d}")
    w = np.array([np.trace(rho @ x).real for x in povm.elements])
    return DiscreteMeasure(povm.j_size, 1, w, tol=1e-9)


def read_joint(rho: np.ndarray, povm: Povm) -> DiscreteMeasure:
    """Joint outcome law of measuring every site: ``Tr(rho X_{j1} (x) ... (x) X_{jn})``."""
    rho = np.asarray(rho, dtype=complex)
    d = povm.d
    n = num_sites(rho.shape[0], d)
    w = _product_traces(rho, povm.elements, d).real
    return DiscreteMeasure(povm.j_size, n, w, tol=1e-9)


def encode_discrete(p: DiscreteMeasure, prep: StatePreparation) -> np.ndarray:
    """Mixture of product states weighted by a classical law on J^n."""
    if p.j_size != prep.j_size:
        raise ValueError(
            f"measure labels J={p.j_size} do not match preparation J={prep.j_size}"
        )
    return _product_mixture(p.weights, prep.states, prep.d, p.n)


def encode_weighted_samples(states: list, joint_weights: DiscreteMeasure) -> np.ndarray:
    """Finite-grid discretization of an integral of product states.

    ``states[m]`` is the density attached to the m-th grid point and
    ``joint_weights`` a probability measure on grid tuples; the result is
    ``sum_w w(m_1..m_n) D(m_1) (x) ... (x) D(m_n)``. With the label set
    itself as the grid this is exactly :func:`encode_discrete`.
    """
    return encode_discrete(joint_weights, StatePreparation(list(states)))


def _product_basis(basis: MeasurementBasis, n: int) -> np.ndarray:
    check_dim_guard(basis.d, n)
    b = basis.vectors
    for _ in range(n - 1):
        b = np.kron(b, basis.vectors)
    return b


def _kernel_from_rank_one(phi: KrausMap, basis: MeasurementBasis, n: int) -> np.ndarray:
    # K(j, j') = sum_k |<b_j'| A_k |b_j>|^2 for product-basis vectors b.
    b = _product_basis(basis, n)
    dim = b.shape[0]
    k = np.zeros((dim, dim))
    for a in phi.ops:
        m = b.conj().T @ a @ b
        k += (np.abs(m) ** 2).T
    return k


def derived_kernel_single(phi: KrausMap, basis: MeasurementBasis) -> TransitionKernel:
    """Markov transition of periodically measuring one complete observable.

    ``K(j, j') = Tr(P_j phi(P_j'))`` with P the basis projectors; rows are
    stochastic because phi is unital.
    """
    if phi.dim != basis.d:
        raise ValueError(f"map on {phi.dim} does not match basis on d={basis.d}")
    return TransitionKernel(basis.d, 1, _kernel_from_rank_one(phi, basis, 1))


def derived_kernel_n(phi: KrausMap, basis: MeasurementBasis) -> TransitionKernel:
    """Transition matrix on label tuples from measuring every site at once.

    ``K(j, j') = Tr(Q_j phi(Q_j'))`` with ``Q_j`` the projectors onto product
    basis vectors. Permutation-equivariant whenever phi commutes with site
    permutations.
    """
    n = num_sites(phi.dim, basis.d)
    return TransitionKernel(basis.d, n, _kernel_from_rank_one(phi, basis, n))


def derived_kernel_n_predual(phi: KrausMap, basis: MeasurementBasis) -> TransitionKernel:
    """State-picture evaluation ``K(j, j') = Tr(phi_*(Q_j) Q_j')``.

    Numerically identical to :func:`derived_kernel_n` by the duality of the
    two pictures; kept as an independent code path for cross-checks. Cost
    grows with the full kernel dimension, so use it at small n.
    """
    from .dynamics import apply_predual

    d = basis.d
    n = num_sites(phi.dim, d)
    b = _product_basis(basis, n)
    dim = b.shape[0]
    k = np.zeros((dim, dim))
    for row in range(dim):
        evolved = apply_predual(phi, pure_state_projector(b[:, row]))
        k[row] = _product_traces(
            evolved, [pure_state_projector(basis.vectors[:, j]) for j in range(d)], d
        ).real
    return TransitionKernel(d, n, k)


def general_kernel(prep: StatePreparation, povm: Povm, phi: KrausMap) -> TransitionKernel:
    """Encode/develop/read transition matrix for arbitrary preparations and POVMs.

    ``K(j, j') = Tr[(D(j_1) (x) ... (x) D(j_n)) phi(X(j'_1) (x) ... (x)
    X(j'_n))]``. Reduces to :func:`derived_kernel_n` when preparation and
    POVM are the same rank-one basis projectors. One Heisenberg application
    per column; intended for moderate n.
    """
    if prep.j_size != povm.j_size:
        raise ValueError("preparation and POVM label sets differ")
    if prep.d != povm.d:
        raise ValueError("preparation and POVM dimensions differ")
    d = prep.d
    n = num_sites(phi.dim, d)
    j_size = povm.j_size
    dim = j_size**n
    if dim * dim > KERNEL_ENTRY_CAP:
        raise MemoryGuardError(f"kernel of {dim}x{dim} entries exceeds the cap")
    k = np.zeros((dim, dim))
    for col in range(dim):
        w = np.zeros(dim)
        w[col] = 1.0
        x_joint = _product_mixture(w, povm.elements, d, n)
        developed = apply_heisenberg(phi, x_joint)
        k[:, col] = _product_traces(developed, prep.states, d).real
    return TransitionKernel(j_size, n, k)


def apply_kernel(p: DiscreteMeasure, kernel: TransitionKernel) -> DiscreteMeasure:
    """One Markov step: the image law ``p' = p K``."""
    if p.j_size != kernel.j_size or p.n != kernel.n:
        raise ValueError("measure and kernel live on different label grids")
    return DiscreteMeasure(p.j_size, p.n, p.weights @ kernel.matrix, tol=1e-9)


def compose_kernels(k: TransitionKernel, m: TransitionKernel) -> TransitionKernel:
    """Chain composition: apply k first, then m."""
    if k.j_size != m.j_size or k.n != m.n:
        raise ValueError("kernels live on different label grids")
    return TransitionKernel(k.j_size, k.n, k.matrix @ m.matrix)


def permutation_equivariance_defect(kernel: TransitionKernel) -> float:
    """Max |K(pi j, pi j') - K(j, j')| over adjacent coordinate transpositions."""
    j, n = kernel.j_size, kernel.n
    if n == 1:
        return 0.0
    worst = 0.0
    digits = np.stack(np.unravel_index(np.arange(j**n), (j,) * n), axis=1)
    for i in range(n - 1):
        perm = digits.copy()
        perm[:, [i, i + 1]] = perm[:, [i + 1, i]]
        fmap = np.ravel_multi_index(tuple(perm.T), (j,) * n)
        permuted = kernel.matrix[np.ix_(fmap, fmap)]
        worst = max(worst, float(np.abs(permuted - kernel.matrix).max()))
    return worst


def sample_chain(kernel: TransitionKernel, start: int, steps: int, seed: int) -> np.ndarray:
    """Sample a path of the chain by inverse CDF over cumulative row sums.

    Deterministic for a fixed seed (numpy PCG64). Returns ``steps + 1``
    indices starting at ``start``.
    """
    dim = kernel.matrix.shape[0]
    if not 0 <= start < dim:
        raise ValueError(f"start index {start} out of range 0..{dim - 1}")
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    cumulative = np.cumsum(kernel.matrix, axis=1)
    rng = np.random.default_rng(seed)
    path = np.empty(steps + 1, dtype=np.int64)
    path[0] = start
    here = start
    for step in range(1, steps + 1):
        here = int(np.searchsorted(cumulative[here], rng.random(), side="right"))
        here = min(here, dim - 1)
        path[step] = here
    return path


def kernel_csv(kernel: TransitionKernel) -> str:
    """Dense CSV rows of the kernel matrix."""
    lines = [",".join(repr(float(x)) for x in row) for row in kernel.matrix]
    return "\n".join(lines) + "\n"


def write_kernel_csv(path, kernel: TransitionKernel, meta: dict | None = None) -> None:
    """Write the kernel CSV plus a JSON sidecar naming its provenance.

    The sidecar (``<path>.json``) records j_size, n and any caller-supplied
    metadata (basis, map spec, T, d, seed); the RNG algorithm name rides
    along for reproducibility bookkeeping.
    """
    path = str(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(kernel_csv(kernel))
    sidecar = {"j_size": kernel.j_size, "n": kernel.n, "rng": RNG_ALGORITHM}
    sidecar.update(meta or {})
    with open(path + ".json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def measure_csv(p: DiscreteMeasure) -> str:
    """Weight-vector CSV with a shape comment."""
    lines = [f"# j_size={p.j_size} n={p.n}", "weight"]
    lines += [repr(float(w)) for w in p.weights]
    return "\n".join(lines) + "\n"


def write_measure_csv(path, p: DiscreteMeasure) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(measure_csv(p))
