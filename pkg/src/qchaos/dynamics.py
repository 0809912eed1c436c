"""Mean-field pair Hamiltonians, unitary propagation, and Kraus channels.

The n-particle Hamiltonian is the pair sum ``H_n = (1/n) sum_{i<j} V_ij``
with a single swap-symmetric two-body potential V lifted to every site pair.
General completely positive unital maps are carried in Kraus form; a map at
a fixed time stands in for the dynamical semigroup evaluated there.
"""

from __future__ import annotations

import re as _re
from dataclasses import dataclass, field
from itertools import product as _iterproduct

import numpy as np

from .errors import MemoryGuardError
from .operators import (
    adjacent_transpositions,
    check_dim_guard,
    conjugate_by_permutation,
    herm_expm,
    num_sites,
    operator_from_json,
    operator_to_json,
    permutation_unitary,
    trace_norm,
)

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)

# Seed of the fixed probe set used by the permutation-covariance check.
_PROBE_SEED = 0x5EED


@dataclass(eq=False)
class TwoBodyPotential:
    """Swap-symmetric Hermitian operator on the two-site space ``d**2``.

    Validates Hermiticity and invariance under the site swap within ``tol``
    at construction; ``op_norm`` (the spectral norm) is kept for reporting.
    """

    matrix: np.ndarray
    tol: float = 1e-10
    d: int = field(init=False)
    op_norm: float = field(init=False)

    def __post_init__(self) -> None:
        mat = np.asarray(self.matrix, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"potential must be square, got shape {mat.shape}")
        d = round(mat.shape[0] ** 0.5)
        if d * d != mat.shape[0]:
            raise ValueError(f"dimension {mat.shape[0]} is not a perfect square")
        if np.abs(mat - mat.conj().T).max() > self.tol:
            raise ValueError(f"potential is not Hermitian within {self.tol:g}")
        swapped = conjugate_by_permutation(mat, (2, 1), d)
        if np.abs(swapped - mat).max() > self.tol:
            raise ValueError(f"potential is not swap-symmetric within {self.tol:g}")
        self.matrix = mat
        self.d = d
        self.op_norm = float(np.abs(np.linalg.eigvalsh(mat)).max())


def _builtin_potential(name: str, d: int) -> np.ndarray:
    if name == "swap":
        return permutation_unitary((2, 1), d).astype(complex)
    if name == "zero":
        return np.zeros((d * d, d * d), dtype=complex)
    qubit = {
        "zz": lambda: np.kron(SIGMA_Z, SIGMA_Z),
        "xx+zz": lambda: (np.kron(SIGMA_X, SIGMA_X) + np.kron(SIGMA_Z, SIGMA_Z)) / 2.0,
        "xz+zx": lambda: np.kron(SIGMA_X, SIGMA_Z) + np.kron(SIGMA_Z, SIGMA_X),
    }
    if name in qubit:
        if d != 2:
            raise ValueError(f"built-in potential {name!r} requires d=2, got d={d}")
        return qubit[name]()
    raise ValueError(f"unknown potential id {name!r}")


def two_body_potential(spec, d: int = 2) -> TwoBodyPotential:
    """Resolve a potential spec: built-in id, operator JSON dict, or matrix.

    Built-in ids: ``"zz"``, ``"xx+zz"``, ``"xz+zx"`` (qubit pairs), ``"swap"``
    and ``"zero"`` (any d).
    """
    if isinstance(spec, TwoBodyPotential):
        return spec
    if isinstance(spec, str):
        return TwoBodyPotential(_builtin_potential(spec, d))
    if isinstance(spec, dict):
        mat, d_json = operator_from_json(spec)
        if num_sites(mat.shape[0], d_json) != 2:
            raise ValueError("potential JSON must describe a two-site operator")
        return TwoBodyPotential(mat)
    return TwoBodyPotential(np.asarray(spec, dtype=complex))


@dataclass(eq=False)
class MeanFieldSystem:
    """n sites coupled pairwise by one potential with coupling constant 1/n."""

    potential: TwoBodyPotential
    n: int
    hbar: float = 1.0

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError(f"a mean-field system needs n >= 2 sites, got {self.n}")
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")
        check_dim_guard(self.potential.d, self.n)

    @property
    def dim(self) -> int:
        return self.potential.d**self.n


def _pair_fronting_images(i: int, j: int, n: int) -> tuple[int, ...]:
    """Images of a permutation with pi(1) = i and pi(2) = j."""

    def transpose_map(a: int, b: int) -> list[int]:
        arr = list(range(1, n + 1))
        arr[a - 1], arr[b - 1] = arr[b - 1], arr[a - 1]
        return arr

    t_1i = transpose_map(1, i)
    t_2j = transpose_map(2, j)
    return tuple(t_1i[t_2j[k] - 1] for k in range(n))


def lift_pair_potential(
    v: TwoBodyPotential, i: int, j: int, n: int, cap: int | None = None
) -> np.ndarray:
    """The potential acting on sites (i, j) of an n-site space.

    Equals ``U* (V (x) I^(n-2)) U`` for a permutation unitary that fronts the
    pair, realized by index relabeling.
    """
    if not 1 <= i < j <= n:
        raise ValueError(f"need 1 <= i < j <= n, got (i, j, n) = ({i}, {j}, {n})")
    check_dim_guard(v.d, n, cap)
    base = np.kron(v.matrix, np.eye(v.d ** (n - 2), dtype=complex))
    return conjugate_by_permutation(base, _pair_fronting_images(i, j, n), v.d)


def mean_field_hamiltonian(system: MeanFieldSystem, cap: int | None = None) -> np.ndarray:
    """``(1/n) sum_{i<j} V_ij``; Hermitian and permutation covariant."""
    n = system.n
    h = np.zeros((system.dim, system.dim), dtype=complex)
    for i in range(1, n):
        for j in range(i + 1, n + 1):
            h += lift_pair_potential(system.potential, i, j, n, cap)
    return h / n


def evolve_state(rho: np.ndarray, system: MeanFieldSystem, t: float) -> np.ndarray:
    """Conjugate a state by ``exp(-i H_n t / hbar)``."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (system.dim, system.dim):
        raise ValueError(
            f"state has shape {rho.shape}, expected {(system.dim, system.dim)}"
        )
    u = herm_expm(mean_field_hamiltonian(system), t / system.hbar)
    return u @ rho @ u.conj().T


@dataclass(eq=False)
class KrausMap:
    """Finite Kraus form of a completely positive unital map.

    Heisenberg direction: ``phi(B) = sum_k A_k* B A_k``. Unitality
    (``sum_k A_k* A_k = I`` within ``tol``) makes the predual trace
    preserving.
    """

    ops: list
    tol: float = 1e-9

    def __post_init__(self) -> None:
        if not self.ops:
            raise ValueError("a Kraus map needs at least one operator")
        ops = [np.asarray(a, dtype=complex) for a in self.ops]
        dim = ops[0].shape[0]
        for a in ops:
            if a.shape != (dim, dim):
                raise ValueError("Kraus operators must share one square shape")
        total = sum(a.conj().T @ a for a in ops)
        if np.abs(total - np.eye(dim)).max() > self.tol:
            raise ValueError(f"Kraus map is not unital within {self.tol:g}")
        self.ops = ops

    @property
    def dim(self) -> int:
        return self.ops[0].shape[0]


def apply_heisenberg(phi: KrausMap, b: np.ndarray) -> np.ndarray:
    """``sum_k A_k* B A_k`` (observable picture)."""
    b = np.asarray(b, dtype=complex)
    if b.shape != (phi.dim, phi.dim):
        raise ValueError(f"operand shape {b.shape} does not match map on {phi.dim}")
    return sum(a.conj().T @ b @ a for a in phi.ops)


def apply_predual(phi: KrausMap, rho: np.ndarray) -> np.ndarray:
    """``sum_k A_k rho A_k*`` (state picture); trace preserving by unitality."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (phi.dim, phi.dim):
        raise ValueError(f"state shape {rho.shape} does not match map on {phi.dim}")
    return sum(a @ rho @ a.conj().T for a in phi.ops)


def hamiltonian_kraus(h: np.ndarray, t: float, hbar: float = 1.0) -> KrausMap:
    """Single-element Kraus map of the unitary generated by a Hamiltonian."""
    return KrausMap([herm_expm(h, t / hbar)])


def unitary_to_kraus(system: MeanFieldSystem, t: float) -> KrausMap:
    """Kraus form of the mean-field evolution over a window of length t."""
    return hamiltonian_kraus(mean_field_hamiltonian(system), t, system.hbar)


def dephasing_map(p: float) -> KrausMap:
    """Qubit dephasing: apply sigma_z with probability p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"dephasing strength must lie in [0, 1], got {p}")
    return KrausMap([np.sqrt(1.0 - p) * np.eye(2, dtype=complex), np.sqrt(p) * SIGMA_Z])


def kraus_from_spec(spec, d: int = 2) -> KrausMap:
    """Resolve a Kraus spec: ``"dephase(p)"``, ``{"ops": [...]}``, or op list."""
    if isinstance(spec, KrausMap):
        return spec
    if isinstance(spec, str):
        m = _re.fullmatch(r"dephase\(([^)]+)\)", spec.strip())
        if m:
            if d != 2:
                raise ValueError("dephase(p) is a qubit built-in (d=2)")
            return dephasing_map(float(m.group(1)))
        raise ValueError(f"unknown Kraus map id {spec!r}")
    if isinstance(spec, dict):
        ops = [operator_from_json(o)[0] for o in spec["ops"]]
        return KrausMap(ops)
    return KrausMap([np.asarray(a, dtype=complex) for a in spec])


def kraus_to_json(phi: KrausMap, d: int) -> dict:
    """Serialize a Kraus map as a list of operator JSON objects."""
    return {"ops": [operator_to_json(a, d) for a in phi.ops]}


def kraus_product_power(phi: KrausMap, n: int, d: int, max_ops: int = 4096) -> KrausMap:
    """n-fold tensor product of a map with itself, as a Kraus map.

    The operator count grows as ``len(ops)**n``; guarded by ``max_ops``.
    """
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    count = len(phi.ops) ** n
    if count > max_ops:
        raise MemoryGuardError(
            f"product map needs {count} Kraus operators, cap is {max_ops}"
        )
    n_single = num_sites(phi.dim, d)
    check_dim_guard(d, n_single * n)
    ops = []
    for combo in _iterproduct(phi.ops, repeat=n):
        op = combo[0]
        for a in combo[1:]:
            op = np.kron(op, a)
        ops.append(op)
    return KrausMap(ops)


def _hermitian_probes(dim: int, count: int) -> list:
    rng = np.random.default_rng(_PROBE_SEED)
    probes = []
    for _ in range(count):
        g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        a = (g + g.conj().T) / 2.0
        probes.append(a / np.abs(np.linalg.eigvalsh(a)).max())
    return probes


def check_permutation_covariance(
    obj, d: int, tol: float = 1e-10, n_probes: int = 6
) -> tuple[bool, float]:
    """Check commutation with site permutations; returns (ok, max deviation).

    For a Kraus map the test is ``phi(U* A U) = U* phi(A) U`` over the
    adjacent transpositions and a fixed pseudorandom Hermitian probe set; for
    a Hamiltonian (plain matrix) it is ``|U H - H U|_tr <= tol``. Adjacent
    transpositions generate all permutations, so they suffice.
    """
    worst = 0.0
    if isinstance(obj, KrausMap):
        n = num_sites(obj.dim, d)
        if n == 1:
            return True, 0.0
        probes = _hermitian_probes(obj.dim, n_probes)
        for images in adjacent_transpositions(n):
            u = permutation_unitary(images, d)
            for a in probes:
                lhs = apply_heisenberg(obj, u.T @ a @ u)
                rhs = u.T @ apply_heisenberg(obj, a) @ u
                worst = max(worst, trace_norm(lhs - rhs))
    else:
        h = np.asarray(obj, dtype=complex)
        n = num_sites(h.shape[0], d)
        if n == 1:
            return True, 0.0
        for images in adjacent_transpositions(n):
            u = permutation_unitary(images, d)
            worst = max(worst, trace_norm(u @ h - h @ u))
    return worst <= tol, worst
