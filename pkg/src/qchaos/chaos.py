"""Chaoticity metrics: marginal distances to product laws.

Quantum profiles measure ``|Tr^(n-k) D_n - D^(x)k|`` in trace norm, classical
profiles measure the total variation between k-marginals and the product of a
limit law. Classical state spaces are finite label sets J, where weak and
l1 convergence coincide, so both profiles are decidable numbers.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import MemoryGuardError
from .operators import kron_power, partial_trace, symmetry_class, trace_norm

#: Cap on the number of weights J**n of a dense discrete measure.
MEASURE_CAP = 2**20


def check_measure_guard(j_size: int, n: int, cap: int | None = None) -> None:
    limit = MEASURE_CAP if cap is None else cap
    if j_size**n > limit:
        raise MemoryGuardError(
            f"measure on {j_size}**{n} = {j_size ** n} atoms exceeds the cap {limit}"
        )


@dataclass(eq=False)
class DiscreteMeasure:
    """Probability vector on the label set J^n, indexed big-endian.

    Entries in ``[-tol, 0)`` are clamped to zero (floating point dust);
    anything more negative, or a total mass off 1 beyond ``tol``, raises.
    """

    j_size: int
    n: int
    weights: np.ndarray
    tol: float = 1e-12

    def __post_init__(self) -> None:
        if self.j_size < 1 or self.n < 1:
            raise ValueError(f"need j_size >= 1 and n >= 1, got {self.j_size}, {self.n}")
        check_measure_guard(self.j_size, self.n)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if w.size != self.j_size**self.n:
            raise ValueError(
                f"expected {self.j_size ** self.n} weights, got {w.size}"
            )
        if w.min(initial=0.0) < -self.tol:
            raise ValueError(f"negative weight {w.min():.3e} beyond tol {self.tol:g}")
        w = np.where(w < 0.0, 0.0, w)
        if abs(w.sum() - 1.0) > self.tol:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1 within {self.tol:g}")
        self.weights = w


def point_mass(index: int, j_size: int, n: int) -> DiscreteMeasure:
    """Dirac measure at one flat label index."""
    w = np.zeros(j_size**n)
    w[index] = 1.0
    return DiscreteMeasure(j_size, n, w)


def product_measure(p: DiscreteMeasure, q: DiscreteMeasure) -> DiscreteMeasure:
    """Product of two measures over the same label set, p on the front sites."""
    if p.j_size != q.j_size:
        raise ValueError("label sets differ")
    check_measure_guard(p.j_size, p.n + q.n)
    return DiscreteMeasure(
        p.j_size, p.n + q.n, np.kron(p.weights, q.weights), max(p.tol, q.tol)
    )


def measure_power(p: DiscreteMeasure, k: int) -> DiscreteMeasure:
    """k-fold product of a measure with itself."""
    if k < 1:
        raise ValueError(f"need k >= 1, got {k}")
    check_measure_guard(p.j_size, p.n * k)
    w = p.weights
    for _ in range(k - 1):
        w = np.kron(w, p.weights)
    return DiscreteMeasure(p.j_size, p.n * k, w, p.tol)


def classical_marginal(p: DiscreteMeasure, k: int) -> DiscreteMeasure:
    """Marginal over the first k coordinates (sums out the trailing ones)."""
    if not 1 <= k <= p.n:
        raise ValueError(f"k={k} out of range 1..{p.n}")
    if k == p.n:
        return DiscreteMeasure(p.j_size, p.n, p.weights.copy(), p.tol)
    grid = p.weights.reshape((p.j_size,) * p.n)
    summed = grid.sum(axis=tuple(range(k, p.n)))
    return DiscreteMeasure(p.j_size, k, summed.reshape(-1), p.tol)


def permute_measure(p: DiscreteMeasure, images) -> DiscreteMeasure:
    """Coordinate permutation: q(j_1..j_n) = p(j_pi(1)..j_pi(n))."""
    images = tuple(int(i) for i in images)
    if sorted(images) != list(range(1, p.n + 1)):
        raise ValueError(f"{images} is not a bijection of 1..{p.n}")
    grid = p.weights.reshape((p.j_size,) * p.n)
    permuted = grid.transpose([i - 1 for i in images])
    return DiscreteMeasure(p.j_size, p.n, permuted.reshape(-1), p.tol)


def is_symmetric_measure(p: DiscreteMeasure, tol: float = 1e-12) -> bool:
    """True when the weights are exchangeable (adjacent swaps suffice)."""
    grid = p.weights.reshape((p.j_size,) * p.n)
    for i in range(p.n - 1):
        if np.abs(np.swapaxes(grid, i, i + 1) - grid).max() > tol:
            return False
    return True


def total_variation(p: DiscreteMeasure, q: DiscreteMeasure) -> float:
    """Half the l1 distance; in [0, 1]."""
    if p.j_size != q.j_size or p.n != q.n:
        raise ValueError("measures live on different label grids")
    return 0.5 * float(np.abs(p.weights - q.weights).sum())


@dataclass(eq=False)
class ChaosProfile:
    """Marginal-distance profile: (n, distance) points for one fixed k."""

    k: int
    norm: str
    points: list = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.norm not in ("trace", "tv"):
            raise ValueError(f"unknown norm tag {self.norm!r}")
        ns = [n for n, _ in self.points]
        if ns != sorted(set(ns)):
            raise ValueError("profile n values must be strictly increasing")
        if any(dist < 0 for _, dist in self.points):
            raise ValueError("profile distances must be nonnegative")

    @property
    def ns(self) -> list:
        return [n for n, _ in self.points]

    @property
    def distances(self) -> list:
        return [dist for _, dist in self.points]


def chaos_profile_quantum(family, limit_rho: np.ndarray, k: int, d: int) -> ChaosProfile:
    """Trace-norm distances of k-marginals to the k-fold power of a limit state.

    ``family`` is a list of (n, density on d**n) pairs. Non-symmetric family
    members are admitted with a warning; the profile is still computed.
    """
    limit_power = kron_power(np.asarray(limit_rho, dtype=complex), k, d)
    points = []
    for n, rho in family:
        if n < k:
            raise ValueError(f"family member n={n} smaller than marginal order k={k}")
        if symmetry_class(rho, d) == "none":
            warnings.warn(f"family member at n={n} is not permutation symmetric")
        dist = trace_norm(partial_trace(rho, k, d) - limit_power)
        points.append((n, dist))
    return ChaosProfile(k=k, norm="trace", points=points)


def chaos_profile_classical(family, limit_measure: DiscreteMeasure, k: int) -> ChaosProfile:
    """Total-variation distances of k-marginals to the product limit law."""
    if limit_measure.n != 1:
        raise ValueError("limit law must be a single-site measure")
    limit_power = measure_power(limit_measure, k)
    points = []
    for n, p in family:
        if n < k:
            raise ValueError(f"family member n={n} smaller than marginal order k={k}")
        if not is_symmetric_measure(p, tol=1e-9):
            warnings.warn(f"family member at n={n} is not exchangeable")
        points.append((n, total_variation(classical_marginal(p, k), limit_power)))
    return ChaosProfile(k=k, norm="tv", points=points)


def scaling_exponent(profile: ChaosProfile):
    """Least-squares slope of log(distance) against log(n).

    Returns None when fewer than 3 points are available or any distance is
    nonpositive (the log fit is undefined there).
    """
    if len(profile.points) < 3:
        return None
    dists = np.asarray(profile.distances, dtype=float)
    if (dists <= 0).any():
        return None
    slope = np.polyfit(np.log(np.asarray(profile.ns, float)), np.log(dists), 1)[0]
    return float(slope)


def profile_csv(profile: ChaosProfile, scenario: str, config_tag: str = "") -> str:
    """CSV body with a header comment naming k, norm and the scenario."""
    header = f"# scenario={scenario} k={profile.k} norm={profile.norm}"
    if config_tag:
        header += f" config={config_tag}"
    lines = [header, "n,distance"]
    for n, dist in profile.points:
        lines.append(f"{n},{repr(float(dist))}")
    return "\n".join(lines) + "\n"


def write_profile_csv(path, profile: ChaosProfile, scenario: str, config_tag: str = "") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(profile_csv(profile, scenario, config_tag))
