"""Nonlinear one-particle mean-field evolution.

The limiting single-site state obeys ``d rho / dt = -(i/hbar) [V_rho, rho]``
with the effective one-body Hamiltonian ``V_rho = Tr_2(V (I (x) rho))``;
equivalently the partial trace of the two-site commutator ``[V, rho (x)
rho]``. The flow is a time-dependent unitary conjugation, so trace and
spectrum are conserved; integration uses fixed-step RK4.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import TwoBodyPotential
from .errors import NumericalInvariantError
from .operators import check_density, density_defects, partial_trace

#: A step whose density defects exceed this signals that dt is too large.
STEP_FAILURE_TOL = 1e-6


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step RK4 settings; ``renormalize`` rescales to unit trace per step."""

    dt: float = 1e-3
    method: str = "rk4"
    renormalize: bool = False

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.method != "rk4":
            raise ValueError(f"unsupported integrator {self.method!r}")


@dataclass(eq=False)
class HartreeState:
    """Single-site density operator at elapsed time t."""

    rho: np.ndarray
    t: float


def effective_hamiltonian(v: TwoBodyPotential, rho: np.ndarray) -> np.ndarray:
    """Mean-field one-body Hamiltonian ``Tr_2(V (I (x) rho))``."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (v.d, v.d):
        raise ValueError(f"state shape {rho.shape} does not match potential d={v.d}")
    return partial_trace(v.matrix @ np.kron(np.eye(v.d, dtype=complex), rho), 1, v.d)


def hartree_rhs(v: TwoBodyPotential, rho: np.ndarray, hbar: float = 1.0) -> np.ndarray:
    """Time derivative ``-(i/hbar) [V_rho, rho]``; traceless."""
    h_eff = effective_hamiltonian(v, rho)
    return (-1j / hbar) * (h_eff @ rho - rho @ h_eff)


def hartree_rhs_direct(v: TwoBodyPotential, rho: np.ndarray, hbar: float = 1.0) -> np.ndarray:
    """Same derivative evaluated as the traced two-site commutator.

    Independent code path kept for cross-checking the commutator form.
    """
    rho = np.asarray(rho, dtype=complex)
    pair = np.kron(rho, rho)
    comm = v.matrix @ pair - pair @ v.matrix
    return (-1j / hbar) * partial_trace(comm, 1, v.d)


def _rk4_step(v: TwoBodyPotential, rho: np.ndarray, h: float, hbar: float) -> np.ndarray:
    k1 = hartree_rhs(v, rho, hbar)
    k2 = hartree_rhs(v, rho + 0.5 * h * k1, hbar)
    k3 = hartree_rhs(v, rho + 0.5 * h * k2, hbar)
    k4 = hartree_rhs(v, rho + h * k3, hbar)
    return rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_step(rho: np.ndarray, t: float) -> None:
    herm, neg, tr = density_defects(rho)
    worst = max(herm, neg, tr)
    if worst > STEP_FAILURE_TOL:
        raise NumericalInvariantError(
            f"density invariant violated at t={t:.6g} (defect {worst:.3e} > "
            f"{STEP_FAILURE_TOL:g}); reduce dt"
        )


def hartree_trajectory(
    v: TwoBodyPotential,
    rho0: np.ndarray,
    t: float,
    config: IntegratorConfig | None = None,
    hbar: float = 1.0,
) -> list[HartreeState]:
    """Integrate from 0 to t, returning the state after every accepted step.

    The step count is ``round(t / dt)`` (at least one for t > 0) and the
    actual step is ``t / steps``, so the reporting grid is hit exactly.
    Raises :class:`NumericalInvariantError` when a step drifts beyond
    :data:`STEP_FAILURE_TOL` from the density invariants.
    """
    cfg = config if config is not None else IntegratorConfig()
    if t < 0:
        raise ValueError(f"need t >= 0, got {t}")
    rho = np.array(check_density(rho0), dtype=complex)
    states = [HartreeState(rho=rho.copy(), t=0.0)]
    if t == 0:
        return states
    steps = max(1, round(t / cfg.dt))
    h = t / steps
    for step in range(1, steps + 1):
        rho = _rk4_step(v, rho, h, hbar)
        if cfg.renormalize:
            rho = rho / np.trace(rho)
        now = step * h
        _check_step(rho, now)
        states.append(HartreeState(rho=rho.copy(), t=now))
    return states


def hartree_evolve(
    v: TwoBodyPotential,
    rho0: np.ndarray,
    t: float,
    config: IntegratorConfig | None = None,
    hbar: float = 1.0,
) -> HartreeState:
    """Final state of :func:`hartree_trajectory`."""
    return hartree_trajectory(v, rho0, t, config, hbar)[-1]


def trajectory_csv(states: list[HartreeState]) -> str:
    """CSV dump: t, re/im of each entry, min eigenvalue, trace deviation."""
    if not states:
        raise ValueError("empty trajectory")
    d = states[0].rho.shape[0]
    cols = ["t"]
    for a in range(d):
        for b in range(d):
            cols += [f"re_{a}{b}", f"im_{a}{b}"]
    cols += ["min_eig", "trace_dev"]
    lines = [",".join(cols)]
    for st in states:
        sym = (st.rho + st.rho.conj().T) / 2.0
        min_eig = float(np.linalg.eigvalsh(sym)[0])
        trace_dev = float(abs(np.trace(st.rho) - 1.0))
        row = [repr(float(st.t))]
        for a in range(d):
            for b in range(d):
                row += [repr(float(st.rho[a, b].real)), repr(float(st.rho[a, b].imag))]
        row += [repr(min_eig), repr(trace_dev)]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def write_trajectory_csv(path, states: list[HartreeState]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(trajectory_csv(states))
