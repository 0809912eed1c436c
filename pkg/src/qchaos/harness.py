"""Configuration-driven experiment runner.

Each scenario builds a family of n-site systems, drives it with the
mean-field dynamics, and reports chaoticity profiles as CSV files plus a
JSON report. Runs are deterministic: identical config and seed reproduce
CSV bodies byte for byte (wall-clock data lives only in the JSON report).
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import chaos, hartree, measurement
from .dynamics import (
    MeanFieldSystem,
    apply_predual,
    kraus_from_spec,
    kraus_product_power,
    two_body_potential,
    unitary_to_kraus,
)
from .errors import ConfigError, MemoryGuardError, NumericalInvariantError
from .measurement import RNG_ALGORITHM
from .operators import (
    DIM_CAP,
    check_density,
    kron_power,
    operator_from_json,
    partial_trace,
    pure_state_projector,
    trace_norm,
)

SCENARIOS = (
    "spohn-convergence",
    "measurement-chain",
    "kernel-composition",
    "encode-read-roundtrip",
)

SCENARIO_SUMMARIES = {
    "spohn-convergence": "mean-field n-particle evolution vs the one-body nonlinear limit, trace-norm profile",
    "measurement-chain": "derived measurement Markov chains vs the read-out of the one-body limit, TV profile",
    "kernel-composition": "two derived kernels run separately and composed; composition keeps the trend",
    "encode-read-roundtrip": "encode a classical law, develop, read back; TV profile of the output family",
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Inputs of one experiment run; JSON round-trippable.

    ``initial_density`` doubles as the source of the classical input law:
    scenarios that need one read it out through the configured basis POVM
    (e.g. ``"diag:0.7,0.3"`` with the computational basis yields the law
    (0.7, 0.3)).
    """

    scenario: str
    d: int = 2
    n_list: tuple = (2, 4, 6, 8, 10)
    k_list: tuple = (1, 2)
    v: object = "xx+zz"
    v2: object = None
    t: float = 1.0
    t2: float | None = None
    initial_density: object = "e0"
    basis: object = "computational"
    prep: object = "projective"
    dt: float = 1e-3
    hbar: float = 1.0
    seed: int = 0
    out_dir: str | None = None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["n_list"] = list(self.n_list)
        out["k_list"] = list(self.k_list)
        return out

    @staticmethod
    def from_dict(obj: dict) -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise ConfigError(f"config must be a JSON object, got {type(obj).__name__}")
        if "scenario" not in obj:
            raise ConfigError("config is missing the 'scenario' field")
        known = set(ExperimentConfig.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        data = dict(obj)
        for key in ("n_list", "k_list"):
            if key in data:
                data[key] = tuple(data[key])
        return ExperimentConfig(**data)

    def config_hash(self) -> str:
        """Deterministic identity of everything but the output directory."""
        payload = self.to_dict()
        payload.pop("out_dir")
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(
                f"unknown scenario {self.scenario!r}; choose from {list(SCENARIOS)}"
            )
        if self.d < 1:
            raise ConfigError(f"d must be >= 1, got {self.d}")
        if not self.n_list:
            raise ConfigError("n_list must not be empty")
        if list(self.n_list) != sorted(set(int(n) for n in self.n_list)):
            raise ConfigError("n_list must be strictly increasing integers")
        if min(self.n_list) < 2:
            raise ConfigError("every n must be at least 2")
        if self.d ** max(self.n_list) > DIM_CAP:
            raise ConfigError(
                f"d**n = {self.d}**{max(self.n_list)} exceeds the dimension cap {DIM_CAP}"
            )
        if not self.k_list:
            raise ConfigError("k_list must not be empty")
        if max(self.k_list) > min(self.n_list):
            raise ConfigError("every k must be <= the smallest n")
        if min(self.k_list) < 1:
            raise ConfigError("every k must be >= 1")
        if self.dt <= 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.hbar <= 0:
            raise ConfigError(f"hbar must be positive, got {self.hbar}")
        if self.t < 0 or (self.t2 is not None and self.t2 < 0):
            raise ConfigError("evolution windows must be nonnegative")
        try:
            self._resolve_common()
        except (ValueError, MemoryGuardError) as exc:
            raise ConfigError(str(exc)) from exc

    def _resolve_common(self):
        v = two_body_potential(self.v, self.d)
        basis = measurement.basis_from_spec(self.basis, self.d)
        rho0 = density_from_spec(self.initial_density, self.d)
        if v.d != self.d or basis.d != self.d or rho0.shape[0] != self.d:
            raise ConfigError("potential, basis and initial density must share d")
        return v, basis, rho0


def density_from_spec(spec, d: int = 2) -> np.ndarray:
    """Resolve a single-site density spec.

    Accepts ``"e<j>"`` (basis projector), ``"plus"``/``"minus"`` (qubit),
    ``"mixed"`` (I/d), ``"diag:w1,...,wd"``, an operator JSON dict, or a
    matrix.
    """
    if isinstance(spec, str):
        if spec.startswith("e") and spec[1:].isdigit():
            j = int(spec[1:])
            if not 0 <= j < d:
                raise ValueError(f"basis label {j} out of range for d={d}")
            e = np.zeros(d)
            e[j] = 1.0
            return pure_state_projector(e)
        if spec in ("plus", "minus"):
            if d != 2:
                raise ValueError(f"{spec!r} is a qubit built-in (d=2)")
            sign = 1.0 if spec == "plus" else -1.0
            return pure_state_projector(np.array([1.0, sign]) / np.sqrt(2))
        if spec == "mixed":
            return np.eye(d, dtype=complex) / d
        if spec.startswith("diag:"):
            w = np.array([float(x) for x in spec[5:].split(",")])
            if w.size != d:
                raise ValueError(f"diag spec needs {d} weights, got {w.size}")
            return check_density(np.diag(w).astype(complex))
        raise ValueError(f"unknown density spec {spec!r}")
    if isinstance(spec, dict):
        mat, _ = operator_from_json(spec)
        return check_density(mat)
    return check_density(np.asarray(spec, dtype=complex))


@dataclass
class ReportRow:
    """One profile point: scenario, n, k, distance, norm, runtime, identity."""

    scenario: str
    n: int
    k: int
    distance: float
    norm: str
    runtime_ms: float
    config_hash: str


@dataclass
class RunResult:
    """Profiles keyed by tag (``k1``, ``first_k2``, ...), rows and extras."""

    config: ExperimentConfig
    profiles: dict
    rows: list
    extras: dict = field(default_factory=dict)
    files: list = field(default_factory=list)


def _log(quiet: bool, **kv) -> None:
    if quiet:
        return
    import sys

    print(" ".join(f"{k}={v}" for k, v in kv.items()), file=sys.stderr)


def _integrator(cfg: ExperimentConfig) -> hartree.IntegratorConfig:
    return hartree.IntegratorConfig(dt=cfg.dt)


def _input_law(rho0, basis) -> chaos.DiscreteMeasure:
    return measurement.read_probability(rho0, measurement.projective_povm(basis))


def _basis_mixture(law: chaos.DiscreteMeasure, basis) -> np.ndarray:
    """``sum_j p(j) P_j`` for the basis projectors."""
    return sum(
        w * pure_state_projector(basis.vectors[:, j])
        for j, w in enumerate(law.weights)
    )


def run_spohn_convergence(cfg: ExperimentConfig, quiet: bool = True) -> RunResult:
    """Evolve product states under H_n; profile marginals against the limit."""
    v, basis, rho0 = cfg._resolve_common()
    tag = cfg.config_hash()
    limit = hartree.hartree_evolve(v, rho0, cfg.t, _integrator(cfg), cfg.hbar).rho
    points = {k: [] for k in cfg.k_list}
    rows = []
    for n in cfg.n_list:
        start = time.perf_counter()
        system = MeanFieldSystem(v, n, cfg.hbar)
        rho_n = kron_power(rho0, n, cfg.d)
        evolved = apply_predual(unitary_to_kraus(system, cfg.t), rho_n)
        elapsed = (time.perf_counter() - start) * 1000.0
        for k in cfg.k_list:
            dist = trace_norm(partial_trace(evolved, k, cfg.d) - kron_power(limit, k, cfg.d))
            points[k].append((n, dist))
            rows.append(ReportRow(cfg.scenario, n, k, dist, "trace", elapsed, tag))
        _log(quiet, scenario=cfg.scenario, n=n, ms=f"{elapsed:.1f}")
    profiles = {
        f"k{k}": chaos.ChaosProfile(k=k, norm="trace", points=points[k]) for k in cfg.k_list
    }
    extras = {
        "limit_trace_dev": float(abs(np.trace(limit) - 1.0)),
        "scaling_exponent": {
            f"k{k}": chaos.scaling_exponent(profiles[f"k{k}"]) for k in cfg.k_list
        },
    }
    return RunResult(cfg, profiles, rows, extras)


def _chain_profiles(cfg, v, basis, law, t, tag, quiet, label=""):
    povm = measurement.projective_povm(basis)
    dbar = _basis_mixture(law, basis)
    limit_rho = hartree.hartree_evolve(v, dbar, t, _integrator(cfg), cfg.hbar).rho
    limit_law = measurement.read_probability(limit_rho, povm)
    points = {k: [] for k in cfg.k_list}
    rows = []
    kernels = {}
    for n in cfg.n_list:
        start = time.perf_counter()
        system = MeanFieldSystem(v, n, cfg.hbar)
        kernel = measurement.derived_kernel_n(unitary_to_kraus(system, t), basis)
        kernels[n] = kernel
        p_out = measurement.apply_kernel(chaos.measure_power(law, n), kernel)
        elapsed = (time.perf_counter() - start) * 1000.0
        for k in cfg.k_list:
            dist = chaos.total_variation(
                chaos.classical_marginal(p_out, k), chaos.measure_power(limit_law, k)
            )
            points[k].append((n, dist))
            rows.append(ReportRow(cfg.scenario, n, k, dist, "tv", elapsed, tag))
        _log(quiet, scenario=cfg.scenario, part=label or "chain", n=n, ms=f"{elapsed:.1f}")
    profiles = {
        (f"{label}_k{k}" if label else f"k{k}"): chaos.ChaosProfile(
            k=k, norm="tv", points=points[k]
        )
        for k in cfg.k_list
    }
    return profiles, rows, limit_law, kernels


def run_measurement_chain(cfg: ExperimentConfig, quiet: bool = True) -> RunResult:
    """Push a product law through the derived kernels; profile against the limit law."""
    v, basis, rho0 = cfg._resolve_common()
    tag = cfg.config_hash()
    law = _input_law(rho0, basis)
    profiles, rows, limit_law, _ = _chain_profiles(cfg, v, basis, law, cfg.t, tag, quiet)
    extras = {
        "input_law": law.weights.tolist(),
        "limit_law": limit_law.weights.tolist(),
        "scaling_exponent": {
            name: chaos.scaling_exponent(prof) for name, prof in profiles.items()
        },
    }
    return RunResult(cfg, profiles, rows, extras)


def _phi_for(cfg, spec, t, n, basis):
    """Kraus map on d**n for a composition leg: mean-field by default."""
    if spec is None or not _is_kraus_spec(spec):
        v = two_body_potential(spec if spec is not None else cfg.v, cfg.d)
        return unitary_to_kraus(MeanFieldSystem(v, n, cfg.hbar), t)
    single = kraus_from_spec(spec, cfg.d)
    return kraus_product_power(single, n, cfg.d)


def _is_kraus_spec(spec) -> bool:
    if isinstance(spec, str):
        return spec.strip().startswith("dephase(")
    return isinstance(spec, dict) and "ops" in spec


def run_kernel_composition(cfg: ExperimentConfig, quiet: bool = True) -> RunResult:
    """Profile two derived kernels separately and their chain composition."""
    v, basis, rho0 = cfg._resolve_common()
    tag = cfg.config_hash()
    law = _input_law(rho0, basis)
    t2 = cfg.t if cfg.t2 is None else cfg.t2
    second_spec = cfg.v if cfg.v2 is None else cfg.v2
    povm = measurement.projective_povm(basis)
    integ = _integrator(cfg)

    first_profiles, first_rows, q1, first_kernels = _chain_profiles(
        cfg, v, basis, law, cfg.t, tag, quiet, label="first"
    )

    second_is_kraus = _is_kraus_spec(second_spec)
    if not second_is_kraus:
        v_second = two_body_potential(second_spec, cfg.d)
        second_profiles, second_rows, _, _ = _chain_profiles(
            cfg, v_second, basis, law, t2, tag, quiet, label="second"
        )
        # Limit law after both legs: hartree-evolve the mixture of the first
        # leg's limit law under the second leg's dynamics, then read.
        dbar2 = _basis_mixture(q1, basis)
        limit2 = hartree.hartree_evolve(v_second, dbar2, t2, integ, cfg.hbar).rho
        q2 = measurement.read_probability(limit2, povm)
    else:
        # A product of single-site maps acts on product laws site by site, so
        # the composed limit is the single-site derived kernel applied to q1.
        second_profiles, second_rows = {}, []
        single = kraus_from_spec(second_spec, cfg.d)
        k_single = measurement.derived_kernel_single(single, basis)
        q2 = measurement.apply_kernel(q1, k_single)

    comp_points = {k: [] for k in cfg.k_list}
    comp_rows = []
    for n in cfg.n_list:
        start = time.perf_counter()
        first = first_kernels[n]
        second = (
            measurement.derived_kernel_n(
                _phi_for(cfg, second_spec, t2, n, basis), basis
            )
        )
        composed = measurement.compose_kernels(first, second)
        p_out = measurement.apply_kernel(chaos.measure_power(law, n), composed)
        elapsed = (time.perf_counter() - start) * 1000.0
        for k in cfg.k_list:
            dist = chaos.total_variation(
                chaos.classical_marginal(p_out, k), chaos.measure_power(q2, k)
            )
            comp_points[k].append((n, dist))
            comp_rows.append(ReportRow(cfg.scenario, n, k, dist, "tv", elapsed, tag))
        _log(quiet, scenario=cfg.scenario, part="composed", n=n, ms=f"{elapsed:.1f}")

    profiles = dict(first_profiles)
    profiles.update(second_profiles)
    for k in cfg.k_list:
        profiles[f"composed_k{k}"] = chaos.ChaosProfile(k=k, norm="tv", points=comp_points[k])
    rows = first_rows + second_rows + comp_rows
    extras = {
        "composition_order": [
            {"leg": "first", "v": cfg.v if not _is_kraus_spec(cfg.v) else None, "t": cfg.t},
            {"leg": "second", "spec": second_spec, "t": t2},
        ],
        "scaling_exponent": {
            name: chaos.scaling_exponent(prof) for name, prof in profiles.items()
        },
    }
    return RunResult(cfg, profiles, rows, extras)


def run_encode_read_roundtrip(cfg: ExperimentConfig, quiet: bool = True) -> RunResult:
    """Encode a product law, develop it, read it back, profile the output."""
    v, basis, rho0 = cfg._resolve_common()
    tag = cfg.config_hash()
    law = _input_law(rho0, basis)
    povm = measurement.projective_povm(basis)
    prep = _prep_from_spec(cfg.prep, basis)
    dbar = sum(w * prep.states[j] for j, w in enumerate(law.weights))
    limit_rho = hartree.hartree_evolve(v, dbar, cfg.t, _integrator(cfg), cfg.hbar).rho
    limit_law = measurement.read_probability(limit_rho, povm)
    points = {k: [] for k in cfg.k_list}
    rows = []
    for n in cfg.n_list:
        start = time.perf_counter()
        system = MeanFieldSystem(v, n, cfg.hbar)
        encoded = measurement.encode_discrete(chaos.measure_power(law, n), prep)
        developed = apply_predual(unitary_to_kraus(system, cfg.t), encoded)
        read_back = measurement.read_joint(developed, povm)
        elapsed = (time.perf_counter() - start) * 1000.0
        for k in cfg.k_list:
            dist = chaos.total_variation(
                chaos.classical_marginal(read_back, k), chaos.measure_power(limit_law, k)
            )
            points[k].append((n, dist))
            rows.append(ReportRow(cfg.scenario, n, k, dist, "tv", elapsed, tag))
        _log(quiet, scenario=cfg.scenario, n=n, ms=f"{elapsed:.1f}")
    profiles = {
        f"k{k}": chaos.ChaosProfile(k=k, norm="tv", points=points[k]) for k in cfg.k_list
    }
    extras = {
        "input_law": law.weights.tolist(),
        "limit_law": limit_law.weights.tolist(),
        "scaling_exponent": {
            name: chaos.scaling_exponent(prof) for name, prof in profiles.items()
        },
    }
    return RunResult(cfg, profiles, rows, extras)


def _prep_from_spec(spec, basis) -> measurement.StatePreparation:
    if isinstance(spec, measurement.StatePreparation):
        return spec
    if spec == "projective" or spec is None:
        return measurement.projective_preparation(basis)
    if isinstance(spec, dict) and "noisy" in spec:
        return measurement.noisy_preparation(basis, float(spec["noisy"]))
    raise ConfigError(f"unknown preparation spec {spec!r}")


_RUNNERS = {
    "spohn-convergence": run_spohn_convergence,
    "measurement-chain": run_measurement_chain,
    "kernel-composition": run_kernel_composition,
    "encode-read-roundtrip": run_encode_read_roundtrip,
}


def default_config(scenario: str) -> ExperimentConfig:
    """Stock configuration of a scenario (the values the test suite pins)."""
    if scenario == "spohn-convergence":
        return ExperimentConfig(scenario=scenario)
    if scenario == "measurement-chain":
        return ExperimentConfig(
            scenario=scenario,
            n_list=tuple(range(2, 11)),
            t=0.5,
            initial_density="diag:0.7,0.3",
        )
    if scenario == "kernel-composition":
        return ExperimentConfig(
            scenario=scenario,
            n_list=tuple(range(2, 11)),
            t=0.5,
            t2=0.5,
            initial_density="diag:0.7,0.3",
        )
    if scenario == "encode-read-roundtrip":
        return ExperimentConfig(
            scenario=scenario,
            n_list=tuple(range(2, 11)),
            initial_density="diag:0.7,0.3",
        )
    raise ConfigError(f"unknown scenario {scenario!r}")


def atomic_write_text(path: str, text: str) -> None:
    """Write via a temp file and rename, so readers never see partial output."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def run_experiment(cfg: ExperimentConfig, quiet: bool = True) -> RunResult:
    """Validate, dispatch to the scenario runner, and write any outputs."""
    cfg.validate()
    start = time.perf_counter()
    result = _RUNNERS[cfg.scenario](cfg, quiet=quiet)
    total_ms = (time.perf_counter() - start) * 1000.0
    if cfg.out_dir:
        tag = cfg.config_hash()
        for name, profile in sorted(result.profiles.items()):
            path = os.path.join(cfg.out_dir, f"profile_{name}.csv")
            atomic_write_text(path, chaos.profile_csv(profile, cfg.scenario, tag))
            result.files.append(path)
        report = {
            "scenario": cfg.scenario,
            "config": cfg.to_dict(),
            "config_hash": tag,
            "seed": cfg.seed,
            "rng": RNG_ALGORITHM,
            "rows": [asdict(r) for r in result.rows],
            "extras": result.extras,
            "runtime_ms": total_ms,
            "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        }
        report_path = os.path.join(cfg.out_dir, "report.json")
        atomic_write_text(report_path, json.dumps(report, indent=2, sort_keys=True) + "\n")
        result.files.append(report_path)
    return result


def load_config(path: str) -> ExperimentConfig:
    """Read and validate a JSON config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    cfg = ExperimentConfig.from_dict(obj)
    cfg.validate()
    return cfg


def with_overrides(cfg: ExperimentConfig, out_dir=None, seed=None) -> ExperimentConfig:
    changes = {}
    if out_dir is not None:
        changes["out_dir"] = out_dir
    if seed is not None:
        changes["seed"] = int(seed)
    return replace(cfg, **changes) if changes else cfg
