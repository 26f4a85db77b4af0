"""Exact closed-system evolution and per-time power-bound trajectories.

The composite evolves under H = H0 + V by unitary conjugation with
U(t) = exp(-i H t), built from one spectral decomposition of H; there is no
integrator error to disentangle from bound diagnostics. Power is always
evaluated with the interaction V alone. When H0 commutes with the embedded
battery operator the power equals d<F>/dt, and trajectories carry a central
finite-difference estimate of that derivative for cross-checking; when it
does not commute the comparison is meaningless and the records say so.
"""

import math
import re
from dataclasses import dataclass

import numpy as np

from .moments import PowerBoundReport, verify_instance
from .operators import (
    DensityMatrix,
    DimensionMismatchError,
    HermitianOperator,
    RejectedInputError,
    TensorStructure,
    density_from_literal,
    eig_decompose,
    embed_battery_op,
    expectation,
    hermitian_from_literal,
    partial_trace_to_battery,
)

COMMUTE_TOL = 1e-10


@dataclass(frozen=True)
class HamiltonianSpec:
    """Non-interacting part, interaction, and the space they act on."""

    h0: HermitianOperator
    v: HermitianOperator
    structure: TensorStructure

    def __post_init__(self):
        d = self.structure.dim
        if self.h0.dim != d or self.v.dim != d:
            raise DimensionMismatchError(
                f"Hamiltonian dims ({self.h0.dim}, {self.v.dim}) != structure dim {d}"
            )

    def total(self) -> HermitianOperator:
        return HermitianOperator(self.h0.mat + self.v.mat)


@dataclass(frozen=True)
class TrajectoryRecord:
    """State of the verification chain at one grid time."""

    t: float
    report: PowerBoundReport
    mean_f: float
    battery_purity: float
    dfdt_fd: float | None
    power_tracks_dfdt: bool

    def __post_init__(self):
        if self.battery_purity > 1.0 + 1e-9:
            raise RejectedInputError(f"battery purity {self.battery_purity!r} above 1")


def propagate(rho0: DensityMatrix, h: HamiltonianSpec, t: float) -> DensityMatrix:
    """rho(t) = U rho0 U^dag with U = exp(-i (H0 + V) t)."""
    if rho0.dim != h.structure.dim:
        raise DimensionMismatchError(f"state dim {rho0.dim} != structure dim {h.structure.dim}")
    if not math.isfinite(t):
        raise RejectedInputError(f"time must be finite, got {t!r}")
    dec = eig_decompose(h.total())
    u = dec.vectors * np.exp(-1j * dec.eigenvalues * t)
    return DensityMatrix(u @ (dec.vectors.conj().T @ rho0.mat @ dec.vectors) @ u.conj().T)


def _propagator_factory(h: HamiltonianSpec):
    dec = eig_decompose(h.total())
    vec = dec.vectors
    vec_dag = vec.conj().T

    def apply(rho0_mat: np.ndarray, t: float) -> np.ndarray:
        u = vec * np.exp(-1j * dec.eigenvalues * t)
        return u @ (vec_dag @ rho0_mat @ vec) @ u.conj().T

    return apply


def trajectory_report(
    rho0: DensityMatrix,
    h: HamiltonianSpec,
    f: HermitianOperator,
    grid,
) -> list[TrajectoryRecord]:
    """Evolve rho0 along the time grid and verify the bound chain at every point.

    The grid must be strictly increasing with at least 3 points so the interior
    finite differences exist; endpoints carry dfdt_fd = None.
    """
    times = [float(t) for t in grid]
    if len(times) < 3:
        raise RejectedInputError(f"grid needs at least 3 points, got {len(times)}")
    if any(b <= a for a, b in zip(times, times[1:])):
        raise RejectedInputError("grid times must be strictly increasing")
    s = h.structure
    if rho0.dim != s.dim:
        raise DimensionMismatchError(f"state dim {rho0.dim} != structure dim {s.dim}")

    f_emb = embed_battery_op(f, s)
    gate = np.abs(f_emb.mat @ h.h0.mat - h.h0.mat @ f_emb.mat).max() <= COMMUTE_TOL
    apply = _propagator_factory(h)

    states = [DensityMatrix(apply(rho0.mat, t)) for t in times]
    mean_f = []
    purity = []
    reports = []
    for state in states:
        rho_w = partial_trace_to_battery(state, s)
        mean_f.append(expectation(rho_w, f))
        purity.append(rho_w.purity())
        reports.append(verify_instance(state, f, h.v, s))

    records = []
    for i, t in enumerate(times):
        if 0 < i < len(times) - 1:
            fd = (mean_f[i + 1] - mean_f[i - 1]) / (times[i + 1] - times[i - 1])
        else:
            fd = None
        records.append(
            TrajectoryRecord(
                t=t,
                report=reports[i],
                mean_f=mean_f[i],
                battery_purity=purity[i],
                dfdt_fd=fd,
                power_tracks_dfdt=gate,
            )
        )
    return records


# ---------------------------------------------------------------------------
# built-in models and scenario files


def exchange_interaction(g: float, s: TensorStructure) -> HermitianOperator:
    """Excitation-swap coupling g (s+ (x) s- + s- (x) s+) between battery and system."""
    if s.d_w != 2 or s.d_s != 2:
        raise RejectedInputError("exchange model needs d_w = d_s = 2")
    sp = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|, raises toward sigma_z = +1
    sm = sp.conj().T
    core = g * (np.kron(sp, sm) + np.kron(sm, sp))
    rest = s.d_b * s.d_a
    return HermitianOperator(np.kron(core, np.eye(rest, dtype=complex)))


def ground_excited_state(s: TensorStructure) -> DensityMatrix:
    """Battery in the sigma_z ground level, system excited, bath/ancilla in level 0."""
    if s.d_w != 2 or s.d_s != 2:
        raise RejectedInputError("ground-excited state needs d_w = d_s = 2")
    ket = np.zeros(s.dim, dtype=complex)
    # basis index of |w=1, s=0, b=0, a=0> under battery-first ordering
    ket[1 * s.env_dim] = 1.0
    return DensityMatrix.from_ket(ket)


class ScenarioError(RejectedInputError):
    """Malformed scenario document; message names the offending field."""


_EXCHANGE_RE = re.compile(r"^exchange\(([^)]+)\)$")


def _scenario_fail(field: str, why: str):
    raise ScenarioError(f"field '{field}': {why}")


def parse_scenario(doc: dict) -> tuple[DensityMatrix, HamiltonianSpec, HermitianOperator, np.ndarray]:
    """Validate a scenario document and build (rho0, hamiltonian, F, time grid).

    Expected shape::

        {"structure": [dW, dS, dB, dA],
         "h0": matrix-literal | "zero",
         "v": matrix-literal | "exchange(g)",
         "f": matrix-literal,
         "rho0": matrix-literal | "ground-excited",
         "grid": {"t0": float, "t1": float, "steps": int}}
    """
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    for key in ("structure", "h0", "v", "f", "rho0", "grid"):
        if key not in doc:
            _scenario_fail(key, "missing")

    try:
        s = TensorStructure.from_dims(doc["structure"])
    except (RejectedInputError, TypeError, ValueError) as exc:
        _scenario_fail("structure", str(exc))

    h0_doc = doc["h0"]
    if h0_doc == "zero":
        h0 = HermitianOperator(np.zeros((s.dim, s.dim), dtype=complex))
    else:
        try:
            h0 = hermitian_from_literal(h0_doc)
        except RejectedInputError as exc:
            _scenario_fail("h0", str(exc))

    v_doc = doc["v"]
    if isinstance(v_doc, str):
        match = _EXCHANGE_RE.match(v_doc)
        if not match:
            _scenario_fail("v", f"unknown named model {v_doc!r}, expected 'exchange(g)'")
        try:
            g = float(match.group(1))
        except ValueError:
            _scenario_fail("v", f"coupling {match.group(1)!r} is not a number")
        try:
            v = exchange_interaction(g, s)
        except RejectedInputError as exc:
            _scenario_fail("v", str(exc))
    else:
        try:
            v = hermitian_from_literal(v_doc)
        except RejectedInputError as exc:
            _scenario_fail("v", str(exc))

    try:
        f = hermitian_from_literal(doc["f"])
    except RejectedInputError as exc:
        _scenario_fail("f", str(exc))
    if f.dim != s.d_w:
        _scenario_fail("f", f"dim {f.dim} != battery dim {s.d_w}")

    rho_doc = doc["rho0"]
    if rho_doc == "ground-excited":
        try:
            rho0 = ground_excited_state(s)
        except RejectedInputError as exc:
            _scenario_fail("rho0", str(exc))
    else:
        try:
            rho0 = density_from_literal(rho_doc)
        except RejectedInputError as exc:
            _scenario_fail("rho0", str(exc))
    if rho0.dim != s.dim:
        _scenario_fail("rho0", f"dim {rho0.dim} != total dim {s.dim}")

    grid_doc = doc["grid"]
    if not isinstance(grid_doc, dict):
        _scenario_fail("grid", "must be an object {t0, t1, steps}")
    try:
        t0 = float(grid_doc["t0"])
        t1 = float(grid_doc["t1"])
        steps = int(grid_doc["steps"])
    except (KeyError, TypeError, ValueError) as exc:
        _scenario_fail("grid", f"needs numeric t0, t1 and integer steps ({exc})")
    if not (math.isfinite(t0) and math.isfinite(t1)) or t1 <= t0:
        _scenario_fail("grid.t1", "need finite t0 < t1")
    if steps < 2:
        _scenario_fail("grid.steps", "need steps >= 2 (at least 3 grid points)")
    grid = np.linspace(t0, t1, steps + 1)

    try:
        h = HamiltonianSpec(h0=h0, v=v, structure=s)
    except DimensionMismatchError as exc:
        _scenario_fail("h0/v", str(exc))
    return rho0, h, f, grid


def builtin_exchange_scenario(g: float = 1.0, steps: int = 1000) -> dict:
    """The stock swap-coupling scenario document on a (2,2,1,1) space."""
    sigma_z = {"dim": 2, "re": [[1.0, 0.0], [0.0, -1.0]], "im": [[0.0, 0.0], [0.0, 0.0]]}
    return {
        "structure": [2, 2, 1, 1],
        "h0": "zero",
        "v": f"exchange({g})",
        "f": sigma_z,
        "rho0": "ground-excited",
        "grid": {"t0": 0.0, "t1": math.pi, "steps": steps},
    }


TRAJECTORY_COLUMNS = (
    "t",
    "power",
    "power_sq",
    "corrected_bound",
    "loose_bound",
    "slack",
    "saturation_ratio",
    "mean_F",
    "battery_purity",
    "dFdt_fd",
)


def trajectory_rows(records: list[TrajectoryRecord]):
    """Yield CSV rows matching TRAJECTORY_COLUMNS, floats at 17 significant digits."""
    for rec in records:
        r = rec.report
        values = [
            rec.t,
            r.power,
            r.power_sq,
            r.corrected_bound,
            r.loose_bound,
            r.slack,
            r.saturation_ratio,
            rec.mean_f,
            rec.battery_purity,
        ]
        row = [f"{v:.17g}" for v in values]
        row.append("" if rec.dfdt_fd is None else f"{rec.dfdt_fd:.17g}")
        yield row
