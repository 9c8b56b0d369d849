"""Lambda sweep, the linear Grammian check, and result writers."""

from __future__ import annotations

import csv
import io
import json
import math
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import Scenario, contraction_estimate, fixed_point_solve, load_scenario, terminal_error
from .errors import NonConvergenceError
from .grammian import ControlOperator, ControlSystem, control_law, lemma26_decay

CSV_COLUMNS = ("lambda", "terminal_error", "picard_iterations", "contraction_K",
               "mu1_energy", "mu2_norm", "converged", "error")


def fmt(x: float) -> str:
    """17 significant digits, fixed so repeated runs are byte-identical."""
    return format(float(x), ".17g")


@dataclass
class SweepRow:
    lam: float
    terminal_error: float
    picard_iterations: int
    contraction_K: float
    mu1_energy: float
    mu2_norm: float
    converged: bool
    error: str = ""

    def cells(self) -> list[str]:
        return [fmt(self.lam), fmt(self.terminal_error), str(self.picard_iterations), fmt(self.contraction_K),
                fmt(self.mu1_energy), fmt(self.mu2_norm), "1" if self.converged else "0", self.error]


@dataclass
class SweepResult:
    scenario: Scenario
    rows: list[SweepRow] = field(default_factory=list)

    @property
    def all_converged(self) -> bool:
        return all(r.converged for r in self.rows)

    @property
    def errors(self) -> np.ndarray:
        return np.array([r.terminal_error for r in self.rows])

    @property
    def monotone(self) -> bool:
        e = self.errors
        return bool(np.all(np.diff(e) < 0))

    @property
    def ratio(self) -> float:
        e = self.errors
        return float(e[-1] / e[0]) if e[0] > 0 else 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow(r.cells())
        return buf.getvalue()


def _solve_row(scen: Scenario, lam: float, k: float) -> SweepRow:
    try:
        traj, controls, diag = fixed_point_solve(scen, lam)
    except NonConvergenceError as exc:
        d = exc.diagnostics
        return SweepRow(lam, math.nan, d.iterations if d else 0, k, math.nan, math.nan, False, str(exc))
    return SweepRow(lam, terminal_error(traj, scen), diag.iterations, k,
                    controls.mu1_energy(scen.grid), float(np.linalg.norm(controls.mu2)), True)


def run_lambda_sweep(scen: Scenario | str | Path, out: str | Path | None = None, workers: int = 1) -> SweepResult:
    """Solve the fixed-point problem for every lambda in the scenario.

    Non-convergence is recorded in its row and does not stop the sweep. With
    ``out`` set, writes the CSV plus ``<out>.meta.json`` and ``<out stem>.gp``.
    """
    if not isinstance(scen, Scenario):
        scen = load_scenario(scen)
    k, _ = contraction_estimate(scen)
    scen.system.gamma  # build shared tables before any threads start
    t0 = time.perf_counter()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(lambda lam: _solve_row(scen, lam, k), scen.lambdas))
    else:
        rows = [_solve_row(scen, lam, k) for lam in scen.lambdas]
    rows.sort(key=lambda r: -r.lam)
    result = SweepResult(scen, rows)
    if out is not None:
        write_sweep(result, out, elapsed=time.perf_counter() - t0)
    return result


def write_sweep(result: SweepResult, out, elapsed: float | None = None) -> None:
    out = Path(out)
    out.write_text(result.to_csv())
    meta = {
        "package_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "created_unix": time.time(),
        "elapsed_seconds": elapsed,
        "columns": list(CSV_COLUMNS),
        "all_converged": result.all_converged,
        "terminal_error_monotone": result.monotone,
        "final_over_initial": result.ratio,
        "scenario": result.scenario.to_dict(),
    }
    Path(str(out) + ".meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    out.with_suffix(".gp").write_text(
        "set datafile separator ','\n"
        "set logscale xy\n"
        "set xlabel 'lambda'\n"
        "set ylabel 'terminal error'\n"
        "set key off\n"
        f"plot '{out.name}' every ::1 using 1:2 with linespoints\n"
    )


# ---------------------------------------------------------------------------
# linear check
# ---------------------------------------------------------------------------


@dataclass
class Check:
    name: str
    passed: bool
    detail: str


@dataclass
class LinearReport:
    checks: list[Check]
    decay_ratios: dict
    b_rank: int
    n_modes: int

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "b_rank": self.b_rank, "n_modes": self.n_modes,
                "decay_ratios": self.decay_ratios, "checks": [asdict(c) for c in self.checks]}


def eigenmode_error(gamma: np.ndarray, p_vec: np.ndarray, lam: float) -> float:
    """sqrt(sum_n (lam/(lam+gamma_n))^2 P_n^2) in the Grammian eigenbasis."""
    ev, q = np.linalg.eigh(gamma)
    return float(np.sqrt(np.sum((lam / (lam + np.clip(ev, 0, None))) ** 2 * (q.T @ p_vec) ** 2)))


def run_linear_check(scen: Scenario | str | Path) -> LinearReport:
    """Grammian decay, rank of B and the closed-form linear steering error.

    The nonlinear terms (g, h) are switched off; the forcing and the target
    come from the scenario.
    """
    from .dynamics import free_evolution, mild_solution, selection_path, terminal_functional

    if not isinstance(scen, Scenario):
        scen = load_scenario(scen)
    scen = scen.with_(g_scale=0.0, h_spec=())
    sys = scen.system
    lams = list(scen.lambdas)
    basis = np.eye(scen.n_modes)
    checks, ratios = [], {}
    for name, g in (("gamma1", sys.gamma1), ("gamma2", sys.gamma2), ("joint", sys.gamma)):
        rep = lemma26_decay(g, basis, lams)
        ratios[name] = rep.ratios.tolist()
        worst = int(np.nanargmax(rep.ratios))
        checks.append(Check(f"decay_{name}", rep.all_decaying,
                            f"worst basis vector w_{worst + 1}: ratio {rep.ratios[worst]:.3g}"))
    rank = int(np.linalg.matrix_rank(np.hstack([sys.b1.matrix, sys.b2.matrix])))
    checks.append(Check("b_surjective", rank == scen.n_modes, f"rank [B1 B2] = {rank} of {scen.n_modes}"))

    v = selection_path(scen)
    p_vec = terminal_functional(free_evolution(scen), v, scen)
    worst = 0.0
    for lam in lams:
        traj = mild_solution(control_law(sys, p_vec, lam, scen.coupling), v, scen)
        measured = terminal_error(traj, scen)
        predicted = eigenmode_error(sys.gamma.matrix, p_vec, lam)
        if predicted > 0:
            worst = max(worst, abs(measured - predicted) / predicted)
        else:
            worst = max(worst, measured)
    checks.append(Check("steering_closed_form", worst <= 1e-6, f"max relative deviation {worst:.2e}"))
    return LinearReport(checks, ratios, rank, scen.n_modes)
