"""CSV logs of a simulation run, and the metrics computed back from them.

Each file starts with ``# key: value`` metadata lines (the first is always
``# schema: ...``), followed by one header row and the data rows. Floats
are written with ``repr`` so that identical runs give byte-identical files.

Trajectory columns (schema ``walker-trajectory/1``), one row per control cycle::

    t, step, q_<joint> x7, dq_<joint> x7, y_<output> x4, yd_<output> x4,
    tau_<joint> x4, F_x, F_z, x_com, L_y, E

Step columns (schema ``walker-steps/1``) are the ``StepRecord`` fields in
declaration order, one row per impact.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .simulator import SimLog, StepRecord

TRAJECTORY_SCHEMA = "walker-trajectory/1"
STEPS_SCHEMA = "walker-steps/1"
PHASE_SCHEMA = "walker-phase/1"

JOINTS = ("hip_x", "hip_z", "torso", "st_hip", "st_knee", "sw_hip", "sw_knee")
ACTUATED = JOINTS[3:]
OUTPUTS = ("torso", "z_com", "x_sw", "z_sw")

TRAJECTORY_COLUMNS = (
    ("t", "step")
    + tuple(f"q_{j}" for j in JOINTS)
    + tuple(f"dq_{j}" for j in JOINTS)
    + tuple(f"y_{o}" for o in OUTPUTS)
    + tuple(f"yd_{o}" for o in OUTPUTS)
    + tuple(f"tau_{j}" for j in ACTUATED)
    + ("F_x", "F_z", "x_com", "L_y", "E")
)
STEP_COLUMNS = tuple(f.name for f in dataclasses.fields(StepRecord))

# transient excluded from the energy, velocity and speed statistics
TRANSIENT_STEPS = 5
# first step counted in the periodicity check
PERIODIC_FROM = 20


class LogError(ValueError):
    """A log file is missing, unreadable or has the wrong schema."""


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _write(path: Path, meta: dict, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        for k, v in meta.items():
            fh.write(f"# {k}: {v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _read(path: Path, schema: str) -> tuple[dict, list[dict]]:
    try:
        with open(path, newline="") as fh:
            lines = fh.read().splitlines()
    except OSError as e:
        raise LogError(f"{path}: cannot read log ({e.strerror})") from e
    meta = {}
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        key, _, value = lines[i][1:].partition(":")
        meta[key.strip()] = value.strip()
        i += 1
    if meta.get("schema") != schema:
        raise LogError(f"{path}: expected schema {schema}, found {meta.get('schema')!r}")
    if i >= len(lines):
        raise LogError(f"{path}: missing header row")
    reader = csv.DictReader(lines[i:])
    try:
        rows = list(reader)
    except csv.Error as e:
        raise LogError(f"{path}: {e}") from e
    return meta, rows


def trajectory_rows(simlog: SimLog):
    a = simlog.arrays()
    for k in range(len(simlog.t)):
        yield ((a["t"][k], int(a["step_index"][k])) + tuple(a["q"][k]) + tuple(a["dq"][k])
               + tuple(a["y_act"][k]) + tuple(a["y_des"][k]) + tuple(a["tau"][k])
               + tuple(a["F"][k]) + (a["x_com"][k], a["L_y"][k], a["E"][k]))


def write_logs(simlog: SimLog, out_dir, *, e_star: float, z_tilde_star: float, g: float,
               trajectory: str = "trajectory.csv", steps: str = "steps.csv") -> tuple[Path, Path]:
    """Write the trajectory and step CSVs into ``out_dir``; returns both paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    traj_path, steps_path = out / trajectory, out / steps
    _write(traj_path, {"schema": TRAJECTORY_SCHEMA}, TRAJECTORY_COLUMNS, trajectory_rows(simlog))
    meta = {
        "schema": STEPS_SCHEMA,
        "requested_steps": simlog.requested_steps,
        "completed_steps": simlog.n_steps,
        "failure": " ".join((simlog.failure or "none").split()),
        "e_star": repr(float(e_star)),
        "z_tilde_star": repr(float(z_tilde_star)),
        "g": repr(float(g)),
        "qp_failures": simlog.qp_failures,
        "mpc_fallbacks": simlog.mpc_fallbacks,
        "trajectory": trajectory,
    }
    rows = (tuple(getattr(s, c) for c in STEP_COLUMNS) for s in simlog.steps)
    _write(steps_path, meta, STEP_COLUMNS, rows)
    return traj_path, steps_path


@dataclass(frozen=True)
class StepTable:
    """Per-step columns as arrays plus the run metadata."""

    meta: dict
    columns: dict[str, np.ndarray]

    @property
    def requested(self) -> int:
        return int(self.meta["requested_steps"])

    @property
    def completed(self) -> int:
        return len(self.columns["step"])

    @property
    def failure(self) -> str | None:
        f = self.meta.get("failure", "none")
        return None if f == "none" else f


def read_steps(path) -> StepTable:
    meta, rows = _read(Path(path), STEPS_SCHEMA)
    for key in ("requested_steps", "e_star", "z_tilde_star", "g"):
        if key not in meta:
            raise LogError(f"{path}: missing metadata '{key}'")
    try:
        cols = {c: np.array([float(r[c]) for r in rows]) for c in STEP_COLUMNS}
    except (KeyError, ValueError, TypeError) as e:
        raise LogError(f"{path}: malformed step row ({e})") from e
    return StepTable(meta, cols)


def read_phase(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(step, x_com, L_y) columns of a trajectory CSV."""
    _, rows = _read(Path(path), TRAJECTORY_SCHEMA)
    try:
        data = np.array([[float(r["step"]), float(r["x_com"]), float(r["L_y"])] for r in rows])
    except (KeyError, ValueError, TypeError) as e:
        raise LogError(f"{path}: malformed trajectory row ({e})") from e
    data = data.reshape(-1, 3)
    return data[:, 0].astype(int), data[:, 1], data[:, 2]


def nominal_orbit(e_star: float, z_tilde: float, x_min: float, x_max: float,
                  n: int = 201, g: float = 9.81) -> tuple[np.ndarray, np.ndarray]:
    """Forward branch of the LIP orbit with orbital energy ``e_star``.

    Points (x, L) with L = z_tilde * sqrt(e_star + g/z_tilde * x^2), L > 0.
    """
    if not (e_star > 0 and z_tilde > 0):
        raise ValueError("e_star and z_tilde must be positive")
    if not x_min <= x_max:
        raise ValueError("need x_min <= x_max")
    x = np.linspace(x_min, x_max, n)
    return x, z_tilde * np.sqrt(e_star + (g / z_tilde) * x**2)


@dataclass(frozen=True)
class Metrics:
    requested_steps: int
    completed_steps: int
    failure: str | None
    max_step_delta: float
    mean_energy_error: float
    max_energy_error: float
    energy_trend: float
    mean_energy_error_slope: float
    max_dz_error: float
    mean_speed: float

    @property
    def success(self) -> bool:
        return self.failure is None and self.completed_steps >= self.requested_steps

    def report(self) -> str:
        lines = [f"steps completed: {self.completed_steps}/{self.requested_steps}"]
        if not self.success:
            lines.append(f"FAILED at step {self.completed_steps}: {self.failure}")
        lines += [
            f"max step-to-step |d(x-, L-)| after step {PERIODIC_FROM}: {self.max_step_delta:.3e}",
            f"mean |E+ - E*|/E* after {TRANSIENT_STEPS} steps: {self.mean_energy_error:.4f}"
            f" (max {self.max_energy_error:.4f}, trend {self.energy_trend:+.2e}/step)",
            f"mean |E+ - E*|/E* with virtual-slope height: {self.mean_energy_error_slope:.4f}",
            f"max |dz- - u_des| after {TRANSIENT_STEPS} steps: {self.max_dz_error:.4f} m/s",
            f"mean forward speed: {self.mean_speed:.3f} m/s",
        ]
        return "\n".join(lines)


def _nanmax(a) -> float:
    a = np.asarray(a, float)
    return float(np.nanmax(a)) if a.size and not np.all(np.isnan(a)) else math.nan


def _nanmean(a) -> float:
    a = np.asarray(a, float)
    return float(np.nanmean(a)) if a.size and not np.all(np.isnan(a)) else math.nan


def compute_metrics(table: StepTable) -> Metrics:
    c = table.columns
    e_star = float(table.meta["e_star"])
    after = slice(TRANSIENT_STEPS, None)
    xl = np.column_stack((c["x_minus"], c["L_minus"]))[PERIODIC_FROM:]
    delta = np.linalg.norm(np.diff(xl, axis=0), axis=1) if len(xl) > 1 else np.array([])
    err = np.abs(c["E_plus"][after] - e_star) / e_star
    trend = math.nan
    if len(err) >= 2:
        trend = float(np.polyfit(np.arange(len(err)), err, 1)[0])
    err_slope = np.abs(c["E_plus_slope"][after] - e_star) / e_star
    return Metrics(
        requested_steps=table.requested,
        completed_steps=table.completed,
        failure=table.failure,
        max_step_delta=_nanmax(delta),
        mean_energy_error=_nanmean(err),
        max_energy_error=_nanmax(err),
        energy_trend=trend,
        mean_energy_error_slope=_nanmean(err_slope),
        max_dz_error=_nanmax(np.abs(c["dz_minus"][after] - c["u_des"][after])),
        mean_speed=_nanmean(c["speed"][after]),
    )


def metrics_from_simlog(simlog: SimLog, e_star: float) -> Metrics:
    """Same numbers as ``compute_metrics`` without the CSV round trip."""
    cols = {c: np.array([float(getattr(s, c)) for s in simlog.steps]) for c in STEP_COLUMNS}
    meta = {"requested_steps": simlog.requested_steps, "e_star": e_star,
            "failure": simlog.failure or "none"}
    return compute_metrics(StepTable(meta, cols))


def write_phase_portrait(traj_path, table: StepTable, out_path, n_orbit: int = 201) -> Path:
    """Actual (x_com, L_y) samples plus the nominal E* orbit for overlay.

    Rows with ``source = robot`` carry the step index; ``source = lip`` rows
    are the nominal orbit over the sampled x range with step -1.
    """
    steps, x, L = read_phase(traj_path)
    zt = float(table.meta["z_tilde_star"])
    e_star = float(table.meta["e_star"])
    g = float(table.meta["g"])
    finite = np.isfinite(x)
    lo, hi = (float(x[finite].min()), float(x[finite].max())) if finite.any() else (-0.3, 0.3)
    xo, Lo = nominal_orbit(e_star, zt, lo, hi, n_orbit, g)
    rows = [("robot", int(k), xi, Li) for k, xi, Li in zip(steps, x, L)]
    rows += [("lip", -1, xi, Li) for xi, Li in zip(xo, Lo)]
    out = Path(out_path)
    meta = {"schema": PHASE_SCHEMA, "e_star": repr(e_star), "z_tilde": repr(zt)}
    with open(out, "w", newline="") as fh:
        for k, v in meta.items():
            fh.write(f"# {k}: {v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("source", "step", "x_com", "L_y"))
        for src, k, xi, Li in rows:
            w.writerow((src, k, _fmt(xi), _fmt(Li)))
    return out


def resolve_log(path) -> Path:
    """The steps CSV for a log directory or a direct steps CSV path."""
    p = Path(path)
    steps = p / "steps.csv" if p.is_dir() else p
    if not steps.is_file():
        raise LogError(f"{steps}: no such log file")
    return steps


def trajectory_path(steps_path, table: StepTable) -> Path:
    return Path(steps_path).parent / table.meta.get("trajectory", "trajectory.csv")
