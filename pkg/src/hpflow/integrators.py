"""Adaptive time integration with invariant monitoring.

The driver is a Dormand-Prince 5(4) embedded pair with PI step-size control
(the classic ode45 scheme).  Steps are clipped so that every requested
sample time is hit exactly; no interpolation is involved, which keeps the
recorded energy and Casimir values free of dense-output error.

The dissipated flow is not a Poisson flow, so no structure-preserving
integrator is attempted; conservation of the Hamiltonian is monitored after
the fact, never enforced by projection.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "IntegrationError",
    "step_rk4",
    "integrate_adaptive",
    "Trajectory",
    "StepDiagnostics",
    "InvariantReport",
    "monitor",
    "detect_convergence",
]

DEFAULT_REL_TOL = 1e-10
DEFAULT_ABS_TOL = 1e-10
DEFAULT_SAMPLE_COUNT = 2000


class IntegrationError(RuntimeError):
    """Raised by the fixed stepper on non-finite values."""


def step_rk4(f: Callable, x: np.ndarray, dt: float) -> np.ndarray:
    """One classical 4th-order Runge-Kutta step; local error O(dt^5)."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    x = np.asarray(x, dtype=float)
    k1 = np.asarray(f(x))
    k2 = np.asarray(f(x + 0.5 * dt * k1))
    k3 = np.asarray(f(x + 0.5 * dt * k2))
    k4 = np.asarray(f(x + dt * k3))
    out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise IntegrationError(f"non-finite value in RK4 step from {x}")
    return out


# Dormand-Prince 5(4) tableau.  The seventh stage equals the propagated
# solution (FSAL), so an accepted step costs six new evaluations.
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_DP_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
# PI controller exponents for a 5th-order error estimate.
_ALPHA = 0.7 / 5.0
_BETA = 0.4 / 5.0


@dataclass(frozen=True)
class StepDiagnostics:
    accepted: int
    rejected: int
    max_error_estimate: float
    rel_tol: float
    abs_tol: float
    failure: Optional[str] = None

    @property
    def completed(self) -> bool:
        return self.failure is None


@dataclass
class Trajectory:
    """Sampled solution with per-sample energy and Casimir values.

    ``h_values[k]`` and ``c_values[k]`` are evaluated from ``states[k]``
    directly, never carried forward from the previous sample.
    """

    times: np.ndarray
    states: np.ndarray
    h_values: Optional[np.ndarray]
    c_values: Optional[np.ndarray]
    diagnostics: StepDiagnostics = field(
        default_factory=lambda: StepDiagnostics(0, 0, 0.0, 0.0, 0.0)
    )

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if len(self.times) != len(self.states):
            raise ValueError("times and states must have equal length")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self):
        return len(self.times)


def _error_norm(err: np.ndarray, y0: np.ndarray, y1: np.ndarray,
                rel_tol: float, abs_tol: float) -> float:
    scale = abs_tol + rel_tol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def _initial_step(f, x0, k1, t_end, rel_tol, abs_tol):
    scale = abs_tol + rel_tol * np.abs(x0)
    d0 = np.linalg.norm(x0 / scale)
    d1 = np.linalg.norm(k1 / scale)
    if d1 <= 1e-10:
        return min(1e-6 * t_end, t_end)
    return min(0.01 * d0 / d1 if d0 > 0 else 1e-6 * t_end, t_end)


def integrate_adaptive(
    f: Callable,
    x0,
    t_end: float,
    rel_tol: float = DEFAULT_REL_TOL,
    abs_tol: float = DEFAULT_ABS_TOL,
    sample_interval: Optional[float] = None,
    h_eval: Optional[Callable] = None,
    c_eval: Optional[Callable] = None,
) -> Trajectory:
    """Integrate ``dx/dt = f(x)`` from 0 to ``t_end`` with error control.

    ``sample_interval`` sets the output grid (default ``t_end / 2000``); the
    integrator lands on each grid point exactly.  ``h_eval`` and ``c_eval``
    are scalar observables recorded per sample (the trajectory's energy and
    Casimir columns); omitted observables leave the column ``None``.

    Failures (step-size underflow below ``1e-14 * t_end`` or a non-finite
    state) do not raise: the partial trajectory up to the last good sample
    is returned with ``diagnostics.failure`` set.
    """
    if t_end <= 0:
        raise ValueError(f"t_end must be positive, got {t_end}")
    if rel_tol <= 0 or abs_tol <= 0:
        raise ValueError("tolerances must be positive")
    if sample_interval is None:
        sample_interval = t_end / DEFAULT_SAMPLE_COUNT
    if sample_interval <= 0:
        raise ValueError("sample_interval must be positive")

    n_whole = int(np.floor(t_end / sample_interval + 1e-9))
    stops = [i * sample_interval for i in range(1, n_whole + 1)]
    if not stops or stops[-1] < t_end * (1.0 - 1e-12):
        stops.append(t_end)
    else:
        stops[-1] = t_end  # snap an inexact final grid point onto t_end

    t = 0.0
    y = np.asarray(x0, dtype=float).copy()
    times = [0.0]
    states = [y.copy()]
    accepted = rejected = 0
    max_err = 0.0

    def finish(failure=None):
        if failure is not None and t > times[-1]:
            times.append(t)  # retain the last good state on failure
            states.append(y.copy())
        diag = StepDiagnostics(
            accepted=accepted,
            rejected=rejected,
            max_error_estimate=max_err,
            rel_tol=rel_tol,
            abs_tol=abs_tol,
            failure=failure,
        )
        arr = np.array(states)
        hv = np.array([h_eval(s) for s in arr]) if h_eval is not None else None
        cv = np.array([c_eval(s) for s in arr]) if c_eval is not None else None
        return Trajectory(np.array(times), arr, hv, cv, diag)

    k = [None] * 7
    k[0] = np.asarray(f(y), dtype=float)
    if not np.all(np.isfinite(k[0])):
        return finish(failure="non-finite right-hand side at t=0")

    h = _initial_step(f, y, k[0], t_end, rel_tol, abs_tol)
    err_prev = 1.0
    stop_index = 0
    underflow = 1e-14 * t_end

    while stop_index < len(stops):
        stop = stops[stop_index]
        if stop - t < underflow:
            # roundoff-sized gap: take the sample at the current state
            t = stop
            times.append(t)
            states.append(y.copy())
            stop_index += 1
            continue
        clipped = False
        h_natural = h
        if t + h >= stop:
            h = stop - t
            clipped = True
        if h < underflow:
            return finish(failure=f"step size underflow at t={t:.6g}")

        bad = False
        for i in range(1, 7):
            yi = y + h * sum(_DP_A[i][j] * k[j] for j in range(i))
            k[i] = np.asarray(f(yi), dtype=float)
            if not np.all(np.isfinite(k[i])):
                bad = True
                break
        if not bad:
            y_new = y + h * sum(_DP_B[j] * k[j] for j in range(7))
            bad = not np.all(np.isfinite(y_new))
        if bad:
            # non-finite stage: treat as a rejection and retry smaller
            rejected += 1
            h = h * _MIN_FACTOR
            if h < underflow:
                return finish(failure=f"non-finite value near t={t:.6g}")
            continue

        err_vec = h * sum(_DP_E[j] * k[j] for j in range(7))
        err = _error_norm(err_vec, y, y_new, rel_tol, abs_tol)

        if err <= 1.0:
            accepted += 1
            max_err = max(max_err, err)
            y = y_new
            k[0] = k[6]  # FSAL
            if clipped:
                t = stop
                times.append(t)
                states.append(y.copy())
                stop_index += 1
            else:
                t += h
            if err == 0.0:
                factor = _MAX_FACTOR
            else:
                factor = _SAFETY * err ** -_ALPHA * err_prev ** _BETA
                factor = min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
            err_prev = max(err, 1e-12)
            h = min((h_natural if clipped else h) * factor, t_end)
        else:
            rejected += 1
            factor = max(_MIN_FACTOR, _SAFETY * err ** -0.2)
            h = h * min(1.0, factor)

    return finish()


@dataclass(frozen=True)
class InvariantReport:
    """Post-hoc conservation check of a sampled trajectory.

    The energy must stay within ``100 * rel_tol * |H(0)| + abs_tol`` of its
    initial value, and the Casimir may never increase between consecutive
    samples by more than ``10 * (abs_tol + rel_tol * |C_k|)``.
    """

    max_h_drift: float
    h_threshold: float
    h_passed: bool
    max_c_drift: float
    c_increase_count: int
    max_c_increase: float
    max_c_violation: float
    c_passed: bool

    @property
    def passed(self) -> bool:
        return self.h_passed and self.c_passed


def monitor(traj: Trajectory) -> InvariantReport:
    """Check energy conservation and Casimir monotonicity sample to sample."""
    if len(traj) == 0:
        raise ValueError("trajectory is empty")
    if traj.h_values is None or traj.c_values is None:
        raise ValueError("trajectory lacks recorded H or C values")
    rel_tol = traj.diagnostics.rel_tol
    abs_tol = traj.diagnostics.abs_tol
    h0 = float(traj.h_values[0])
    max_h_drift = float(np.max(np.abs(traj.h_values - h0)))
    h_threshold = float(100.0 * rel_tol * abs(h0) + abs_tol)
    c = traj.c_values
    slack = 10.0 * (abs_tol + rel_tol * np.abs(c[:-1]))
    increases = np.diff(c) if len(c) > 1 else np.zeros(0)
    violations = increases - slack
    c_increase_count = int(np.sum(violations > 0))
    max_c_increase = float(np.max(increases)) if len(increases) else 0.0
    max_c_violation = float(max(np.max(violations), 0.0)) if len(increases) else 0.0
    max_c_drift = float(np.max(np.abs(c - c[0])))
    return InvariantReport(
        max_h_drift=max_h_drift,
        h_threshold=h_threshold,
        h_passed=max_h_drift <= h_threshold,
        max_c_drift=max_c_drift,
        c_increase_count=c_increase_count,
        max_c_increase=max_c_increase,
        max_c_violation=max_c_violation,
        c_passed=c_increase_count == 0,
    )


def detect_convergence(
    traj: Trajectory, eps: float, window: float
) -> Optional[np.ndarray]:
    """Final state if the whole trailing ``window`` stays within ``eps`` of it.

    ``window`` is a time span and must be shorter than the trajectory's.
    Returns ``None`` when any sample in the window is farther than ``eps``
    (Euclidean) from the final state.
    """
    if len(traj) == 0:
        raise ValueError("trajectory is empty")
    span = traj.times[-1] - traj.times[0]
    if window >= span:
        raise ValueError(f"window {window} must be shorter than the span {span}")
    if eps <= 0 or window <= 0:
        raise ValueError("eps and window must be positive")
    final = traj.states[-1]
    mask = traj.times >= traj.times[-1] - window
    distances = np.linalg.norm(traj.states[mask] - final, axis=1)
    if np.all(distances <= eps):
        return final.copy()
    return None
