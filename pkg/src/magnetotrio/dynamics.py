"""Exact equations of motion and their numerical integration.

The Newton equations integrated here are

    m_i a_i = e_i v_i x B + sum_{j != i} e_i e_j (rho_i - rho_j) / |rho_i - rho_j|^3 ,

i.e. the magnetic force in the plane plus pairwise Coulomb forces.  Integration
uses an adaptive high-order Runge-Kutta scheme (DOP853) with tight default
tolerances; trajectories are sampled on a uniform grid when a sample interval
is given, otherwise at the solver's natural steps.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import CollisionError, DomainError, SpecParseError, StepUnderflow
from .model import PhaseState, cross_with_B


@dataclass
class IntegratorSettings:
    """Knobs for :func:`integrate`.

    ``sample_interval=None`` keeps the solver's own accepted steps.  The
    collision threshold terminates integration when any pair distance drops
    below it.
    """

    t_end: float
    rel_tol: float = 1e-10
    abs_tol: float = 1e-10
    max_step: float | None = None
    sample_interval: float | None = None
    collision_threshold: float = 1e-9


@dataclass
class Trajectory:
    """Sampled solution of the Newton equations."""

    spec: object
    t: np.ndarray            # (nt,)
    positions: np.ndarray    # (nt, n, 2)
    velocities: np.ndarray   # (nt, n, 2)
    stats: dict | None = None

    @property
    def n_samples(self):
        return len(self.t)

    def state_at(self, k):
        return PhaseState(self.positions[k], self.velocities[k], self.t[k])


def accelerations(spec, positions, velocities):
    """Accelerations of all particles, shape (n, 2)."""
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    vel = np.asarray(velocities, dtype=float).reshape(-1, 2)
    e, m = spec.charges, spec.masses
    acc = cross_with_B(vel, spec.B) * e[:, None]
    # pairwise Coulomb forces; n stays small so the double loop is fine
    n = len(pos)
    for i in range(n):
        for j in range(i + 1, n):
            d = pos[i] - pos[j]
            r3 = (d[0] * d[0] + d[1] * d[1]) ** 1.5
            f = e[i] * e[j] * d / r3
            acc[i] += f
            acc[j] -= f
    return acc / m[:, None]


def _rhs(spec):
    n = spec.n

    def f(t, y):
        pos = y[: 2 * n].reshape(n, 2)
        vel = y[2 * n:].reshape(n, 2)
        return np.concatenate([vel.ravel(), accelerations(spec, pos, vel).ravel()])

    return f


def _min_pair_distance(pos):
    n = len(pos)
    best = np.inf
    for i in range(n):
        for j in range(i + 1, n):
            d = pos[i] - pos[j]
            best = min(best, float(np.hypot(d[0], d[1])))
    return best


def _closest_pair(pos):
    n = len(pos)
    best, pair = np.inf, (0, 1)
    for i in range(n):
        for j in range(i + 1, n):
            d = float(np.hypot(*(pos[i] - pos[j])))
            if d < best:
                best, pair = d, (i, j)
    return pair, best


def integrate(spec, state, settings):
    """Integrate the Newton equations from ``state`` up to ``settings.t_end``.

    Raises :class:`CollisionError` if a pair distance crosses the collision
    threshold, and :class:`StepUnderflow` if the stepper cannot proceed.
    """
    if state.n != spec.n:
        raise DomainError("state and spec have different particle counts")
    n = spec.n
    y0 = np.concatenate([state.positions.ravel(), state.velocities.ravel()])
    t0, t1 = state.t, settings.t_end

    t_eval = None
    if settings.sample_interval is not None:
        dt = float(settings.sample_interval)
        if dt <= 0:
            raise DomainError("sample_interval must be positive")
        m = int(np.floor((t1 - t0) / dt + 1e-9))
        t_eval = t0 + dt * np.arange(m + 1)
        if t_eval[-1] < t1 - 1e-12 * max(1.0, abs(t1)):
            t_eval = np.append(t_eval, t1)
        else:
            t_eval[-1] = t1

    events = None
    if n > 1 and settings.collision_threshold > 0:

        def collision(t, y):
            return _min_pair_distance(y[: 2 * n].reshape(n, 2)) - settings.collision_threshold

        collision.terminal = True
        collision.direction = -1
        events = [collision]

    sol = solve_ivp(
        _rhs(spec),
        (t0, t1),
        y0,
        method="DOP853",
        rtol=settings.rel_tol,
        atol=settings.abs_tol,
        max_step=settings.max_step if settings.max_step is not None else np.inf,
        t_eval=t_eval,
        events=events,
        dense_output=False,
    )

    if sol.status == 1:  # terminated by the collision event
        t_hit = float(sol.t_events[0][0])
        y_hit = sol.y_events[0][0]
        pair, dist = _closest_pair(y_hit[: 2 * n].reshape(n, 2))
        raise CollisionError(t_hit, pair, dist)
    if sol.status < 0:
        msg = sol.message or "integration failed"
        if "step size" in msg.lower() or "spacing" in msg.lower():
            raise StepUnderflow(msg)
        raise StepUnderflow(msg)

    nt = sol.y.shape[1]
    pos = sol.y[: 2 * n].T.reshape(nt, n, 2).copy()
    vel = sol.y[2 * n:].T.reshape(nt, n, 2).copy()
    stats = {"nfev": int(sol.nfev), "n_steps": nt}
    return Trajectory(spec, sol.t.copy(), pos, vel, stats)


def pair_distances(positions):
    """Distances for all pairs (i<j) in index order, shape (n*(n-1)/2,)."""
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    out = []
    for i, j in itertools.combinations(range(len(pos)), 2):
        out.append(float(np.hypot(*(pos[i] - pos[j]))))
    return np.array(out)


@dataclass
class RigidityReport:
    """How far each pair distance wandered from its initial value."""

    pairs: list              # [(i, j), ...]
    initial: np.ndarray      # (npairs,)
    max_deviation: np.ndarray  # (npairs,) max_t |d_ij(t) - d_ij(0)| / d_ij(0)

    @property
    def worst(self):
        return float(self.max_deviation.max()) if len(self.max_deviation) else 0.0


def rigidity_report(traj):
    """Per-pair maximum relative deviation of the inter-particle distances.

    On a rigid (special) trajectory every entry of ``max_deviation`` is zero
    up to integration error; a generic trajectory shows O(1) values.
    """
    pairs = list(itertools.combinations(range(traj.positions.shape[1]), 2))
    d0 = pair_distances(traj.positions[0])
    dev = np.zeros(len(pairs))
    for k in range(traj.n_samples):
        d = pair_distances(traj.positions[k])
        dev = np.maximum(dev, np.abs(d - d0) / d0)
    return RigidityReport(pairs, d0, dev)


# ---------------------------------------------------------------------------
# trajectory CSV:  t,x1,y1,vx1,vy1,x2,y2,...  with 17 significant digits
# ---------------------------------------------------------------------------

def trajectory_header(n):
    cols = ["t"]
    for i in range(1, n + 1):
        cols += [f"x{i}", f"y{i}", f"vx{i}", f"vy{i}"]
    return cols


def write_trajectory_csv(traj, path):
    n = traj.positions.shape[1]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(trajectory_header(n)) + "\n")
        for k in range(traj.n_samples):
            row = [f"{traj.t[k]:.17g}"]
            for i in range(n):
                row.append(f"{traj.positions[k, i, 0]:.17g}")
                row.append(f"{traj.positions[k, i, 1]:.17g}")
                row.append(f"{traj.velocities[k, i, 0]:.17g}")
                row.append(f"{traj.velocities[k, i, 1]:.17g}")
            fh.write(",".join(row) + "\n")


def read_trajectory_csv(path, spec):
    """Read a trajectory written by :func:`write_trajectory_csv`.

    Raises :class:`SpecParseError` (with the line number) on malformed or
    truncated rows.
    """
    n = spec.n
    expected = 1 + 4 * n
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise SpecParseError("empty trajectory file")
    header = lines[0].split(",")
    if header != trajectory_header(n):
        raise SpecParseError(
            f"unexpected header for an n={n} system: {lines[0]!r}", line=1
        )
    t, pos, vel = [], [], []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != expected:
            raise SpecParseError(
                f"expected {expected} columns, got {len(parts)} (truncated row?)",
                line=line_no,
            )
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            raise SpecParseError(f"non-numeric value in row", line=line_no) from None
        t.append(vals[0])
        rows = np.array(vals[1:]).reshape(n, 4)
        pos.append(rows[:, 0:2])
        vel.append(rows[:, 2:4])
    if not t:
        raise SpecParseError("trajectory file has a header but no rows")
    return Trajectory(spec, np.array(t), np.array(pos), np.array(vel))
