"""Time stepping: windowed Crank-Nicolson subsolves inside a damped Picard iteration.

For one window ``[t_n, t_n + dt]`` the map ``theta`` takes a guess of the
end-of-window velocity and PDF coefficients, transports the density with
the guessed (linearly interpolated) velocity, and solves the two linear
Crank-Nicolson problems with all coefficients frozen at the window midpoint.
The fixed point of ``theta`` is the new state.
"""

from dataclasses import dataclass, field, replace
import logging

import numpy as np
from scipy.integrate import trapezoid

from .errors import PicardDivergence
from .galerkin import (
    Discretization,
    assemble_fp_system,
    assemble_velocity_system,
    pdf_mass_matrix,
    polymer_number_density,
)
from .model import Levels
from .transport import CharMap, GridFlowMap, ModalVelocity

log = logging.getLogger(__name__)


@dataclass
class SimState:
    """Committed state at one time level."""

    step: int
    time: float
    velocity: np.ndarray
    pdf: np.ndarray
    rho: np.ndarray
    flow: GridFlowMap
    iterations: int = 0


@dataclass
class WindowResult:
    velocity: np.ndarray
    pdf: np.ndarray
    rho_mid: np.ndarray
    rho_end: np.ndarray
    flow_end: GridFlowMap
    clamp_fraction: float


@dataclass
class Trajectory:
    """Every committed state of a run plus per-step iteration counts."""

    disc: Discretization
    times: list = field(default_factory=list)
    velocity: list = field(default_factory=list)
    pdf: list = field(default_factory=list)
    rho: list = field(default_factory=list)
    iterations: list = field(default_factory=list)
    residual_history: list = field(default_factory=list)

    def append(self, state, history=()):
        self.times.append(state.time)
        self.velocity.append(state.velocity.copy())
        self.pdf.append(state.pdf.copy())
        self.rho.append(state.rho.copy())
        self.iterations.append(state.iterations)
        self.residual_history.append(list(history))

    def __len__(self):
        return len(self.times)


class Simulation:
    """Finite-level scheme for one :class:`~fenesim.model.ProblemSetup`.

    Parameters
    ----------
    setup : ProblemSetup
    levels : Levels, optional
        Overrides the levels of ``setup``.
    """

    def __init__(self, setup, levels=None):
        self.setup = setup
        self.disc = Discretization(setup, levels)
        self.dt = setup.dt
        self.ds = setup.dt / setup.substeps
        self._history_t = []
        self._history_c = []

    # initial data -----------------------------------------------------
    def initial_state(self):
        disc, setup = self.disc, self.setup
        x = disc.points
        flow = GridFlowMap(setup.lengths, setup.grid)
        rho = flow.density(setup.rho0)
        c0 = disc.vbasis.project(np.asarray(setup.v0(x), dtype=float))
        psi0 = np.asarray(setup.psi0(x, disc.quad.nodes), dtype=float)
        if setup.normalize_initial:
            zeta0 = disc.laws.drag(rho)
            mass = disc.torus.weight * np.sum(zeta0[:, None] * psi0 * disc.wM[None, :])
            psi0 = psi0 / mass
        if setup.rescale_initial_pdf:
            # keep zeta M psi0 when the ratio is measured against M^m
            psi0 = psi0 * (disc.M / disc.Mm)[None, :]
        d0 = disc.project_pdf(disc.cutoff.truncation(psi0))
        self._history_t = [0.0]
        self._history_c = [c0.copy()]
        return SimState(0, 0.0, c0, d0, rho, flow, 0)

    # transport --------------------------------------------------------
    def _densities(self, state, u_end):
        t0, t1 = state.time, state.time + self.dt
        tm = 0.5 * (t0 + t1)
        window = ModalVelocity(self.disc.vbasis, [t0, t1], [state.velocity, u_end])
        if self.setup.transport == "composed":
            flow_mid = state.flow.advance(window, tm, self.ds)
            flow_end = state.flow.advance(window, t1, self.ds)
            return flow_mid.density(self.setup.rho0), flow_end.density(self.setup.rho0), flow_end
        times = np.array(self._history_t[: state.step + 1] + [t1])
        coeffs = np.array(self._history_c[: state.step + 1] + [u_end])
        chars = CharMap(ModalVelocity(self.disc.vbasis, times, coeffs), self.ds)
        x = self.disc.points
        rho_mid = chars.density(self.setup.rho0, x, tm)
        rho_end = chars.density(self.setup.rho0, x, t1)
        return rho_mid, rho_end, GridFlowMap(self.setup.lengths, self.setup.grid, time=t1)

    # one application of the fixed-point map ---------------------------
    def theta(self, state, u_end, xi_end):
        """Crank-Nicolson window solve with frozen guesses for the end-of-window coefficients.

        Parameters
        ----------
        state : SimState
            State at the start of the window.
        u_end, xi_end : ndarray
            Guessed velocity and PDF coefficients at the end of the window.

        Returns
        -------
        WindowResult
        """
        disc, laws, dt = self.disc, self.disc.laws, self.dt
        rho_mid, rho_end, flow_end = self._densities(state, u_end)
        u_mid = 0.5 * (state.velocity + u_end)
        xi_mid = 0.5 * (state.pdf + xi_end)
        xi_vals = disc.pdf_values(xi_mid)
        zeta_mid = laws.drag(rho_mid)
        varrho, clamp = polymer_number_density(disc, zeta_mid, xi_vals)
        tau = disc.stress(rho_mid, xi_vals)
        t_mid = state.time + 0.5 * dt
        force = self._force(t_mid)

        vs = assemble_velocity_system(disc, rho_mid, u_mid, varrho, tau, force)
        lhs = vs.mass / dt - 0.5 * vs.A
        rhs = (vs.mass / dt + 0.5 * vs.A) @ state.velocity + vs.B
        c_new = _solve(lhs, rhs, vs.mass, "velocity mass matrix")

        fp = assemble_fp_system(disc, zeta_mid, u_mid, xi_mid)
        N0 = pdf_mass_matrix(disc, laws.drag(state.rho))
        N1 = pdf_mass_matrix(disc, laws.drag(rho_end))
        lhs = N1 + 0.5 * dt * fp.L
        rhs = (N0 - 0.5 * dt * fp.L) @ state.pdf + dt * fp.R
        d_new = _solve(lhs, rhs, N1, "PDF mass matrix")
        return WindowResult(c_new, d_new, rho_mid, rho_end, flow_end, clamp)

    def _force(self, t):
        if self.setup.forcing is None:
            return np.zeros_like(self.disc.points)
        return np.asarray(self.setup.forcing(self.disc.points, t), dtype=float)

    # Picard iteration ---------------------------------------------------
    def step(self, state):
        """Advance one window; returns the new state and the list of coefficient changes."""
        s = self.setup
        u, xi = state.velocity.copy(), state.pdf.copy()
        history = []
        for it in range(1, s.max_iter + 1):
            res = self.theta(state, u, xi)
            change = max(np.max(np.abs(res.velocity - u), initial=0.0), np.max(np.abs(res.pdf - xi), initial=0.0))
            history.append(float(change))
            u = (1.0 - s.damping) * u + s.damping * res.velocity
            xi = (1.0 - s.damping) * xi + s.damping * res.pdf
            if not np.isfinite(change) or change > 1e8:
                break
            if change <= s.tol:
                if s.damping != 1.0:
                    _, rho_end, flow_end = self._densities(state, u)
                else:
                    rho_end, flow_end = res.rho_end, res.flow_end
                new = SimState(state.step + 1, state.time + self.dt, u, xi, rho_end, flow_end, it)
                del self._history_t[state.step + 1:]
                del self._history_c[state.step + 1:]
                self._history_t.append(new.time)
                self._history_c.append(u.copy())
                return new, history
        raise PicardDivergence(
            f"fixed-point iteration did not converge at step {state.step + 1} "
            f"(last change {history[-1]:.3e} after {len(history)} iterations); reduce the time step",
            step=state.step + 1,
            iterations=len(history),
            change=history,
        )

    def run(self, callback=None):
        """Advance from 0 to the final time, recording every state.

        Parameters
        ----------
        callback : callable, optional
            Called as ``callback(state)`` after every committed step.

        Returns
        -------
        Trajectory
        """
        state = self.initial_state()
        traj = Trajectory(self.disc)
        traj.append(state)
        for _ in range(self.setup.n_steps):
            state, history = self.step(state)
            traj.append(state, history)
            if callback is not None:
                callback(state)
        self.final_state = state
        return traj


def _solve(lhs, rhs, mass, label):
    try:
        return np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        eig = np.linalg.eigvalsh(0.5 * (mass + mass.T))
        raise np.linalg.LinAlgError(
            f"singular system; {label} eigenvalues range [{eig[0]:.3e}, {eig[-1]:.3e}]"
        ) from exc


def theta_map(sim, state, u_end, xi_end):
    """Functional form of :meth:`Simulation.theta` returning ``(velocity, pdf)``."""
    res = sim.theta(state, u_end, xi_end)
    return res.velocity, res.pdf


def run(setup, levels=None):
    """Run ``setup`` and return its :class:`Trajectory`."""
    return Simulation(setup, levels).run()


@dataclass
class SweepRow:
    axis: str
    level_lo: float
    level_hi: float
    distance: float
    ratio: float


def trajectory_fields(traj, times):
    """Velocity grid values and PDF node values at the requested times."""
    disc = traj.disc
    index = {round(t, 12): i for i, t in enumerate(traj.times)}
    out = []
    for t in times:
        i = index[round(t, 12)]
        out.append((disc.velocity(traj.velocity[i]), disc.pdf_values(traj.pdf[i])))
    return out


def trajectory_distance(traj_a, traj_b):
    """Time-``L^2`` distance of velocity (``L^2``) and PDF ratio (``L^2_M``) over the common times."""
    ta = {round(t, 12) for t in traj_a.times}
    common = sorted(t for t in (round(t, 12) for t in traj_b.times) if t in ta)
    if not common:
        raise ValueError("trajectories share no output times")
    fa = trajectory_fields(traj_a, common)
    fb = trajectory_fields(traj_b, common)
    disc = traj_a.disc
    w = disc.torus.weight
    sq = []
    for (va, pa), (vb, pb) in zip(fa, fb):
        dv = w * np.sum((va - vb) ** 2)
        dp = w * np.sum((pa - pb) ** 2 * disc.wM[None, :])
        sq.append(dv + dp)
    sq = np.asarray(sq)
    if len(common) == 1:
        return float(np.sqrt(sq[0]))
    return float(np.sqrt(trapezoid(sq, common)))


SWEEP_AXES = ("ell", "m", "n", "n_conf", "dt")


def level_sweep(setup, ladders):
    """Self-convergence study along one or more discretization axes.

    Parameters
    ----------
    setup : ProblemSetup
        Base setup; only the swept parameter changes along a ladder.
    ladders : dict
        Maps an axis in ``("ell", "m", "n", "n_conf", "dt")`` to an
        increasing (or, for ``dt``, decreasing) list of levels.

    Returns
    -------
    list of SweepRow
        One row per consecutive pair with the trajectory distance and the
        ratio to the previous distance on the same axis.
    """
    rows = []
    for axis, ladder in ladders.items():
        if axis not in SWEEP_AXES:
            raise ValueError(f"unknown sweep axis {axis!r}")
        trajs = []
        for level in ladder:
            if axis == "dt":
                trajs.append(run(replace(setup, dt=float(level))))
            else:
                lv = replace(setup.levels, **{axis: type(getattr(setup.levels, axis))(level)})
                trajs.append(run(setup, lv))
        prev = None
        for i in range(len(ladder) - 1):
            dist = trajectory_distance(trajs[i], trajs[i + 1])
            ratio = prev / dist if prev is not None and dist > 0 else float("nan")
            rows.append(SweepRow(axis, ladder[i], ladder[i + 1], dist, ratio))
            prev = dist
    return rows
