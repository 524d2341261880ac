"""Outer optimization loop: incremental volume targeting, bi-sectioning of
the volume Lagrange multiplier and the termination rule.

Each outer iteration re-runs the full load history on the current topology
(path history is invalid after a topology change), sweeps the adjoints,
filters the solid sensitivity and then brackets the volume multiplier until
the expected-volume target of the iteration is met.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import filtering, levelset, sensitivity
from .forward import Problem, SolverError, SolverSettings, run_load_history
from .levelset import TopoParams

log = logging.getLogger("fractop")


@dataclass
class OptimizationSettings:
    target_volume: float
    theta_v: float = 0.05
    formulation: int = 2
    r_min: float = 1.0
    bisection_tol: float = 1e-3
    bisection_max_iter: int = 60
    stagnation_tol: float = 1e-4
    stagnation_window: int = 3
    volume_tol: float = 1e-2
    max_outer_iterations: int = 300
    n_steps: int = 1
    du_per_step: float = 0.0
    # CFL-style saturation of the normalized velocity: bounds the level-set
    # front motion to O(1) element layers per outer iteration
    velocity_cap: float = 2.0

    def __post_init__(self):
        if not 0.0 < self.target_volume <= 1.0:
            raise ValueError("target volume fraction must lie in (0, 1]")
        if self.formulation not in (1, 2):
            raise ValueError("formulation must be 1 or 2")


@dataclass
class OptimizerState:
    """Mutable state of the outer loop: current topology, multiplier
    bracket, and the filtered-sensitivity history buffer (depth 3)."""

    phi: np.ndarray
    lambda_v: float = 0.0
    lambda_lower: float = 1e-8
    lambda_upper: float = 1e8
    target_volume: float = 0.4
    expected_volume: float = 1.0
    theta_v: float = 0.05
    sensitivity_history: list = field(default_factory=list)
    objective_history: list = field(default_factory=list)


@dataclass
class ConvergenceRecord:
    iteration: int
    objective: float
    volume_ratio: float
    lambda_v: float
    bisection_iterations: int
    stagger_iterations_max: int
    wall_time: float


@dataclass
class OptimizationResult:
    phi: np.ndarray
    records: list
    converged: bool
    trajectory: object = None    # forward history of the last analyzed layout
    bracket_ok: bool = True      # multiplier bracket invariant over all outers
    expected_volumes: list = None  # per-iteration incremental volume targets


def expected_volume(chi_prev: float, target: float, theta_v: float) -> float:
    """Geometric approach of the per-iteration volume target toward the
    final fraction; fixed point at chi_prev = target."""
    return chi_prev - theta_v * (chi_prev - target)


def bisection_step(problem: Problem, state: OptimizerState,
                   g_s_filtered: np.ndarray, topo: TopoParams,
                   settings: OptimizationSettings):
    """Bracket the volume multiplier until the candidate topology meets the
    expected volume of this outer iteration.

    The Dirac weights of the volume sensitivity are anchored at the
    incoming topology so the candidate volume is monotone in the
    multiplier.  Returns (phi_new, lambda_v, diagnostics).
    """
    mesh = problem.mesh
    lam_l = 1e-8
    lam_u = max(1e8, 1e4 * state.lambda_v)
    pinned = problem.driven_nodes
    w_dirac = levelset.dirac_volume_vector(mesh, state.phi, topo.l_delta)

    lam = None
    converged = False
    bracket_ok = True
    iterations = 0
    # accept the candidate closest to the expected volume, preferring the
    # from-above side: a jumpy chi(lambda) must never strip much more than
    # the iteration's quota in one accept.  Near the final target the mesh
    # granularity of chi can exceed the shrinking per-iteration quota, so
    # the reference switches to the final fraction to let the loop finish.
    endgame = (abs(state.expected_volume - settings.target_volume)
               <= 2.0 * settings.volume_tol)
    chi_ref = settings.target_volume if endgame else state.expected_volume
    best = None
    for k in range(1, settings.bisection_max_iter + 1):
        lam_prev = lam
        lam = float(np.sqrt(lam_l * lam_u))
        bracket_ok = bracket_ok and (lam_l <= lam <= lam_u)
        g_total = g_s_filtered + lam * w_dirac
        v = sensitivity.velocity_from_sensitivity(g_total)
        if settings.velocity_cap > 0:
            v = np.clip(v, -settings.velocity_cap, settings.velocity_cap)
        phi_new = levelset.solve_reaction_diffusion(mesh, state.phi, v, topo,
                                                    pinned_nodes=pinned)
        chi = levelset.volume_ratio(mesh, phi_new)
        gap = chi - chi_ref
        penalty = gap if gap >= 0.0 else 1.5 * (-gap)
        if best is None or penalty < best[0]:
            best = (penalty, phi_new, lam, chi)
        if chi >= state.expected_volume:
            lam_l = lam
        else:
            lam_u = lam
        if lam_l > lam_u:
            raise SolverError("volume multiplier bracket inverted")
        iterations = k
        if lam_prev is not None:
            res_v = abs(lam - lam_prev) / abs(lam + lam_prev)
            if res_v <= settings.bisection_tol:
                converged = True
                break
    _, phi_out, lam_out, chi_out = best
    if not converged:
        log.warning("bisection hit the iteration cap; returning best "
                    "candidate (chi=%.4f, target=%.4f)", chi_out,
                    state.expected_volume)
    state.lambda_lower = lam_l
    state.lambda_upper = lam_u
    return phi_out, lam_out, {"iterations": iterations,
                              "converged": converged, "chi": chi_out,
                              "bracket_ok": bracket_ok}


def run_optimization(problem: Problem, topo: TopoParams,
                     settings: OptimizationSettings,
                     solver: SolverSettings = None,
                     callback=None) -> OptimizationResult:
    """Full outer loop; terminates when the objective stalls for the
    stagnation window while the volume constraint is met."""
    solver = solver or SolverSettings()
    mesh = problem.mesh
    state = OptimizerState(phi=np.ones(mesh.n_nodes),
                           target_volume=settings.target_volume,
                           theta_v=settings.theta_v)
    kernel = filtering.build_kernel(mesh, settings.r_min)

    records = []
    stagnant = 0
    converged = False
    trajectory = None
    bracket_ok = True
    expected_volumes = []
    # once the target volume is reached the pseudo-time step is annealed so
    # the desk-scale layout settles into a fixed point instead of trading
    # near-equal-value boundary nodes forever
    tau_eff = topo.tau_phi
    reached_target = False
    for m in range(1, settings.max_outer_iterations + 1):
        tic = time.perf_counter()
        trajectory = run_load_history(problem, settings.n_steps,
                                      settings.du_per_step, solver,
                                      phi=state.phi)
        objective = -sensitivity.objective_total(trajectory)  # stored work
        chi_prev = levelset.volume_ratio(mesh, state.phi)

        adjoints = sensitivity.adjoint_sweep(problem, trajectory, solver,
                                             settings.formulation)
        g_s = sensitivity.solid_sensitivity(problem, trajectory, adjoints,
                                            solver, settings.formulation)
        g_tilde = filtering.filter_field(kernel, g_s)
        g_hat = filtering.history_average(
            g_tilde,
            state.sensitivity_history[-1] if state.sensitivity_history else None,
            state.sensitivity_history[-2] if len(state.sensitivity_history) > 1
            else None,
            m)
        state.sensitivity_history.append(g_hat)
        del state.sensitivity_history[:-2]

        state.expected_volume = expected_volume(chi_prev,
                                                settings.target_volume,
                                                settings.theta_v)
        expected_volumes.append(state.expected_volume)
        if reached_target:
            tau_eff = max(0.7 * tau_eff, 1e-3 * topo.tau_phi)
            if abs(chi_prev - settings.target_volume) > 2 * settings.volume_tol:
                tau_eff = topo.tau_phi       # drifted out: re-enable motion
        topo_eff = replace(topo, tau_phi=tau_eff)
        if settings.target_volume >= 1.0 and chi_prev <= settings.target_volume:
            # constraint already met with nothing to remove
            lam = 0.0
            diag = {"iterations": 0, "converged": True, "chi": chi_prev,
                    "bracket_ok": True}
        else:
            # when the level-set step is too small to carve the iteration's
            # quota out of a (near-)saturated field, retry with a boosted
            # pseudo-time step until candidates reach the expected volume
            boost = 1.0
            while True:
                trial_topo = replace(topo_eff,
                                     tau_phi=boost * topo_eff.tau_phi)
                phi_new, lam, diag = bisection_step(problem, state, g_hat,
                                                    trial_topo, settings)
                quota_missed = (
                    diag["chi"] - state.expected_volume > settings.volume_tol
                    and diag["chi"] - settings.target_volume
                    > settings.volume_tol)
                if not quota_missed or boost >= 32.0:
                    break
                boost *= 2.0
            state.phi = phi_new
        bracket_ok = bracket_ok and diag["bracket_ok"]
        state.lambda_v = lam
        state.objective_history.append(objective)

        stagger_max = max((s.stagger_iterations for s in trajectory.stats),
                          default=0)
        rec = ConvergenceRecord(
            iteration=m, objective=objective, volume_ratio=diag["chi"],
            lambda_v=lam, bisection_iterations=diag["iterations"],
            stagger_iterations_max=stagger_max,
            wall_time=time.perf_counter() - tic)
        records.append(rec)
        log.info("[m=%03d] J=%.9g chi=%.4f lambda_V=%.4g bisect=%d",
                 m, objective, diag["chi"], lam, diag["iterations"])
        if callback is not None:
            callback(rec, state)

        volume_ok = abs(diag["chi"] - settings.target_volume) \
            <= settings.volume_tol
        reached_target = reached_target or volume_ok
        if len(state.objective_history) >= 2:
            prev = state.objective_history[-2]
            denom = max(abs(objective), 1e-14)
            if abs(objective - prev) / denom < settings.stagnation_tol:
                stagnant += 1
            else:
                stagnant = 0
        if volume_ok and stagnant >= settings.stagnation_window:
            converged = True
            break
        if settings.target_volume >= 1.0 and volume_ok:
            converged = True
            break
    return OptimizationResult(phi=state.phi, records=records,
                              converged=converged, trajectory=trajectory,
                              bracket_ok=bracket_ok,
                              expected_volumes=expected_volumes)
