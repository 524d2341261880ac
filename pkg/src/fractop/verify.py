"""Finite-difference oracles: central-difference verification of the adjoint
sensitivity (full forward re-solves per probe) and of the consistent tangent
at sampled material states.

The finite-difference arms replace the exact Heaviside in the solid/void
transition by its regularized counterpart (the integral of the regularized
Dirac); the analytic arm keeps the exact projection.  The remaining
discrepancy sources are the perturbation size and the regularization itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import material as mat
from .forward import Problem, SolverSettings, run_load_history
from .levelset import heaviside_exact
from .material import MaterialParams, QuadState
from .sensitivity import adjoint_sweep, objective_total, solid_sensitivity

ERROR_FLOOR = 1e-14


@dataclass
class FDReport:
    """Per-node comparison of analytic and finite-difference sensitivities."""

    nodes: np.ndarray
    analytic: np.ndarray
    fd: np.ndarray
    rel_error: np.ndarray
    delta_phi: float
    invalid: np.ndarray = None

    @property
    def max_rel_error(self) -> float:
        return float(np.max(self.rel_error)) if self.rel_error.size else 0.0

    @property
    def mean_rel_error(self) -> float:
        return float(np.mean(self.rel_error)) if self.rel_error.size else 0.0


def relative_error(a, b, floor: float = ERROR_FLOOR):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return np.abs(a - b) / denom


def _lagrangian(problem: Problem, phi, n_steps, du_per_step,
                settings: SolverSettings, lambda_v: float) -> float:
    """Objective (plus the optional volume term) at a re-solved forward
    state with the regularized Heaviside driving the transition."""
    traj = run_load_history(problem, n_steps, du_per_step, settings, phi=phi,
                            regularized=True)
    value = objective_total(traj)
    if lambda_v != 0.0:
        phi_qp = problem.mesh.interpolate(np.asarray(phi, dtype=float))
        h_reg = mat.heaviside_regularized(phi_qp, problem.l_delta)
        value += lambda_v * float((problem.mesh.w_detj * h_reg).sum())
    return value


def fd_sensitivity(problem: Problem, index: int, delta_phi: float,
                   n_steps: int, du_per_step: float,
                   settings: SolverSettings = None, phi=None,
                   lambda_v: float = 0.0, mode: str = "node") -> float:
    """Central difference of the Lagrangian under one nodal (or lumped
    element) perturbation of the topological field; returns the velocity
    estimate -dL/dPhi."""
    settings = settings or SolverSettings()
    mesh = problem.mesh
    base = np.ones(mesh.n_nodes) if phi is None else np.asarray(phi, float)
    if mode == "node":
        sel = np.array([index])
    elif mode == "element":
        sel = mesh.conn[index]
    else:
        raise ValueError("mode must be 'node' or 'element'")

    phi_plus = base.copy()
    phi_plus[sel] += delta_phi
    phi_minus = base.copy()
    phi_minus[sel] -= delta_phi
    l_plus = _lagrangian(problem, phi_plus, n_steps, du_per_step, settings,
                         lambda_v)
    l_minus = _lagrangian(problem, phi_minus, n_steps, du_per_step, settings,
                          lambda_v)
    return -(l_plus - l_minus) / (2.0 * delta_phi)


def compare_sensitivities(problem: Problem, nodes, n_steps: int,
                          du_per_step: float,
                          settings: SolverSettings = None, phi=None,
                          formulation: int = 1, delta_phi: float = 1e-4,
                          lambda_v: float = 0.0) -> FDReport:
    """Run both pipelines on a probe subset and report per-node errors.

    The analytic arm runs the exact-Heaviside forward solve, the adjoint
    sweep and the assembled solid sensitivity; the FD arm re-solves the
    forward problem per probe with the regularized transition.
    """
    settings = settings or SolverSettings()
    mesh = problem.mesh
    base = np.ones(mesh.n_nodes) if phi is None else np.asarray(phi, float)
    nodes = np.asarray(nodes, dtype=int)

    traj = run_load_history(problem, n_steps, du_per_step, settings, phi=base)
    adjoints = adjoint_sweep(problem, traj, settings, formulation)
    g_s = solid_sensitivity(problem, traj, adjoints, settings, formulation)
    if lambda_v != 0.0:
        from .levelset import dirac_volume_vector
        g_s = g_s + lambda_v * dirac_volume_vector(mesh, base,
                                                   problem.l_delta)
    analytic_v = -g_s[nodes]

    fd_v = np.empty(nodes.size)
    invalid = np.zeros(nodes.size, dtype=bool)
    for i, node in enumerate(nodes):
        try:
            fd_v[i] = fd_sensitivity(problem, int(node), delta_phi, n_steps,
                                     du_per_step, settings, phi=base,
                                     lambda_v=lambda_v)
        except Exception:
            fd_v[i] = np.nan
            invalid[i] = True
    ok = ~invalid
    rel = np.full(nodes.size, np.nan)
    rel[ok] = relative_error(analytic_v[ok], fd_v[ok])
    return FDReport(nodes=nodes, analytic=analytic_v, fd=fd_v,
                    rel_error=rel[ok], delta_phi=delta_phi, invalid=invalid)


def interior_solid_nodes(problem: Problem, phi=None) -> np.ndarray:
    """Nodes away from the box boundary with a solid topological value,
    excluding the driven (phi-pinned) region."""
    mesh = problem.mesh
    phi = np.ones(mesh.n_nodes) if phi is None else np.asarray(phi, float)
    coords = mesh.coords
    tol = 1e-9
    interior = np.ones(mesh.n_nodes, dtype=bool)
    for k in range(mesh.dimension):
        interior &= coords[:, k] > tol
        interior &= coords[:, k] < mesh.extents[k] - tol
    interior &= heaviside_exact(phi) > 0.5
    interior[problem.driven_nodes] = False
    return np.flatnonzero(interior)


def fd_tangent_check(params: MaterialParams, strains, states: QuadState,
                     d, phi, h_rel: float = 1e-6):
    """Central finite difference of the return-mapped stress against the
    consistent tangent at the given material points.

    Perturbs engineering strain components, so the result is directly
    comparable to the assembled tangent columns.  Returns the max relative
    error and the per-state error array.
    """
    strains = np.atleast_2d(np.asarray(strains, dtype=float))
    n = strains.shape[0]
    d = np.broadcast_to(np.asarray(d, dtype=float), (n,))
    phi = np.broadcast_to(np.asarray(phi, dtype=float), (n,))

    base = mat.return_map(strains, states, d, phi, params)
    scale = np.maximum(np.abs(strains).max(axis=1), 1e-3)
    errors = np.zeros(n)
    fd_tan = np.zeros_like(base.tangent)
    for j in range(6):
        h = h_rel * scale
        # engineering perturbation: shear tensor components move by h/2
        step = np.zeros((n, 6))
        step[:, j] = h if j < 3 else 0.5 * h
        plus = mat.return_map(strains + step, states, d, phi, params)
        minus = mat.return_map(strains - step, states, d, phi, params)
        fd_tan[:, :, j] = (plus.sigma - minus.sigma) / (2.0 * h[:, None])
    norm = np.maximum(np.linalg.norm(base.tangent, axis=(1, 2)), ERROR_FLOOR)
    errors = np.linalg.norm(base.tangent - fd_tan, axis=(1, 2)) / norm
    return float(errors.max()), errors
