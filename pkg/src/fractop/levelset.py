"""Geometry projection of the topological field (exact Heaviside, regularized
Dirac), volume measures and the reaction-diffusion update of the level-set
surface.

The field is held at mesh nodes in [-1, 1]; material occupies {phi >= 0}.
The Heaviside is evaluated at quadrature points from the interpolated field,
so interface-cut elements integrate partial stiffness and volume.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .mesh import Mesh


@dataclass(frozen=True)
class TopoParams:
    """Reaction-diffusion evolution parameters."""

    eta_phi: float = 1.0
    l_phi: float = 1e-2
    tau_phi: float = 1e-4
    l_delta: float = 5.0

    def __post_init__(self):
        if min(self.eta_phi, self.l_phi, self.tau_phi, self.l_delta) <= 0:
            raise ValueError("all reaction-diffusion parameters must be > 0")


def heaviside_exact(phi):
    """Binary projection: 1 for phi >= 0, else 0."""
    return np.where(np.asarray(phi, dtype=float) >= 0.0, 1.0, 0.0)


def dirac_regularized(phi, l_delta: float = 5.0):
    """Logistic approximation of the interface Dirac delta.

    delta(phi) = l e^{-l phi} / (1 + e^{-l phi})^2, evaluated through |phi|
    so large arguments of either sign cannot overflow.
    """
    if l_delta <= 0:
        raise ValueError("l_delta must be positive")
    a = np.exp(-l_delta * np.abs(np.asarray(phi, dtype=float)))
    return l_delta * a / (1.0 + a) ** 2


def volume_ratio(mesh: Mesh, phi: np.ndarray) -> float:
    """Material volume fraction int H(phi) dx / int 1 dx by quadrature."""
    phi_qp = mesh.interpolate(phi)
    solid = (mesh.w_detj * heaviside_exact(phi_qp)).sum()
    return float(solid / mesh.total_volume())


def material_volume(mesh: Mesh, phi: np.ndarray) -> float:
    phi_qp = mesh.interpolate(phi)
    return float((mesh.w_detj * heaviside_exact(phi_qp)).sum())


def dirac_volume_vector(mesh: Mesh, phi: np.ndarray,
                        l_delta: float = 5.0) -> np.ndarray:
    """Nodal assembly of int delta(phi) N_a dx (volume-constraint gradient)."""
    phi_qp = mesh.interpolate(phi)
    w = mesh.w_detj * dirac_regularized(phi_qp, l_delta)
    contrib = np.einsum("eq,qa->ea", w, mesh.shape_n)
    out = np.zeros(mesh.n_nodes)
    np.add.at(out, mesh.conn, contrib)
    return out


def _mass_matrix(mesh: Mesh) -> sp.csr_matrix:
    nen = mesh.nodes_per_elem
    me = np.einsum("eq,qa,qb->eab", mesh.w_detj, mesh.shape_n, mesh.shape_n)
    rows = np.repeat(mesh.conn, nen, axis=1).ravel()
    cols = np.tile(mesh.conn, (1, nen)).ravel()
    return sp.coo_matrix((me.ravel(), (rows, cols)),
                         shape=(mesh.n_nodes, mesh.n_nodes)).tocsr()


def _laplace_matrix(mesh: Mesh) -> sp.csr_matrix:
    nen = mesh.nodes_per_elem
    ke = np.einsum("eq,eqad,eqbd->eab", mesh.w_detj, mesh.dn_dx, mesh.dn_dx)
    rows = np.repeat(mesh.conn, nen, axis=1).ravel()
    cols = np.tile(mesh.conn, (1, nen)).ravel()
    return sp.coo_matrix((ke.ravel(), (rows, cols)),
                         shape=(mesh.n_nodes, mesh.n_nodes)).tocsr()


def solve_reaction_diffusion(mesh: Mesh, phi_m: np.ndarray,
                             velocity: np.ndarray, params: TopoParams,
                             pinned_nodes=None) -> np.ndarray:
    """One implicit pseudo-time step of the level-set evolution.

    Solves the weak form
        int [ (v - eta/tau (phi - phi_m)) dphi - l^2 grad phi . grad dphi ] dx = 0
    with homogeneous Neumann sides, ``phi = 1`` pinned on the loaded region
    and the result clamped to [-1, 1].
    """
    velocity = np.asarray(velocity, dtype=float)
    if not np.all(np.isfinite(velocity)):
        raise FloatingPointError("non-finite velocity field")
    mass = _mass_matrix(mesh)
    lap = _laplace_matrix(mesh)
    coef = params.eta_phi / params.tau_phi
    lhs = (coef * mass + params.l_phi ** 2 * lap).tocsr()
    rhs = mass @ (velocity + coef * phi_m)

    phi = np.empty(mesh.n_nodes)
    if pinned_nodes is not None and len(pinned_nodes) > 0:
        pinned = np.asarray(pinned_nodes, dtype=int)
        free = np.setdiff1d(np.arange(mesh.n_nodes), pinned)
        phi[pinned] = 1.0
        reduced = lhs[free][:, free]
        rhs_f = rhs[free] - lhs[free][:, pinned] @ phi[pinned]
        phi[free] = spsolve(reduced.tocsc(), rhs_f)
    else:
        phi = spsolve(lhs.tocsc(), rhs)
    if not np.all(np.isfinite(phi)):
        raise RuntimeError("reaction-diffusion solve produced non-finite field")
    return np.clip(phi, -1.0, 1.0)
