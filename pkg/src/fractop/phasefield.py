"""Crack phase-field kernel: regularized crack surface density, normalized
driving force with threshold, critical energy density and the irreversibility
history update.

The driving force is always fed with *effective* energies (no stiffness
degradation); the solid/void transition enters through the caller scaling the
energies before the threshold is applied.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FractureConstants:
    """Fracture parameters: threshold energy, length scale, post-critical
    scaling and crack viscosity."""

    psi_c: float
    l_f: float
    zeta: float = 1.0
    eta_f: float = 1e-6

    def __post_init__(self):
        if self.psi_c <= 0 or self.l_f <= 0:
            raise ValueError("psi_c and l_f must be positive")


def crack_density(d, grad_d, l_f: float):
    """Crack surface density gamma = (d^2 / l_f + l_f |grad d|^2) / 2."""
    if l_f <= 0:
        raise ValueError("l_f must be positive")
    d = np.asarray(d, dtype=float)
    grad_d = np.asarray(grad_d, dtype=float)
    grad_sq = np.einsum("...d,...d->...", grad_d, grad_d)
    return 0.5 * (d ** 2 / l_f + l_f * grad_sq)


def critical_psi(sigma_c=None, g_c=None, e_modulus=None, l_f=None) -> float:
    """Critical fracture energy density from either the critical stress
    (sigma_c^2 / 2E) or the toughness (3 G_c / (8 l_f sqrt(2)))."""
    if (sigma_c is None) == (g_c is None):
        raise ValueError("provide exactly one of sigma_c, g_c")
    if sigma_c is not None:
        if e_modulus is None or e_modulus <= 0:
            raise ValueError("sigma_c branch needs a positive Young's modulus")
        return float(sigma_c) ** 2 / (2.0 * e_modulus)
    if l_f is None or l_f <= 0:
        raise ValueError("g_c branch needs a positive length scale")
    return 3.0 * float(g_c) / (8.0 * l_f * np.sqrt(2.0))


def driving_force(psi_plus, psi_p, constants: FractureConstants):
    """Normalized crack driving force zeta * <(psi+ + psi_p)/psi_c - 1>."""
    if constants.psi_c <= 0:
        raise ValueError("psi_c must be positive")
    total = np.asarray(psi_plus, dtype=float) + np.asarray(psi_p, dtype=float)
    return constants.zeta * np.maximum(total / constants.psi_c - 1.0, 0.0)


def update_history(history_n, d_tilde):
    """Running maximum enforcing crack irreversibility."""
    return np.maximum(np.asarray(history_n, dtype=float),
                      np.asarray(d_tilde, dtype=float))
