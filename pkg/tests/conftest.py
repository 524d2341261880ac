import numpy as np
import pytest

from fractop import forward as fwd
from fractop import material as mat
from fractop import mesh as fm


@pytest.fixture
def table_ductile_params():
    """Constants of the ductile benchmark column of the parameter table."""
    return mat.MaterialParams(bulk_modulus=175.0, shear_modulus=80.76,
                              hardening_modulus=200.0, yield_stress=543.0,
                              psi_c=13.0, zeta=10.0, eta_f=1e-6,
                              kappa=1e-8, l_f=0.18)


@pytest.fixture
def soft_elastic_params():
    return mat.MaterialParams(bulk_modulus=17.3, shear_modulus=8.0,
                              psi_c=1e9, l_f=0.3)


def make_cantilever(nx=10, ny=5, psi_c=1e9, l_f=0.2):
    """Small elastic cantilever: clamped left edge, tip band driven in y."""
    params = mat.MaterialParams(bulk_modulus=17.3, shear_modulus=8.0,
                                psi_c=psi_c, l_f=l_f)
    mesh = fm.build_structured_mesh(2, [nx, ny], [2.0, 1.0])
    fm.tag_box(mesh, [(0, 0), (0, 1)], "clamp")
    fm.tag_box(mesh, [(2, 2), (0.3, 0.7)], "tip")
    return fwd.Problem(mesh=mesh, params=params,
                       supports=[("clamp", (0, 1))], driven=("tip", (1,)))


def make_bend_beam(psi_c=5e-4, eta_f=1e-4, l_f=0.6, yield_stress=1e16,
                   hardening=0.0):
    """Desk-scale three-point-bend analog: 20x8 beam, edge supports,
    driven band on top center."""
    params = mat.MaterialParams(bulk_modulus=17.3, shear_modulus=8.0,
                                hardening_modulus=hardening,
                                yield_stress=yield_stress, psi_c=psi_c,
                                zeta=1.0, eta_f=eta_f, l_f=l_f)
    mesh = fm.build_structured_mesh(2, [20, 8], [8.0, 2.0])
    fm.tag_box(mesh, [(0, 0), (0, 2)], "left")
    fm.tag_box(mesh, [(8, 8), (0, 2)], "right")
    fm.tag_box(mesh, [(3, 5), (2, 2)], "top")
    return fwd.Problem(mesh=mesh, params=params,
                       supports=[("left", (0, 1)), ("right", (1,))],
                       driven=("top", (1,)))


@pytest.fixture
def cantilever():
    return make_cantilever()


@pytest.fixture
def bend_beam():
    return make_bend_beam()


def fields_at(problem, u=None, d=None, phi=None):
    fields = problem.initial_fields(phi)
    if u is not None:
        fields.u = np.asarray(u, dtype=float).copy()
    if d is not None:
        fields.d = np.asarray(d, dtype=float).copy()
    return fields
