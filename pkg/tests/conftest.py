import numpy as np
import pytest

from cbi.model import CbiParams, JumpMeasure


def make_fix_a() -> CbiParams:
    """d=1, c=1, beta=1, B=0, no jumps: v(t,lam) = lam/(1+lam t)."""
    return CbiParams.no_jumps(c=[1.0], beta=[1.0], B=[[0.0]])


def make_d2_critical() -> CbiParams:
    """d=2 critical fixture: btilde = [[-1,1],[1,-1]], u_right = (1/2,1/2)."""
    return CbiParams.no_jumps(c=[1.0, 1.0], beta=[1.0, 0.0],
                              B=[[-1.0, 1.0], [1.0, -1.0]])


def make_jump_mixed() -> CbiParams:
    """d=1 with immigration and branching atoms (subcritical)."""
    return CbiParams(
        d=1, c=[0.5], beta=[0.3], B=[[-1.0]],
        nu=JumpMeasure.from_atoms([(0.7, [1.0]), (0.2, [0.4])]),
        mu=(JumpMeasure.from_atoms([(0.5, [2.0]), (0.3, [0.5])]),))


def make_jump_d2() -> CbiParams:
    """d=2 with atoms in every measure; exercises cross terms."""
    return CbiParams(
        d=2, c=[0.3, 0.6], beta=[0.2, 0.1], B=[[-0.8, 0.4], [0.3, -0.9]],
        nu=JumpMeasure.from_atoms([(0.5, [0.5, 0.2])]),
        mu=(JumpMeasure.from_atoms([(0.4, [1.0, 0.3])]),
            JumpMeasure.from_atoms([(0.6, [0.2, 0.7]), (0.1, [2.0, 1.0])])))


def make_branching_jump() -> CbiParams:
    """Pure branching (no immigration) with a jump atom."""
    return CbiParams(
        d=1, c=[1.0], beta=[0.0], B=[[-0.5]],
        mu=(JumpMeasure.from_atoms([(0.4, [1.5])]),))


ALL_FIXTURES = {
    "fix_a": make_fix_a,
    "d2_critical": make_d2_critical,
    "jump_mixed": make_jump_mixed,
    "jump_d2": make_jump_d2,
    "branching_jump": make_branching_jump,
}


@pytest.fixture
def fix_a() -> CbiParams:
    return make_fix_a()


@pytest.fixture
def d2_critical() -> CbiParams:
    return make_d2_critical()


@pytest.fixture
def jump_mixed() -> CbiParams:
    return make_jump_mixed()


@pytest.fixture
def jump_d2() -> CbiParams:
    return make_jump_d2()


@pytest.fixture
def branching_jump() -> CbiParams:
    return make_branching_jump()


def assert_close(a, b, tol, msg=""):
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    err = float(np.max(np.abs(a - b)))
    assert err <= tol, f"{msg} max|diff| = {err:.3e} > {tol:.1e}"
