import numpy as np
import pytest

from secindex import Realization


@pytest.fixture
def ex_a() -> Realization:
    """Redundant-sensor plant: unstable diagonal A, Vandermonde C, Da = I."""
    return Realization(
        A=np.diag([2.0, 3.0, 4.0]),
        Bd=np.zeros((3, 0)),
        Ba=np.zeros((3, 3)),
        C=[[1, 1, 1], [1, 2, 4], [1, 3, 9]],
        Dd=np.zeros((3, 0)),
        Da=np.eye(3),
    )


@pytest.fixture
def ex_b() -> Realization:
    """Same sensor structure but Schur dynamics."""
    return Realization(
        A=np.diag([0.2, 0.3, 0.4]),
        Bd=np.zeros((3, 0)),
        Ba=np.zeros((3, 3)),
        C=[[1, 1, 1], [1, 2, 4], [1, 3, 9]],
        Dd=np.zeros((3, 0)),
        Da=np.eye(3),
    )


@pytest.fixture
def ex_c() -> Realization:
    """Scalar plant where one attack column duplicates the disturbance."""
    return Realization(
        A=[[0.0]],
        Bd=[[1.0]],
        Ba=[[1.0, 0.0]],
        C=[[1.0]],
        Dd=[[0.0]],
        Da=[[0.0, 1.0]],
    )
