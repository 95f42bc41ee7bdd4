"""Shared fixtures: catalogue models, test meshes and the default gripper."""

import numpy as np
import pytest

from src.grasping.gripper import GripperModel
from src.mesh import primitives
from src.objects import get_object_model


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope='session')
def unit_cube():
    return primitives.box((1.0, 1.0, 1.0), name='unit_cube')


@pytest.fixture(scope='session')
def bracket_mesh():
    return primitives.l_bracket(length=0.050, width=0.025, height=0.030, thickness=0.006)


@pytest.fixture(scope='session')
def gripper():
    return GripperModel()


@pytest.fixture(scope='session')
def box_model():
    return get_object_model('box')


@pytest.fixture(scope='session')
def cube_model():
    return get_object_model('cube')


@pytest.fixture(scope='session')
def cylinder_model():
    return get_object_model('cylinder')


@pytest.fixture(scope='session')
def bracket_model():
    return get_object_model('bracket')
