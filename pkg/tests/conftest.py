"""Shared fixtures and scene-building helpers for the test suite."""

import numpy as np
import pytest

from adaptsel import adapter as ad
from adaptsel import geometry as geo
from adaptsel import scene as sc

CONTROLLER = np.array([0.2, 1.1, 0.1])
HMD = np.array([0.0, 1.6, 0.0])


def make_pointer(direction=(0.0, 0.0, 1.0), position=CONTROLLER, **overrides):
    fields = dict(
        controller_position=np.asarray(position, dtype=float),
        pointing_direction=geo.normalize(np.asarray(direction, dtype=float)),
        hmd_position=HMD.copy(),
        hmd_forward=np.array([0.0, 0.0, 1.0]),
        trigger=False,
        trackpad_delta=0.0,
        timestamp=0.0,
    )
    fields.update(overrides)
    return sc.PointerState(**fields)


def sphere(target_id, position, radius, selectable=True):
    return sc.Target(
        id=target_id,
        shape="sphere",
        position=np.asarray(position, dtype=float),
        rotation=np.array([1.0, 0.0, 0.0, 0.0]),
        scale=np.array([radius, radius, radius]),
        selectable=selectable,
    )


def sphere_scene(entries):
    """Scene of spheres from (id, position, radius) entries."""
    return sc.Scene(targets=tuple(sphere(i, p, r) for i, p, r in entries))


def context_for(scene, direction=(0.0, 0.0, 1.0), config=None, **pointer_kw):
    config = config or ad.study_preset()
    pointer = make_pointer(direction, **pointer_kw)
    return sc.extract_context(
        scene, pointer, arm=config.arm, r_c=config.r_c, dominant=config.dominant
    )


@pytest.fixture
def study_config():
    return ad.study_preset()


@pytest.fixture
def app_config():
    return ad.application_preset()


@pytest.fixture
def rng():
    return np.random.default_rng(20240824)
