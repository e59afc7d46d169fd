"""Built-in desk-scale scenes used by the CLI, the scripts and the tests."""

from collections.abc import Callable

import numpy as np
from scipy.spatial.transform import Rotation

from helmholtz.simulation.scene import Plane, Scene, Sphere, TextureSpec


def textured_wall(distance: float = 2.0, seed: int = 0) -> Scene:
    return Scene(
        [
            Plane(
                center=np.array([0.0, 0.0, distance]),
                size=(40.0, 40.0),
                texture=TextureSpec(kind="noise", seed=seed, cell=0.04),
            )
        ]
    )


def blank_wall(distance: float = 2.0, albedo: float = 0.6) -> Scene:
    return Scene(
        [
            Plane(
                center=np.array([0.0, 0.0, distance]),
                size=(40.0, 40.0),
                albedo=albedo,
                texture=TextureSpec(kind="blank"),
            )
        ]
    )


def sphere_before_wall(sphere_z: float = 1.2, radius: float = 0.25, wall_z: float = 2.5) -> Scene:
    return Scene(
        [
            Plane(
                center=np.array([0.0, 0.0, wall_z]), size=(40.0, 40.0), texture=TextureSpec(seed=1)
            ),
            Sphere(
                center=np.array([0.0, 0.0, sphere_z]),
                radius=radius,
                texture=TextureSpec(seed=2, cell=0.03),
            ),
        ]
    )


def occluder_scene() -> Scene:
    """Blank background wall behind a textured panel that hides part of it from the right camera."""
    return Scene(
        [
            Plane(
                center=np.array([0.0, 0.0, 3.0]),
                size=(40.0, 40.0),
                albedo=0.5,
                texture=TextureSpec(kind="blank"),
            ),
            Plane(
                center=np.array([0.25, 0.0, 0.8]),
                size=(0.4, 2.0),
                texture=TextureSpec(seed=3, cell=0.02),
            ),
        ]
    )


def occluded_floor_scene() -> Scene:
    """Camera 1.8 m above a textured floor, a textured back wall at 6.5 m, a panel and a sphere.

    The floor starts about 3.6 m ahead, so with the stereo working range of
    ``configs/occluded_floor.yaml`` only the panel and the sphere get SGM depth. Floor and
    wall carry passive texture for landmark tracking. The panel at 1 m hides a strip of the
    wall and floor from the right camera.
    """
    floor_rotation = Rotation.from_euler("x", 90, degrees=True).as_matrix()
    return Scene(
        [
            Plane(
                center=np.array([0.0, 1.8, 5.0]),
                size=(12.0, 12.0),
                rotation=floor_rotation,
                albedo=0.5,
                texture=TextureSpec(seed=3, cell=0.25),
            ),
            Plane(
                center=np.array([0.0, -0.9, 6.5]),
                size=(12.0, 5.4),
                texture=TextureSpec(seed=4, cell=0.14),
            ),
            Plane(
                center=np.array([-0.15, 0.2, 1.0]),
                size=(0.4, 0.5),
                texture=TextureSpec(seed=5, cell=0.03),
            ),
            Sphere(
                center=np.array([0.7, 0.3, 2.4]),
                radius=0.3,
                texture=TextureSpec(seed=6, cell=0.04),
            ),
        ],
        ambient_light=0.4,
    )


BUILTIN_SCENES: dict[str, Callable[[], Scene]] = {
    "textured_wall": textured_wall,
    "blank_wall": blank_wall,
    "sphere": sphere_before_wall,
    "occluder": occluder_scene,
    "occluded_floor": occluded_floor_scene,
}


def builtin_scene(name: str) -> Scene:
    if name not in BUILTIN_SCENES:
        raise ValueError(f"unknown scene '{name}', choose from {sorted(BUILTIN_SCENES)}")
    return BUILTIN_SCENES[name]()
