"""Procedural scenes: textured planes and spheres, JSON (de)serialization."""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy import ndimage
from scipy.spatial.transform import Rotation

# Rays with t below this (meters along the unnormalized camera ray) are ignored.
NEAR = 1e-6


@dataclass
class TextureSpec:
    """Band-limited value noise, a blank (constant) surface, or a checkerboard.

    ``blank_regions`` lists ``(s0, t0, s1, t1)`` rectangles in surface meters that are
    forced to the mean intensity, producing texture-less patches on a textured surface.
    """

    kind: str = "noise"
    seed: int = 0
    cell: float = 0.05
    contrast: float = 0.8
    blank_regions: list[tuple[float, float, float, float]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.kind not in ("noise", "blank", "checker"):
            raise ValueError(f"unknown texture kind '{self.kind}'")
        if self.cell <= 0:
            raise ValueError(f"texture cell must be positive, got {self.cell}")
        if not 0.0 <= self.contrast <= 1.0:
            raise ValueError(f"texture contrast must be in [0, 1], got {self.contrast}")

    def evaluate(
        self, s: np.ndarray, t: np.ndarray, extent: tuple[float, float], seed: int
    ) -> np.ndarray:
        """Texture intensity in ``[0, 1]`` at surface coordinates ``(s, t)`` (meters)."""
        if self.kind == "blank":
            values = np.ones_like(s)
        elif self.kind == "checker":
            parity = (np.floor(s / self.cell) + np.floor(t / self.cell)) % 2
            values = 0.5 + self.contrast * (parity - 0.5)
        else:
            values = 0.5 + self.contrast * (self._value_noise(s, t, extent, seed) - 0.5)
        for s0, t0, s1, t1 in self.blank_regions:
            inside = (s >= s0) & (s <= s1) & (t >= t0) & (t <= t1)
            values = np.where(inside, 0.5, values)
        return np.clip(values, 0.0, 1.0)

    def _value_noise(
        self, s: np.ndarray, t: np.ndarray, extent: tuple[float, float], seed: int
    ) -> np.ndarray:
        rng = np.random.default_rng([seed, self.seed])
        result = np.zeros_like(s)
        total = 0.0
        # Two octaves of cubic-spline value noise.
        for octave, weight in ((1.0, 0.65), (0.5, 0.35)):
            cell = self.cell * octave
            rows = int(np.ceil(extent[1] / cell)) + 6
            cols = int(np.ceil(extent[0] / cell)) + 6
            lattice = rng.random((rows, cols))
            coords = np.stack(
                [(t + extent[1] / 2.0) / cell + 3.0, (s + extent[0] / 2.0) / cell + 3.0]
            )
            result += weight * ndimage.map_coordinates(lattice, coords, order=3, mode="mirror")
            total += weight
        # Averaged splines concentrate around 0.5; stretch back toward [0, 1].
        return np.clip((result / total - 0.15) / 0.7, 0.0, 1.0)


@dataclass
class Hit:
    """Per-ray nearest intersection: parameter ``t`` (= camera depth), normal and texture coords."""

    t: np.ndarray
    normal: np.ndarray
    s: np.ndarray
    u: np.ndarray


@dataclass
class Plane:
    """Finite rectangle centred at ``center``; local axes are the columns of ``rotation``
    (``s``, ``t`` in-plane, third column the normal)."""

    center: np.ndarray
    size: tuple[float, float]
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    albedo: float = 0.8
    texture: TextureSpec = field(default_factory=TextureSpec)

    kind = "plane"

    def __post_init__(self) -> None:
        self.center = np.asarray(self.center, dtype=np.float64)
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        _check_albedo(self.albedo)
        if self.size[0] <= 0 or self.size[1] <= 0:
            raise ValueError(f"plane size must be positive, got {self.size}")

    @property
    def extent(self) -> tuple[float, float]:
        return (float(self.size[0]), float(self.size[1]))

    def intersect(self, origin: np.ndarray, dirs: np.ndarray) -> Hit:
        axis_s, axis_t, normal = self.rotation[:, 0], self.rotation[:, 1], self.rotation[:, 2]
        denom = dirs @ normal
        parallel = np.abs(denom) < 1e-12
        reach = (self.center - origin) @ normal
        t = np.where(parallel, np.inf, reach / np.where(parallel, 1.0, denom))
        q = origin + np.where(np.isfinite(t), t, 0.0)[:, None] * dirs - self.center
        s_coord = q @ axis_s
        t_coord = q @ axis_t
        inside = (np.abs(s_coord) <= self.size[0] / 2.0) & (np.abs(t_coord) <= self.size[1] / 2.0)
        t = np.where(inside & (t > NEAR), t, np.inf)
        normals = np.broadcast_to(normal, dirs.shape)
        return Hit(t=t, normal=normals, s=s_coord, u=t_coord)


@dataclass
class Sphere:
    center: np.ndarray
    radius: float
    albedo: float = 0.8
    texture: TextureSpec = field(default_factory=TextureSpec)

    kind = "sphere"

    def __post_init__(self) -> None:
        self.center = np.asarray(self.center, dtype=np.float64)
        _check_albedo(self.albedo)
        if self.radius <= 0:
            raise ValueError(f"sphere radius must be positive, got {self.radius}")

    @property
    def extent(self) -> tuple[float, float]:
        return (2.0 * np.pi * self.radius, np.pi * self.radius)

    def intersect(self, origin: np.ndarray, dirs: np.ndarray) -> Hit:
        oc = origin - self.center
        a = np.einsum("ij,ij->i", dirs, dirs)
        b = 2.0 * (dirs @ oc)
        c = oc @ oc - self.radius**2
        disc = b * b - 4.0 * a * c
        root = np.sqrt(np.maximum(disc, 0.0))
        t_near = (-b - root) / (2.0 * a)
        t_far = (-b + root) / (2.0 * a)
        t = np.where(t_near > NEAR, t_near, np.where(t_far > NEAR, t_far, np.inf))
        t = np.where(disc >= 0.0, t, np.inf)
        finite = np.isfinite(t)
        points = origin + np.where(finite, t, 0.0)[:, None] * dirs
        normals = (points - self.center) / self.radius
        lon = np.arctan2(normals[:, 0], normals[:, 2])
        lat = np.arcsin(np.clip(normals[:, 1], -1.0, 1.0))
        return Hit(t=t, normal=normals, s=self.radius * lon, u=self.radius * lat)


Primitive = Plane | Sphere


@dataclass
class Scene:
    """Primitives, lighting, and projector settings (``pattern``) that override the config's."""

    primitives: list[Primitive]
    ambient_light: float = 0.35
    light_direction: np.ndarray = field(default_factory=lambda: np.array([0.3, -0.6, -0.75]))
    pattern: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.primitives:
            raise ValueError("scene needs at least one primitive")
        if not 0.0 <= self.ambient_light <= 1.0:
            raise ValueError(f"ambient_light must be in [0, 1], got {self.ambient_light}")
        direction = np.asarray(self.light_direction, dtype=np.float64)
        self.light_direction = direction / np.linalg.norm(direction)


def _check_albedo(albedo: float) -> None:
    if not 0.0 <= albedo <= 1.0:
        raise ValueError(f"albedo must be in [0, 1], got {albedo}")


def _rotation_from_config(entry: dict[str, Any]) -> np.ndarray:
    if "rotation_deg" in entry:
        return Rotation.from_euler("xyz", entry["rotation_deg"], degrees=True).as_matrix()
    return np.eye(3)


def _texture_from_config(entry: dict[str, Any] | None) -> TextureSpec:
    entry = entry or {}
    return TextureSpec(
        kind=entry.get("kind", "noise"),
        seed=int(entry.get("seed", 0)),
        cell=float(entry.get("cell", 0.05)),
        contrast=float(entry.get("contrast", 0.8)),
        blank_regions=[tuple(r) for r in entry.get("blank_regions", [])],
    )


def scene_from_dict(data: dict[str, Any]) -> Scene:
    primitives: list[Primitive] = []
    for i, entry in enumerate(data.get("primitives", [])):
        kind = entry.get("type")
        texture = _texture_from_config(entry.get("texture"))
        albedo = float(entry.get("albedo", 0.8))
        if kind == "plane":
            primitives.append(
                Plane(
                    center=np.array(entry["center"], dtype=np.float64),
                    size=tuple(entry["size"]),
                    rotation=_rotation_from_config(entry),
                    albedo=albedo,
                    texture=texture,
                )
            )
        elif kind == "sphere":
            primitives.append(
                Sphere(
                    center=np.array(entry["center"], dtype=np.float64),
                    radius=float(entry["radius"]),
                    albedo=albedo,
                    texture=texture,
                )
            )
        else:
            raise ValueError(f"primitive {i}: unknown type {kind!r}")
    return Scene(
        primitives=primitives,
        ambient_light=float(data.get("ambient_light", 0.35)),
        light_direction=np.array(data.get("light_direction", [0.3, -0.6, -0.75]), dtype=np.float64),
        pattern=dict(data.get("pattern", {})),
    )


def scene_to_dict(scene: Scene) -> dict[str, Any]:
    primitives = []
    for prim in scene.primitives:
        texture = {
            "kind": prim.texture.kind,
            "seed": prim.texture.seed,
            "cell": prim.texture.cell,
            "contrast": prim.texture.contrast,
            "blank_regions": [list(r) for r in prim.texture.blank_regions],
        }
        if isinstance(prim, Plane):
            primitives.append(
                {
                    "type": "plane",
                    "center": prim.center.tolist(),
                    "size": list(prim.size),
                    "rotation_deg": Rotation.from_matrix(prim.rotation)
                    .as_euler("xyz", degrees=True)
                    .tolist(),
                    "albedo": prim.albedo,
                    "texture": texture,
                }
            )
        else:
            primitives.append(
                {
                    "type": "sphere",
                    "center": prim.center.tolist(),
                    "radius": prim.radius,
                    "albedo": prim.albedo,
                    "texture": texture,
                }
            )
    return {
        "primitives": primitives,
        "ambient_light": scene.ambient_light,
        "light_direction": scene.light_direction.tolist(),
        "pattern": scene.pattern,
    }


def load_scene(path: str | Path) -> Scene:
    with open(path) as f:
        return scene_from_dict(json.load(f))


def save_scene(scene: Scene, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(scene_to_dict(scene), f, indent=2)
