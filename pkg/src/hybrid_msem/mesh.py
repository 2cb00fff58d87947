"""Structured quadrilateral meshes of a box, optionally curved.

Elements are numbered ``e = ix + kx * iy``. The curved mesh applies one global
smooth deformation after the affine element maps,

    x = X + c * Lx * sin(2 pi s) sin(2 pi t)
    y = Y + c * Ly * sin(2 pi s) sin(2 pi t)

with ``(s, t)`` the box-normalised coordinates of ``(X, Y)``. It vanishes on
the boundary, so the domain is preserved and shared edges are traced
identically by both neighbours.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import numpy.typing as npt

from .errors import ConfigError, MeshDegeneracyError
from .polybasis import gauss_rule

FloatArray = npt.NDArray[np.float64]

Side = Literal["left", "right", "bottom", "top"]
SIDES: tuple[Side, ...] = ("left", "right", "bottom", "top")


@dataclass(frozen=True)
class MeshConfig:
    kx: int
    ky: int
    domain: tuple[float, float, float, float] = (0.0, 1.0, 0.0, 1.0)
    deformation: Literal["orthogonal", "curved"] = "orthogonal"
    amplitude: float = 0.15

    def __post_init__(self):
        if int(self.kx) != self.kx or int(self.ky) != self.ky or self.kx < 1 or self.ky < 1:
            raise ConfigError(f"element counts must be positive integers, got {self.kx}x{self.ky}")
        x0, x1, y0, y1 = self.domain
        if not (x1 > x0 and y1 > y0):
            raise ConfigError(f"empty domain {self.domain}")
        if self.deformation not in ("orthogonal", "curved"):
            raise ConfigError(f"unknown mesh kind {self.deformation!r}")
        if self.amplitude < 0:
            raise ConfigError(f"curvature amplitude must be >= 0, got {self.amplitude}")

    @property
    def n_elements(self) -> int:
        return self.kx * self.ky

    @property
    def c(self) -> float:
        return self.amplitude if self.deformation == "curved" else 0.0


@dataclass(frozen=True)
class ElementMap:
    """Map from the reference square [-1, 1]^2 onto one element."""

    index: int
    ix: int
    iy: int
    x_range: tuple[float, float]
    y_range: tuple[float, float]
    domain: tuple[float, float, float, float]
    c: float = 0.0

    def _affine(self, xi, eta):
        (a, b), (p, q) = self.x_range, self.y_range
        return (a + b) / 2 + (b - a) / 2 * xi, (p + q) / 2 + (q - p) / 2 * eta

    def map(self, xi: npt.ArrayLike, eta: npt.ArrayLike) -> tuple[FloatArray, FloatArray]:
        xi, eta = np.broadcast_arrays(np.asarray(xi, float), np.asarray(eta, float))
        X, Y = self._affine(xi, eta)
        if self.c == 0.0:
            return X, Y
        x0, x1, y0, y1 = self.domain
        lx, ly = x1 - x0, y1 - y0
        bump = self.c * np.sin(2 * np.pi * (X - x0) / lx) * np.sin(2 * np.pi * (Y - y0) / ly)
        return X + lx * bump, Y + ly * bump

    def jacobian(self, xi: npt.ArrayLike, eta: npt.ArrayLike) -> tuple[FloatArray, FloatArray]:
        """Return ``J[..., r, s] = d(x, y)_r / d(xi, eta)_s`` and ``det J``."""
        xi, eta = np.broadcast_arrays(np.asarray(xi, float), np.asarray(eta, float))
        (a, b), (p, q) = self.x_range, self.y_range
        hx, hy = (b - a) / 2, (q - p) / 2
        J = np.zeros(xi.shape + (2, 2))
        J[..., 0, 0] = hx
        J[..., 1, 1] = hy
        if self.c != 0.0:
            X, Y = self._affine(xi, eta)
            x0, x1, y0, y1 = self.domain
            lx, ly = x1 - x0, y1 - y0
            s, t = 2 * np.pi * (X - x0) / lx, 2 * np.pi * (Y - y0) / ly
            # gradient of the bump with respect to (X, Y), chained with the affine map
            gX = self.c * 2 * np.pi / lx * np.cos(s) * np.sin(t) * hx
            gY = self.c * 2 * np.pi / ly * np.sin(s) * np.cos(t) * hy
            J[..., 0, 0] += lx * gX
            J[..., 0, 1] += lx * gY
            J[..., 1, 0] += ly * gX
            J[..., 1, 1] += ly * gY
        det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        return J, det


def jacobian(element: ElementMap, xi: float, eta: float) -> tuple[FloatArray, float]:
    J, det = element.jacobian(xi, eta)
    return J, float(det)


@dataclass(frozen=True)
class Mesh:
    config: MeshConfig
    elements: tuple[ElementMap, ...] = field(repr=False)

    @property
    def kx(self) -> int:
        return self.config.kx

    @property
    def ky(self) -> int:
        return self.config.ky

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def element_index(self, ix: int, iy: int) -> int:
        return ix + self.kx * iy

    def neighbor(self, e: int, side: Side) -> int | None:
        el = self.elements[e]
        ix, iy = el.ix, el.iy
        ix, iy = {
            "left": (ix - 1, iy),
            "right": (ix + 1, iy),
            "bottom": (ix, iy - 1),
            "top": (ix, iy + 1),
        }[side]
        if 0 <= ix < self.kx and 0 <= iy < self.ky:
            return self.element_index(ix, iy)
        return None

    def boundary_sides(self, e: int) -> list[Side]:
        return [s for s in SIDES if self.neighbor(e, s) is None]

    @property
    def n_interior_interfaces(self) -> int:
        kx, ky = self.kx, self.ky
        return ky * (kx - 1) + kx * (ky - 1)

    def check_jacobians(self, points: npt.ArrayLike) -> None:
        """Raise if ``det J <= 0`` at any tensor-product point of ``points``."""
        pts = np.asarray(points, float)
        XI, ETA = np.meshgrid(pts, pts, indexing="ij")
        for el in self.elements:
            _, det = el.jacobian(XI, ETA)
            if np.min(det) <= 0.0:
                k = np.unravel_index(np.argmin(det), det.shape)
                raise MeshDegeneracyError(
                    f"element {el.index} (ix={el.ix}, iy={el.iy}) has det J = "
                    f"{det[k]:.3e} at (xi, eta) = ({XI[k]:.4f}, {ETA[k]:.4f})",
                    element=el.index,
                )


def build_mesh(config: MeshConfig, check_points: npt.ArrayLike | None = None) -> Mesh:
    """Partition the box into ``kx * ky`` elements and validate the Jacobians.

    ``check_points`` are the 1D reference coordinates at which ``det J > 0`` is
    enforced; the default is a 12-point Gauss rule.
    """
    x0, x1, y0, y1 = config.domain
    xs = np.linspace(x0, x1, config.kx + 1)
    ys = np.linspace(y0, y1, config.ky + 1)
    elements = []
    for iy in range(config.ky):
        for ix in range(config.kx):
            elements.append(
                ElementMap(
                    index=ix + config.kx * iy,
                    ix=ix,
                    iy=iy,
                    x_range=(float(xs[ix]), float(xs[ix + 1])),
                    y_range=(float(ys[iy]), float(ys[iy + 1])),
                    domain=tuple(float(v) for v in config.domain),
                    c=float(config.c),
                )
            )
    mesh = Mesh(config, tuple(elements))
    if check_points is None:
        check_points = gauss_rule(12)[0]
    mesh.check_jacobians(check_points)
    return mesh
