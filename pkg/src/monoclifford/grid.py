"""Voxel domains, multivector-valued grid functions and their L2 structure."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from os import PathLike
from pathlib import Path
from typing import Callable, Mapping

import numpy as np
from scipy import ndimage

from .algebra import Multivector, grades, paravector_blades, vector_blade


@dataclass(frozen=True, eq=False)
class GridDomain:
    """Axis-aligned box cut into ``N`` cells per axis; ``mask`` marks the voxels of G."""

    n: int
    box: tuple[tuple[float, float], ...]
    N: int
    mask: np.ndarray

    def __post_init__(self):
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        if len(box) != self.n:
            raise ValueError("box must give one [low, high] pair per axis")
        if any(not hi > lo for lo, hi in box):
            raise ValueError("degenerate box: every axis needs low < high")
        if self.N < 2:
            raise ValueError("need at least 2 cells per axis")
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != (self.N,) * self.n:
            raise ValueError(f"mask shape {mask.shape} does not match N={self.N}, n={self.n}")
        if not mask.any():
            raise ValueError("empty mask: the domain contains no voxels")
        mask = mask.copy()
        mask.setflags(write=False)
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "mask", mask)

    @cached_property
    def lo(self) -> np.ndarray:
        return np.array([b[0] for b in self.box])

    @cached_property
    def h(self) -> np.ndarray:
        return np.array([(hi - lo) / self.N for lo, hi in self.box])

    @property
    def voxel_volume(self) -> float:
        return float(np.prod(self.h))

    @cached_property
    def indices(self) -> np.ndarray:
        """Integer lattice positions of the masked voxels, in C order."""
        return np.argwhere(self.mask)

    @property
    def size(self) -> int:
        return len(self.indices)

    @property
    def volume(self) -> float:
        return self.size * self.voxel_volume

    @cached_property
    def centers(self) -> np.ndarray:
        return self.lo + (self.indices + 0.5) * self.h

    @cached_property
    def index_grid(self) -> np.ndarray:
        grid = np.full(self.mask.shape, -1, dtype=np.int64)
        grid[self.mask] = np.arange(self.size)
        return grid

    def lattice_offset(self, other: "GridDomain") -> np.ndarray:
        """Integer shift taking ``other``'s lattice positions into this domain's lattice."""
        if other.n != self.n or not np.allclose(other.h, self.h, rtol=1e-12):
            raise ValueError("domains do not share a lattice")
        shift = (other.lo - self.lo) / self.h
        rounded = np.round(shift)
        if not np.allclose(shift, rounded, atol=1e-8):
            raise ValueError("domains do not share a lattice")
        return rounded.astype(np.int64)

    def locate(self, other: "GridDomain") -> np.ndarray:
        """Row of each voxel of ``other`` inside this domain (-1 if absent)."""
        pos = other.indices + self.lattice_offset(other)
        inside = np.all((pos >= 0) & (pos < self.N), axis=1)
        out = np.full(len(pos), -1, dtype=np.int64)
        out[inside] = self.index_grid[tuple(pos[inside].T)]
        return out

    def same_as(self, other: "GridDomain") -> bool:
        return (
            self is other
            or (
                self.n == other.n
                and self.N == other.N
                and self.box == other.box
                and np.array_equal(self.mask, other.mask)
            )
        )

    def distance_to_boundary(self) -> np.ndarray:
        """Cells from each voxel to the nearest voxel outside the mask (1 on the rim)."""
        padded = np.pad(self.mask, 1)
        dist = ndimage.distance_transform_cdt(padded, metric="taxicab")
        inner = tuple(slice(1, -1) for _ in range(self.n))
        return dist[inner][self.mask]


def make_domain(box, N: int, shape_spec="box") -> GridDomain:
    """Build a voxel domain.

    ``shape_spec`` is ``"box"``, ``"ball"`` (largest ball centred in the box),
    a mapping ``{"kind": "ball", "center": ..., "radius": ...}``, or a path to
    a ``.npy`` boolean mask of shape ``(N,)*n``.
    """
    box = tuple(tuple(b) for b in box)
    n = len(box)
    lo = np.array([b[0] for b in box], dtype=float)
    hi = np.array([b[1] for b in box], dtype=float)
    if np.any(hi <= lo):
        raise ValueError("degenerate box: every axis needs low < high")
    if N < 2:
        raise ValueError("need at least 2 cells per axis")
    h = (hi - lo) / N
    axes = [lo[k] + (np.arange(N) + 0.5) * h[k] for k in range(n)]
    centers = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    if isinstance(shape_spec, (str, PathLike)) and str(shape_spec) in ("box", "full", "full-box"):
        mask = np.ones((N,) * n, dtype=bool)
    elif isinstance(shape_spec, str) and shape_spec == "ball":
        mask = _ball_mask(centers, (lo + hi) / 2.0, float(np.min(hi - lo)) / 2.0)
    elif isinstance(shape_spec, Mapping):
        kind = shape_spec.get("kind", "ball")
        if kind != "ball":
            raise ValueError(f"unknown shape kind {kind!r}")
        center = np.asarray(shape_spec.get("center", (lo + hi) / 2.0), dtype=float)
        radius = float(shape_spec.get("radius", np.min(hi - lo) / 2.0))
        mask = _ball_mask(centers, center, radius)
    else:
        path = Path(shape_spec)
        if not path.exists():
            raise ValueError(f"unknown shape spec {shape_spec!r}")
        mask = np.load(path).astype(bool)
    return GridDomain(n, box, N, mask)


def _ball_mask(centers, center, radius):
    return np.sum((centers - center) ** 2, axis=-1) < radius**2


def extend_domain(domain: GridDomain, pad: int, layers: int | None = None) -> GridDomain:
    """Grow the box by ``pad`` cells per side and dilate the mask by ``layers`` (default ``pad``).

    Dilation uses axis neighbours, so every original voxel sees both axis
    neighbours after one layer.
    """
    layers = pad if layers is None else layers
    if layers > pad:
        raise ValueError("cannot dilate beyond the padding")
    h = domain.h
    box = tuple((lo - pad * hk, hi + pad * hk) for (lo, hi), hk in zip(domain.box, h))
    mask = np.pad(domain.mask, pad)
    if layers:
        mask = ndimage.binary_dilation(mask, iterations=layers)
    return GridDomain(domain.n, box, domain.N + 2 * pad, mask)


@dataclass(frozen=True, eq=False)
class Field:
    """Multivector per masked voxel: ``values[i, I]`` is the ``e_I`` coefficient at voxel ``i``."""

    domain: GridDomain
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        expected = (self.domain.size, 1 << self.domain.n)
        if v.shape != expected:
            raise ValueError(f"field values must have shape {expected}, got {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.domain.n

    @classmethod
    def zeros(cls, domain: GridDomain) -> "Field":
        return cls(domain, np.zeros((domain.size, 1 << domain.n)))

    @classmethod
    def constant(cls, domain: GridDomain, value: Multivector) -> "Field":
        return cls(domain, np.broadcast_to(value.coeffs, (domain.size, value.coeffs.size)))

    @classmethod
    def from_components(cls, domain: GridDomain, comps: Mapping[int, np.ndarray]) -> "Field":
        """Build from ``{blade_mask: per-voxel values}``."""
        v = np.zeros((domain.size, 1 << domain.n), dtype=complex)
        for blade, arr in comps.items():
            v[:, blade] = arr
        return cls(domain, v)

    @classmethod
    def from_function(cls, domain: GridDomain, fn: Callable[[np.ndarray], np.ndarray]) -> "Field":
        """``fn`` maps the ``(m, n)`` centre array to ``(m, 2**n)`` coefficients."""
        return cls(domain, fn(domain.centers))

    @classmethod
    def vector(cls, domain: GridDomain, comps: np.ndarray) -> "Field":
        """Grade-1 field from an ``(m, n)`` array of components."""
        comps = np.asarray(comps)
        return cls.from_components(domain, {vector_blade(j + 1): comps[:, j] for j in range(domain.n)})

    @classmethod
    def paravector(cls, domain: GridDomain, comps: np.ndarray) -> "Field":
        """Paravector field from an ``(m, n+1)`` array (scalar first)."""
        comps = np.asarray(comps)
        blades = paravector_blades(domain.n)
        return cls.from_components(domain, {b: comps[:, k] for k, b in enumerate(blades)})

    def component(self, blade: int) -> np.ndarray:
        return self.values[:, blade]

    def vector_part(self) -> np.ndarray:
        return self.values[:, [vector_blade(j + 1) for j in range(self.dim)]]

    def paravector_part(self) -> np.ndarray:
        return self.values[:, list(paravector_blades(self.dim))]

    def at(self, i: int) -> Multivector:
        return Multivector(self.dim, self.values[i])

    def _check(self, other: "Field"):
        if not self.domain.same_as(other.domain):
            raise ValueError("fields live on different domains")

    def __add__(self, other: "Field") -> "Field":
        self._check(other)
        return Field(self.domain, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        self._check(other)
        return Field(self.domain, self.values - other.values)

    def __neg__(self) -> "Field":
        return Field(self.domain, -self.values)

    def __mul__(self, scalar) -> "Field":
        return Field(self.domain, self.values * scalar)

    __rmul__ = __mul__

    def restrict(self, sub: GridDomain) -> "Field":
        """Values on the voxels of ``sub``, which must all lie in this field's domain."""
        rows = self.domain.locate(sub)
        if np.any(rows < 0):
            raise ValueError("sub-domain is not contained in the field's domain")
        return Field(sub, self.values[rows])

    def extend_by_zero(self, sup: GridDomain) -> "Field":
        rows = sup.locate(self.domain)
        if np.any(rows < 0):
            raise ValueError("field's domain is not contained in the target domain")
        v = np.zeros((sup.size, self.values.shape[1]), dtype=complex)
        v[rows] = self.values
        return Field(sup, v)


def l2_inner(u: Field, v: Field) -> float:
    """``(u, v) = Re int tilde(u) v dG`` by the midpoint rule on voxel centres."""
    u._check(v)
    pointwise = np.sum((np.conj(u.values) * v.values).real, axis=1)
    return float(np.sum(pointwise) * u.domain.voxel_volume)


def l2_norm(u: Field) -> float:
    return float(np.sqrt(max(l2_inner(u, u), 0.0)))


def field_map(u: Field, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> Field:
    """Apply ``fn(centers, values) -> values`` voxelwise (vectorized over voxels)."""
    return Field(u.domain, fn(u.domain.centers, u.values))


def off_subspace_ratio(u: Field, blades) -> float:
    """Relative L2 size of the components outside ``blades`` (imaginary parts count as inside)."""
    keep = np.zeros(u.values.shape[1], dtype=bool)
    keep[list(blades)] = True
    total = np.linalg.norm(u.values)
    if total == 0:
        return 0.0
    return float(np.linalg.norm(u.values[:, ~keep]) / total)


def grade_content(u: Field) -> np.ndarray:
    """L2 mass per grade (index = grade)."""
    g = grades(u.dim)
    return np.array([np.linalg.norm(u.values[:, g == k]) for k in range(u.dim + 1)])


def write_field_csv(u: Field, path) -> None:
    n = u.dim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{k + 1}" for k in range(n)] + ["blade_mask", "re", "im"])
        for i, x in enumerate(u.domain.centers):
            for blade in np.flatnonzero(u.values[i]):
                c = u.values[i, blade]
                w.writerow([f"{xk:.17g}" for xk in x] + [int(blade), f"{c.real:.17g}", f"{c.imag:.17g}"])


def read_field_csv(path, domain: GridDomain) -> Field:
    n = domain.n
    values = np.zeros((domain.size, 1 << n), dtype=complex)
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != [f"x{k + 1}" for k in range(n)] + ["blade_mask", "re", "im"]:
            raise ValueError(f"unexpected CSV header {header}")
        for row in r:
            x = np.array([float(s) for s in row[:n]])
            pos = np.floor((x - domain.lo) / domain.h).astype(int)
            if np.any(pos < 0) or np.any(pos >= domain.N) or domain.index_grid[tuple(pos)] < 0:
                raise ValueError(f"point {x} is not a voxel centre of the domain")
            values[domain.index_grid[tuple(pos)], int(row[n])] = complex(float(row[n + 1]), float(row[n + 2]))
    return Field(domain, values)


def write_vtk(u: Field, path, name: str = "field") -> None:
    """Legacy-VTK ASCII structured points with the real vector part of an n=3 field."""
    d = u.domain
    if d.n != 3:
        raise ValueError("VTK export is only available for n = 3")
    N = d.N
    vec = np.zeros((N, N, N, 3))
    vec[d.mask] = u.vector_part().real
    origin = d.lo + 0.5 * d.h
    lines = [
        "# vtk DataFile Version 3.0",
        name,
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {N} {N} {N}",
        "ORIGIN " + " ".join(f"{o:.17g}" for o in origin),
        "SPACING " + " ".join(f"{s:.17g}" for s in d.h),
        f"POINT_DATA {N**3}",
        f"VECTORS {name} double",
    ]
    # VTK orders points with x fastest
    for k in range(N):
        for j in range(N):
            for i in range(N):
                lines.append(" ".join(f"{c:.17g}" for c in vec[i, j, k]))
    lines += ["SCALARS mask int 1", "LOOKUP_TABLE default"]
    for k in range(N):
        for j in range(N):
            for i in range(N):
                lines.append(str(int(d.mask[i, j, k])))
    Path(path).write_text("\n".join(lines) + "\n")
