"""Uniform rectangular array geometry, virtual sub-array partitions, and weights.

A partition assigns every element of the grid to a block and a sub-array and
tracks a per-element on/off mask (1-bit amplitude control). Blocks tile the
array contiguously; within a block, sub-arrays interleave so that elements of
one sub-array form a regular lattice with effective spacing
``interleave * spacing``. Transitional sub-arrays straddle a block boundary and
are built by halving two donor sub-arrays from adjacent blocks.

All values are immutable; constructors return new objects.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ArrayGeometry",
    "ArrayPartition",
    "WeightVector",
    "build_ura",
    "build_grid",
    "partition_multiblock",
    "make_transitional",
    "quantize_phases",
    "REGULAR",
    "TRANSITIONAL_H",
    "TRANSITIONAL_V",
]

REGULAR = "regular"
TRANSITIONAL_H = "transitional-horizontal"
TRANSITIONAL_V = "transitional-vertical"

_NORM_TOL = 1e-12


@dataclass(frozen=True)
class ArrayGeometry:
    """Element grid: counts per axis, physical spacing and wavelength in meters.

    Element (x, y) sits at physical position (x*spacing, y*spacing).
    """

    nx: int
    ny: int
    spacing: float
    wavelength: float

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError("element counts must be >= 1")
        if self.spacing <= 0 or self.wavelength <= 0:
            raise ValueError("spacing and wavelength must be positive")

    @property
    def n_elements(self) -> int:
        return self.nx * self.ny

    @property
    def n_side(self) -> int:
        if self.nx != self.ny:
            raise ValueError("array is not square")
        return self.nx

    @property
    def spacing_wavelengths(self) -> float:
        return self.spacing / self.wavelength

    def element_positions(self) -> tuple[np.ndarray, np.ndarray]:
        """Physical (x, y) coordinate grids in meters, shape (nx, ny)."""
        xs, ys = np.meshgrid(np.arange(self.nx), np.arange(self.ny), indexing="ij")
        return xs * self.spacing, ys * self.spacing


def build_ura(n_side: int, spacing: float, wavelength: float) -> ArrayGeometry:
    """Square uniform rectangular array with n_side^2 elements."""
    if n_side < 1:
        raise ValueError("n_side must be >= 1")
    return ArrayGeometry(n_side, n_side, spacing, wavelength)


def build_grid(nx: int, ny: int, spacing: float, wavelength: float) -> ArrayGeometry:
    """Rectangular element grid; the partition machinery is shape-agnostic."""
    return ArrayGeometry(nx, ny, spacing, wavelength)


@dataclass(frozen=True, eq=False)
class ArrayPartition:
    """Assignment of every element to a block, a sub-array, and an on/off mask."""

    geometry: ArrayGeometry
    block_id: np.ndarray
    subarray_id: np.ndarray
    active: np.ndarray
    subarray_kind: dict[int, str]
    blocks_x: int
    blocks_y: int
    interleave: int
    _elements: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for name in ("block_id", "subarray_id", "active"):
            arr = getattr(self, name)
            if arr.shape != (self.geometry.nx, self.geometry.ny):
                raise ValueError(f"{name} shape {arr.shape} does not match geometry")
            arr.setflags(write=False)

    def subarray_ids(self) -> list[int]:
        """Ids of sub-arrays that still own active elements, ascending."""
        live = np.unique(self.subarray_id[self.active])
        return [int(i) for i in live if i >= 0]

    def elements(self, sub_id: int) -> tuple[np.ndarray, np.ndarray]:
        """Index arrays (xs, ys) of the active elements of one sub-array."""
        cached = self._elements.get(sub_id)
        if cached is None:
            xs, ys = np.nonzero((self.subarray_id == sub_id) & self.active)
            if xs.size == 0:
                raise KeyError(f"sub-array {sub_id} has no active elements")
            cached = (xs, ys)
            self._elements[sub_id] = cached
        return cached

    @property
    def n_active(self) -> int:
        return int(self.active.sum())

    def kind(self, sub_id: int) -> str:
        return self.subarray_kind[sub_id]

    def subarray_span(self, sub_id: int) -> tuple[int, int]:
        """Distinct column and row counts of a sub-array's lattice."""
        xs, ys = self.elements(sub_id)
        return len(np.unique(xs)), len(np.unique(ys))

    @property
    def effective_spacing(self) -> float:
        """Inter-element spacing within one interleaved sub-array, meters."""
        return self.interleave * self.geometry.spacing

    def subbeam_width_uv(self) -> float:
        """Half-power width of one sub-array's beam in uv units."""
        cols, _ = self.subarray_span(self.subarray_ids()[0])
        return 0.886 * self.geometry.wavelength / (cols * self.effective_spacing)

    def transposed(self) -> "ArrayPartition":
        """Partition with x and y element coordinates swapped."""
        return ArrayPartition(
            geometry=ArrayGeometry(
                self.geometry.ny,
                self.geometry.nx,
                self.geometry.spacing,
                self.geometry.wavelength,
            ),
            block_id=self.block_id.T.copy(),
            subarray_id=self.subarray_id.T.copy(),
            active=self.active.T.copy(),
            subarray_kind={
                k: {TRANSITIONAL_H: TRANSITIONAL_V, TRANSITIONAL_V: TRANSITIONAL_H}.get(v, v)
                for k, v in self.subarray_kind.items()
            },
            blocks_x=self.blocks_y,
            blocks_y=self.blocks_x,
            interleave=self.interleave,
        )

    def to_json(self) -> str:
        """Serialize geometry, labels and mask to the documented JSON schema."""
        return json.dumps(
            {
                "geometry": {
                    "nx": self.geometry.nx,
                    "ny": self.geometry.ny,
                    "spacing_m": self.geometry.spacing,
                    "wavelength_m": self.geometry.wavelength,
                },
                "blocks": {"x": self.blocks_x, "y": self.blocks_y},
                "interleave": self.interleave,
                "block_id": self.block_id.tolist(),
                "subarray_id": self.subarray_id.tolist(),
                "active": self.active.astype(int).tolist(),
                "subarray_kind": {str(k): v for k, v in self.subarray_kind.items()},
            },
            sort_keys=True,
        )

    @staticmethod
    def from_json(text: str) -> "ArrayPartition":
        doc = json.loads(text)
        g = doc["geometry"]
        return ArrayPartition(
            geometry=ArrayGeometry(g["nx"], g["ny"], g["spacing_m"], g["wavelength_m"]),
            block_id=np.array(doc["block_id"], dtype=int),
            subarray_id=np.array(doc["subarray_id"], dtype=int),
            active=np.array(doc["active"], dtype=bool),
            subarray_kind={int(k): v for k, v in doc["subarray_kind"].items()},
            blocks_x=doc["blocks"]["x"],
            blocks_y=doc["blocks"]["y"],
            interleave=doc["interleave"],
        )


def partition_multiblock(
    geometry: ArrayGeometry,
    blocks_per_side: int | tuple[int, int],
    subarrays_per_block_side: int,
) -> ArrayPartition:
    """Tile the array into contiguous blocks of interleaved sub-arrays.

    Blocks are labeled row-major. Within a block with interleave factor ``a``,
    element (x, y) belongs to local sub-array ``(x mod a) + a*(y mod a)``;
    global sub-array ids are ``block*a^2 + local``.
    """
    bx, by = (
        blocks_per_side if isinstance(blocks_per_side, tuple) else (blocks_per_side, blocks_per_side)
    )
    a = subarrays_per_block_side
    if bx < 1 or by < 1 or a < 1:
        raise ValueError("block and interleave counts must be >= 1")
    if geometry.nx % (bx * a) or geometry.ny % (by * a):
        raise ValueError(
            f"grid {geometry.nx}x{geometry.ny} not divisible into "
            f"{bx}x{by} blocks with interleave {a}"
        )
    xs, ys = np.meshgrid(np.arange(geometry.nx), np.arange(geometry.ny), indexing="ij")
    block_w = geometry.nx // bx
    block_h = geometry.ny // by
    block = (ys // block_h) * bx + (xs // block_w)
    local = (xs % a) + a * (ys % a)
    sub = block * a * a + local
    kinds = {int(i): REGULAR for i in np.unique(sub)}
    return ArrayPartition(
        geometry=geometry,
        block_id=block.astype(int),
        subarray_id=sub.astype(int),
        active=np.ones((geometry.nx, geometry.ny), dtype=bool),
        subarray_kind=kinds,
        blocks_x=bx,
        blocks_y=by,
        interleave=a,
    )


def _block_coords(part: ArrayPartition, sub_id: int) -> tuple[int, int]:
    """Block tile coordinates occupied by a sub-array, from element positions."""
    xs, ys = part.elements(sub_id)
    bxs = np.unique(xs // (part.geometry.nx // part.blocks_x))
    bys = np.unique(ys // (part.geometry.ny // part.blocks_y))
    if len(bxs) != 1 or len(bys) != 1:
        raise ValueError(f"sub-array {sub_id} spans multiple blocks")
    return int(bxs[0]), int(bys[0])


def make_transitional(
    part: ArrayPartition, sub_a: int, sub_b: int, axis: str
) -> tuple[ArrayPartition, int]:
    """Fuse two donor sub-arrays from adjacent blocks into a transitional one.

    The halves of the donors farthest from the shared block boundary are
    deactivated; the remaining halves form a new sub-array of the original size
    straddling the boundary. Returns the new partition and the new sub-array id.
    Donors are consumed: reusing one raises.
    """
    if axis not in ("horizontal", "vertical"):
        raise ValueError("axis must be 'horizontal' or 'vertical'")
    for sid in (sub_a, sub_b):
        if part.subarray_kind.get(sid) != REGULAR:
            raise ValueError(f"sub-array {sid} is not a regular donor")
    ax = 0 if axis == "horizontal" else 1
    ca, cb = _block_coords(part, sub_a), _block_coords(part, sub_b)
    if ca[1 - ax] != cb[1 - ax] or abs(ca[ax] - cb[ax]) != 1:
        raise ValueError(f"donor blocks {ca} and {cb} are not adjacent along {axis}")
    if ca[ax] > cb[ax]:
        sub_a, sub_b = sub_b, sub_a  # sub_a is now on the low-coordinate side

    xa, ya = part.elements(sub_a)
    xb, yb = part.elements(sub_b)
    if xa.size != xb.size:
        raise ValueError("donor sub-arrays differ in size")
    coord_a = xa if ax == 0 else ya
    coord_b = xb if ax == 0 else yb
    lines_a = np.unique(coord_a)
    lines_b = np.unique(coord_b)
    if len(lines_a) % 2 or len(lines_b) % 2:
        raise ValueError("donor sub-arrays cannot be halved along this axis")
    # Keep the half nearest the boundary: high lines of the low-side donor,
    # low lines of the high-side donor.
    keep_a = np.isin(coord_a, lines_a[len(lines_a) // 2 :])
    keep_b = np.isin(coord_b, lines_b[: len(lines_b) // 2])

    new_id = max(part.subarray_kind) + 1
    sub = part.subarray_id.copy()
    active = part.active.copy()
    sub[xa[keep_a], ya[keep_a]] = new_id
    sub[xb[keep_b], yb[keep_b]] = new_id
    active[xa[~keep_a], ya[~keep_a]] = False
    active[xb[~keep_b], yb[~keep_b]] = False

    kinds = dict(part.subarray_kind)
    kinds.pop(sub_a)
    kinds.pop(sub_b)
    kinds[new_id] = TRANSITIONAL_H if axis == "horizontal" else TRANSITIONAL_V
    return (
        ArrayPartition(
            geometry=part.geometry,
            block_id=part.block_id.copy(),
            subarray_id=sub,
            active=active,
            subarray_kind=kinds,
            blocks_x=part.blocks_x,
            blocks_y=part.blocks_y,
            interleave=part.interleave,
        ),
        new_id,
    )


@dataclass(frozen=True, eq=False)
class WeightVector:
    """Complex per-element weights with unit norm.

    Amplitudes are binary: an element is either off (weight 0) or carries the
    common normalization magnitude with a phase in [0, 2pi).
    """

    geometry: ArrayGeometry
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.geometry.nx, self.geometry.ny):
            raise ValueError("weight shape does not match geometry")
        norm = np.linalg.norm(self.values)
        if norm < 1e-15:
            raise ValueError("all-zero weight vector")
        object.__setattr__(self, "values", np.ascontiguousarray(self.values / norm))
        self.values.setflags(write=False)
        assert abs(np.linalg.norm(self.values) - 1.0) < _NORM_TOL

    @staticmethod
    def from_phases(geometry: ArrayGeometry, phases: np.ndarray, active: np.ndarray) -> "WeightVector":
        """Unit-amplitude weights exp(j*phase) on active elements, 0 elsewhere."""
        vals = np.where(active, np.exp(1j * phases), 0.0)
        return WeightVector(geometry, vals)

    @property
    def active(self) -> np.ndarray:
        return np.abs(self.values) > 0

    @property
    def n_active(self) -> int:
        return int(self.active.sum())

    @property
    def normalization(self) -> float:
        """Common magnitude applied to every active element."""
        return 1.0 / math.sqrt(self.n_active)

    def phases(self) -> np.ndarray:
        """Per-element phase in [0, 2pi); zero where inactive."""
        ph = np.mod(np.angle(self.values), 2.0 * np.pi)
        return np.where(self.active, ph, 0.0)

    def flat(self) -> np.ndarray:
        """Weights as a vector ordered x-fastest: w00, w10, ..."""
        return np.ravel(self.values, order="F")


def quantize_phases(w: WeightVector, bits: int) -> WeightVector:
    """Snap each phase to the nearest of 2^bits uniform levels 2*pi*k/2^bits.

    Exact ties round toward the lower level. Amplitudes are unchanged and the
    result is renormalized.
    """
    if bits < 1:
        raise ValueError("bits must be >= 1")
    levels = 1 << bits
    step = 2.0 * np.pi / levels
    ratio = w.phases() / step
    idx = np.floor(ratio + 0.5)
    halfway = np.mod(ratio, 1.0) == 0.5
    idx = np.where(halfway, np.floor(ratio), idx)
    snapped = np.mod(idx, levels) * step
    return WeightVector.from_phases(w.geometry, snapped, w.active)
