"""Beacon-plate layout and detection of its three light beacons in an intensity image."""

from dataclasses import dataclass
from itertools import combinations, permutations
from typing import Optional

import numpy as np
from scipy import ndimage

import config
from error_logger import log_debug, log_warning
from errors import AmbiguousLabelling, BeaconCountMismatch, DegenerateGeometry, InvalidParameter
from geom.depth_image import DepthImage

PAIRS = ((0, 1), (0, 2), (1, 2))


@dataclass(frozen=True, eq=False)
class BeaconPlate:
    """Three beacon positions (mm) in the plate frame; the plate surface is z = 0."""

    positions: np.ndarray
    plate_id: str = "plate"

    def __post_init__(self):
        positions = np.array(self.positions, dtype=float)
        if positions.shape == (3, 2):
            positions = np.column_stack([positions, np.zeros(3)])
        if positions.shape != (3, 3):
            raise InvalidParameter("a beacon plate has exactly three beacons")
        if np.any(np.abs(positions[:, 2]) > 1e-9):
            raise InvalidParameter("beacons must lie in the plate plane z = 0")
        area = 0.5 * np.linalg.norm(np.cross(positions[1] - positions[0], positions[2] - positions[0]))
        if area <= config.Tolerances.POLYGON_AREA_MIN:
            raise DegenerateGeometry("beacon positions are collinear")
        positions.setflags(write=False)
        object.__setattr__(self, "positions", positions)

    def distances(self):
        """Distances of the beacon pairs (0,1), (0,2), (1,2)."""
        p = self.positions
        return np.array([np.linalg.norm(p[i] - p[j]) for i, j in PAIRS])

    def distance_gap(self):
        """Smallest difference between two pairwise distances."""
        return float(min(abs(a - b) for a, b in combinations(self.distances(), 2)))

    def is_distinct(self):
        return self.distance_gap() >= config.Beacons.MIN_DISTANCE_GAP

    def to_dict(self):
        return {"plate_id": self.plate_id, "positions": self.positions.tolist()}

    @staticmethod
    def from_dict(data):
        return BeaconPlate(data["positions"], str(data.get("plate_id", "plate")))


def _blobs(values, threshold):
    """Label 8-connected bright regions; returns (labels, ids sorted by summed intensity)."""
    labels, count = ndimage.label(values >= threshold, structure=np.ones((3, 3)))
    if count == 0:
        return labels, []
    ids = np.arange(1, count + 1)
    areas = ndimage.sum_labels(np.ones_like(values), labels, ids)
    totals = ndimage.sum_labels(values, labels, ids)
    keep = areas >= config.Beacons.MIN_BLOB_AREA
    ids, totals = ids[keep], totals[keep]
    return labels, list(ids[np.argsort(-totals, kind="stable")])


def _centroid(values, labels, blob_id):
    """Intensity-weighted centre (u, v) of a blob over a dilated window, background removed."""
    blob = labels == blob_id
    window = ndimage.binary_dilation(blob, iterations=config.Beacons.WINDOW_DILATE)
    ring = window & ~ndimage.binary_erosion(window)
    background = float(np.median(values[ring])) if ring.any() else 0.0
    weights = np.where(window, np.clip(values - background, 0.0, None), 0.0)
    row, col = ndimage.center_of_mass(weights)
    return col + 0.5, row + 0.5


def label_beacons(centroids, plate: BeaconPlate):
    """Order detected centroids so that entry i is beacon i.

    Each of the six labellings is scored by comparing normalised pixel distances with
    normalised plate distances. The best must beat the runner-up clearly.
    """
    if not plate.is_distinct():
        raise AmbiguousLabelling(
            f"beacon distances differ by only {plate.distance_gap():.2f} mm, "
            f"need {config.Beacons.MIN_DISTANCE_GAP} mm")
    centroids = np.asarray(centroids, dtype=float)
    expected = plate.distances() / plate.distances().sum()
    costs = []
    for order in permutations(range(3)):
        pts = centroids[list(order)]
        measured = np.array([np.linalg.norm(pts[i] - pts[j]) for i, j in PAIRS])
        if measured.sum() <= 0:
            raise DegenerateGeometry("beacon centroids coincide")
        costs.append((float(((measured / measured.sum() - expected) ** 2).sum()), order))
    costs.sort(key=lambda c: c[0])
    (best, order), (runner_up, _) = costs[0], costs[1]
    if runner_up < config.Beacons.LABEL_AMBIGUITY_RATIO * best:
        raise AmbiguousLabelling(f"labelling costs {best:.2e} and {runner_up:.2e} are too close")
    return centroids[list(order)]


def detect_beacons(img: DepthImage, expected: BeaconPlate, threshold_rel: Optional[float] = None):
    """Sub-pixel centroids (3, 2) of the three brightest blobs, labelled by plate geometry.

    Pixels at or above `threshold_rel` x the brightest value form blobs; the three with
    the largest summed intensity are kept.
    """
    img.require_kind("intensity")
    threshold_rel = config.Beacons.THRESHOLD_REL if threshold_rel is None else threshold_rel
    values = img.filled(0.0)
    peak = float(values.max()) if values.size else 0.0
    if peak <= 0.0:
        raise BeaconCountMismatch("no bright pixels in the image")
    labels, ids = _blobs(values, threshold_rel * peak)
    if len(ids) < 3:
        raise BeaconCountMismatch(f"found {len(ids)} beacon blobs, expected 3")
    if len(ids) > 3:
        log_warning(f"{len(ids)} bright blobs found; keeping the 3 brightest")
    centroids = np.array([_centroid(values, labels, blob_id) for blob_id in ids[:3]])
    labelled = label_beacons(centroids, expected)
    log_debug("beacons at " + ", ".join(f"({u:.2f}, {v:.2f})" for u, v in labelled))
    return labelled
