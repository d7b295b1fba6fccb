"""Centralized configuration constants for geometric tolerances and algorithm defaults.

All lengths are millimetres and all angles degrees unless a name says otherwise.
"""

import os

# ============================================================================
# APPLICATION INFO
# ============================================================================

class App:
    """Application metadata."""

    NAME = "SheetLoc"
    TAGLINE = "6D localisation of thin sheet-metal parts"
    SIGNATURE = "SheetLoc-Official"
    SCHEMA_VERSION = 1
    LOG_LEVEL_ENV = "SHEETLOC_LOG_LEVEL"

    @staticmethod
    def version():
        """Read the application version from version.txt next to this module."""
        path = os.path.join(os.path.dirname(os.path.abspath(__file__)), Files.VERSION_FILENAME)
        try:
            with open(path, 'r', encoding='utf-8') as f:
                return f.read().strip() or "0.0"
        except OSError:
            return "0.0"

# ============================================================================
# NUMERICAL TOLERANCES
# ============================================================================

class Tolerances:
    """Validity checks on geometric values."""

    ROTATION_ORTHO = 1e-9
    UNIT_NORMAL = 1e-6
    PLANE_NORMAL = 1e-9
    # compositions between automatic polar re-orthonormalisation
    REORTHO_EVERY = 32
    DEGENERATE_EIGEN_RATIO = 1e-12
    POLYGON_AREA_MIN = 1e-9

# ============================================================================
# GEOMETRY
# ============================================================================

class Normals:
    """Normal estimation defaults."""

    K_NEIGHBORS = 10
    VIEWPOINT = (0.0, 0.0, 0.0)

class Neighbors:
    """NeighborIndex query behaviour."""

    # extra candidates fetched so ties at the k-th distance can be resolved by index
    KNN_TIE_MARGIN = 8
    RADIUS_INFLATE = 1e-9

class DepthImages:
    """Depth/intensity image I/O."""

    PGM_MAX = 65535
    PGM_SENTINEL = 0
    PREVIEW_INVALID_GREY = 0

# ============================================================================
# REFINEMENT
# ============================================================================

class Ransac:
    """Greedy multi-plane RANSAC."""

    SUCCESS_PROBABILITY = 0.999
    MAX_ITERATIONS = 2000
    BATCH = 64
    REFINE_ROUNDS = 2
    SEED = 0

class Outliers:
    """Statistical outlier removal defaults."""

    K_NEIGHBORS = 8
    STDDEV_MULT = 1.0

class Edges:
    """Depth-edge extraction."""

    # sheet thickness of the reference use case
    MIN_AMPLITUDE = 2.5

# ============================================================================
# SURFACE-BASED MATCHING
# ============================================================================

class Ppf:
    """Point-pair-feature model and voting."""

    ANGLE_STEP = 12.0
    DIST_STEP_REL = 0.05
    REF_SAMPLING = 5
    CACHE_VERSION = 1

class Clustering:
    """Pose clustering after voting."""

    TRANS_TOL_REL = 0.1
    ROT_TOL = 12.0
    CANDIDATES = 20
    MAX_RESULTS = 5
    FLIP_SCORE_GAP = 0.05

class Scoring:
    """Overlap score and edge blend."""

    SCORE_TOL_REL = 2.0
    EDGE_WEIGHT = 0.5

class Icp:
    """Point-to-point ICP."""

    MAX_ITER = 50
    TOL = 1e-6
    MAX_CORRESPONDENCE = 10.0
    MIN_CORRESPONDENCES = 3

class Model:
    """Workpiece model sampling."""

    SAMPLE_STEP = 5.0
    MIN_POINTS = 8

# ============================================================================
# SHAPE-BASED MATCHING
# ============================================================================

class Shape:
    """Template pyramid and gradient-cosine search."""

    THETA_STEP = 1.0
    LEVELS = 3
    MM_PER_PX = 1.0
    SMOOTH_SIGMA = 1.0
    MIN_GRADIENT = 0.02  # intensity change per pixel after smoothing
    MIN_SCORE = 0.5
    MAX_MATCHES = 4
    COARSE_SCORE_FACTOR = 0.8
    COARSE_CANDIDATES = 40
    REFINE_WINDOW = 2
    NMS_RADIUS_REL = 0.5
    CACHE_VERSION = 1

class Lift:
    """Lifting planar matches to 6D."""

    MIN_PIXELS = 10

# ============================================================================
# CALIBRATION
# ============================================================================

class Beacons:
    """Beacon-plate detection."""

    MIN_DISTANCE_GAP = 5.0
    THRESHOLD_REL = 0.5
    MIN_BLOB_AREA = 3
    WINDOW_DILATE = 4
    LABEL_AMBIGUITY_RATIO = 2.0

class HandEye:
    """AX=XB solver."""

    MIN_SAMPLES = 3
    MIN_AXIS_SPREAD = 10.0
    MIN_ROTATION = 1.0

# ============================================================================
# SCENE SYNTHESIS
# ============================================================================

class Synth:
    """Renderer defaults."""

    GLANCING_COS = 0.3
    GHOST_BAND = (5.0, 40.0)
    GHOST_SOURCES = ("roller",)
    PRODUCT_ALBEDO = 0.2
    PLANK_ALBEDO = 0.8
    ROLLER_ALBEDO = 0.6
    BEACON_SIGMA_PX = 1.5
    BEACON_PEAK = 1.0
    PLATE_ALBEDO = 0.1
    FULLY_VISIBLE = 0.999

# ============================================================================
# PIPELINE & BENCH
# ============================================================================

class Pipeline:
    """Pipeline execution contract."""

    EXIT_FOUND = 0
    EXIT_ERROR = 1
    EXIT_NONE = 2
    DEFAULT_MIN_SCORE = 0.5

class Bench:
    """Bench harness output."""

    SEM_ABSENT = "n/a"
    CSV_COLUMNS = ["config", "n", "duration_mean_s", "duration_sem_s",
                   "score_mean", "score_sem", "per_object_s", "fastest"]

# ============================================================================
# FILE PATTERNS
# ============================================================================

class Files:
    """File naming patterns and extensions."""

    VERSION_FILENAME = "version.txt"
    SETTINGS_FILENAME = "settings.ini"
    LOG_DIR = "logs"
    LOG_FILENAME = "sheetloc.log"

    PLY_EXT = ".ply"
    PGM_EXT = ".pgm"
    JSON_EXT = ".json"
    PNG_EXT = ".png"
    CSV_EXT = ".csv"
    EXCEL_EXT = ".xlsx"
    PDF_EXT = ".pdf"

    BENCH_PREFIX = "bench"

    @staticmethod
    def sidecar_path(image_path):
        """Metadata sidecar for a PGM image."""
        root, _ = os.path.splitext(str(image_path))
        return root + Files.JSON_EXT

    @staticmethod
    def get_export_filename(stem, format_type):
        """Generate export filename based on format."""
        ext = {"csv": Files.CSV_EXT, "excel": Files.EXCEL_EXT, "pdf": Files.PDF_EXT}.get(format_type)
        if ext is None:
            return None
        return f"{Files.BENCH_PREFIX}_{stem}{ext}"

# ============================================================================
# USER MESSAGES
# ============================================================================

class Messages:
    """User-facing error and info messages."""

    UNKNOWN_STAGE = "Unknown stage '{stage}'"
    STAGE_PARAM_INVALID = "Stage '{stage}': {detail}"
    CONFIG_MISSING_FIELD = "Missing required field: {field}"
    EMPTY_SCENE = "Scene contains no points"
    NO_MATCH = "No match above min_score {min_score}"
    REPORT_SAVED = "Pose report written: {path}"
    BENCH_SAVED = "Bench table written: {path}"
    INVALID_SIGNATURE = "File not generated by SheetLoc (missing or invalid signature)"
    CHECKSUM_MISMATCH = "Checksum mismatch - file has been modified or corrupted"
