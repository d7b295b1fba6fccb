"""Calibration session files: hand-eye samples plus the latest result, signed and checksummed."""

from typing import List, Optional, Tuple

from error_logger import log_info
from errors import ParseError
from integrity import read_document, sign_document, write_document
from calib.beacons import BeaconPlate
from calib.hand_eye import HandEyeResult, HandEyeSample

DOCUMENT = "calibration_session"
PAYLOAD = "samples"


def save_session(path, samples: List[HandEyeSample], result: Optional[HandEyeResult] = None,
                 plate: Optional[BeaconPlate] = None):
    extra = {}
    if result is not None:
        extra["result"] = result.to_dict()
    if plate is not None:
        extra["plate"] = plate.to_dict()
    document = sign_document(DOCUMENT, PAYLOAD, [s.to_dict() for s in samples], **extra)
    write_document(path, document)


def load_session(path, verify=True) -> Tuple[List[HandEyeSample], Optional[HandEyeResult], Optional[BeaconPlate]]:
    """(samples, result or None, plate or None) from a session file."""
    document = read_document(path, PAYLOAD, verify)
    if document.get("document") != DOCUMENT:
        raise ParseError(f"{path} is a '{document.get('document')}' document, not a calibration session")
    try:
        samples = [HandEyeSample.from_dict(item) for item in document[PAYLOAD]]
        result = HandEyeResult.from_dict(document["result"]) if "result" in document else None
        plate = BeaconPlate.from_dict(document["plate"]) if "plate" in document else None
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"malformed calibration session: {e}")
    log_info(f"Loaded calibration session with {len(samples)} samples: {path}")
    return samples, result, plate
