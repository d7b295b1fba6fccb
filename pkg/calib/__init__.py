"""
Calibration package for SheetLoc.

Beacon-plate detection, plate pose, scene frame and eye-in-hand calibration.
"""

from .beacons import BeaconPlate, detect_beacons, label_beacons
from .plate_pose import beacon_depths, p3p_solutions, plate_pose, scene_frame_from_plate
from .hand_eye import (HandEyeResult, HandEyeSample, chain_closure, hand_eye_calibrate,
                       hand_eye_calibrate_detailed)
from .session import load_session, save_session

__all__ = [
    'BeaconPlate', 'detect_beacons', 'label_beacons', 'beacon_depths', 'p3p_solutions',
    'plate_pose', 'scene_frame_from_plate', 'HandEyeResult', 'HandEyeSample', 'chain_closure',
    'hand_eye_calibrate', 'hand_eye_calibrate_detailed', 'load_session', 'save_session',
]
