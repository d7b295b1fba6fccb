"""Model registry: workpiece models by id, persisted as a signed JSON document."""

from typing import Dict, Iterable

from error_logger import log_info
from errors import InvalidParameter
from integrity import read_document, sign_document, write_document
from match3d.workpiece import WorkpieceModel

DOCUMENT = "model_registry"
PAYLOAD = "models"


def builtin_models(step=None) -> Dict[str, WorkpieceModel]:
    """Five distinct 3 mm sheet parts used by the synthetic scenes and the CLI defaults."""
    outlines = {
        "plate": [(0, 0), (120, 0), (120, 70), (0, 70)],
        "l_bracket": [(0, 0), (110, 0), (110, 35), (40, 35), (40, 90), (0, 90)],
        "t_plate": [(0, 60), (35, 60), (35, 0), (75, 0), (75, 60), (110, 60), (110, 95), (0, 95)],
        "trapezoid": [(0, 0), (130, 0), (95, 60), (25, 60)],
        "u_channel": [(0, 0), (100, 0), (100, 80), (70, 80), (70, 30), (30, 30), (30, 80), (0, 80)],
    }
    models = {}
    for model_id, outline in outlines.items():
        if step is None:
            models[model_id] = WorkpieceModel(model_id, outline, 3.0)
        else:
            models[model_id] = WorkpieceModel(model_id, outline, 3.0, step)
    return models


def save_model_registry(models: Iterable[WorkpieceModel], path):
    payload = [m.to_dict() for m in models]
    write_document(path, sign_document(DOCUMENT, PAYLOAD, payload))


def load_model_registry(path, verify=True) -> Dict[str, WorkpieceModel]:
    """Load models keyed by id; duplicate ids are rejected."""
    document = read_document(path, PAYLOAD, verify=verify)
    models = {}
    for entry in document.get(PAYLOAD, []):
        model = WorkpieceModel.from_dict(entry)
        if model.id in models:
            raise InvalidParameter(f"duplicate model id '{model.id}' in {path}")
        models[model.id] = model
    log_info(f"Loaded {len(models)} models from {path}")
    return models
