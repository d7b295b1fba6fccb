"""Signed, checksummed JSON documents (model registries, sessions, ground truth, pose reports)."""

import hashlib
import json
import os
from typing import Any, Dict, Tuple

import config
from date_utils import DateUtils
from error_logger import log_debug, log_error, log_info
from errors import ParseError, SheetLocError

ALGORITHM = "SHA256"


def generate_data_checksum(data: Any) -> str:
    """Generate SHA-256 checksum for data verification."""
    json_str = json.dumps(data, sort_keys=True)
    return hashlib.sha256(json_str.encode()).hexdigest()


def sign_document(kind: str, payload_key: str, payload: Any, **extra) -> Dict:
    """Wrap a payload with signature, version info and an integrity block."""
    checksum = generate_data_checksum(payload)
    document = {
        "app_signature": config.App.SIGNATURE,
        "app_version": config.App.version(),
        "schema_version": config.App.SCHEMA_VERSION,
        "document": kind,
        "created": DateUtils.now_iso(),
        **extra,
        payload_key: payload,
        "data_integrity": {
            "algorithm": ALGORITHM,
            "checksum": checksum,
            "generated_by": f"{config.App.NAME} v{config.App.version()}",
        },
    }
    log_debug(f"Signed {kind} document (checksum: {checksum[:16]}...)")
    return document


def verify_document(document: Dict, payload_key: str) -> Tuple[bool, str]:
    """Verify signature and checksum. Returns (ok, message)."""
    if document.get("app_signature") != config.App.SIGNATURE:
        return False, config.Messages.INVALID_SIGNATURE

    data_integrity = document.get("data_integrity")
    if not data_integrity:
        return False, "Missing data integrity information"
    if data_integrity.get("algorithm") != ALGORITHM:
        return False, f"Unsupported integrity algorithm: {data_integrity.get('algorithm')}"

    stored_checksum = data_integrity.get("checksum")
    if not stored_checksum:
        return False, "Missing integrity checksum"
    calculated_checksum = generate_data_checksum(document.get(payload_key))
    if calculated_checksum != stored_checksum:
        log_error(f"Checksum mismatch: stored={stored_checksum[:16]}..., "
                  f"calculated={calculated_checksum[:16]}...")
        return False, config.Messages.CHECKSUM_MISMATCH
    return True, "Integrity verified"


def write_document(path, document: Dict):
    """Write a signed document as indented JSON, creating parent folders."""
    folder = os.path.dirname(os.path.abspath(str(path)))
    try:
        os.makedirs(folder, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(document, f, indent=2)
    except OSError as e:
        log_error(f"Failed to write {document.get('document', 'document')} to {path}", e)
        raise
    log_info(f"Saved {document.get('document', 'document')}: {path}")


def read_document(path, payload_key: str, verify=True) -> Dict:
    """Load a signed document; raises ParseError on bad JSON and SheetLocError on failed checks."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = json.load(f)
    except json.JSONDecodeError as e:
        log_error(f"Invalid JSON in {path}: {e}", e)
        raise ParseError(f"invalid JSON: {e.msg}", e.lineno)
    except OSError as e:
        log_error(f"OS error reading {path}: {e}", e)
        raise

    if verify:
        ok, message = verify_document(document, payload_key)
        if not ok:
            raise SheetLocError(f"{path}: {message}")
    return document
