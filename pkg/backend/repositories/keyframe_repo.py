import json
import logging
from pathlib import Path
from typing import Union

from pydantic import ValidationError

from models import KeyframeSet
from schemas.keyframe import KeyframeSetSchema
from services.errors import ContractError, DataError

logger = logging.getLogger(__name__)


def save_keyframes(keyframes: KeyframeSet, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(KeyframeSetSchema.from_domain(keyframes).model_dump_json(indent=2), encoding="utf-8")
    logger.info(f"[KEYFRAME_REPO] Saved {len(keyframes)} {keyframes.strategy} keyframes to {path}")
    return path


def load_keyframes(path: Union[str, Path]) -> KeyframeSet:
    """
    Raises:
        DataError: unreadable file, malformed JSON or an invalid keyframe set
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise DataError(f"cannot read keyframe file: {e}", path=path) from e
    except json.JSONDecodeError as e:
        raise DataError(f"keyframe file is not valid JSON: {e.msg}", path=path) from e
    try:
        return KeyframeSetSchema.model_validate(raw).to_domain()
    except ValidationError as e:
        message = f"keyframe file does not match the KeyframeSet layout: {e.error_count()} errors"
        raise DataError(message, path=path) from e
    except ContractError as e:
        raise DataError(f"invalid keyframe set: {e}", path=path) from e
