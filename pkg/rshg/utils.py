import hashlib
import json
from typing import Any

import numpy as np


def is_finite_array(a) -> bool:
    return bool(np.all(np.isfinite(np.asarray(a))))


def sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def to_jsonable(obj: Any) -> Any:
    """Transforma arrays/escalares numpy em tipos que o json entende."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def canonical_json(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, separators=(",", ":"))


def sha256_of(obj: Any) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()
