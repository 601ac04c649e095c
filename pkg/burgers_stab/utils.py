import hashlib
import json
import os
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Sequence

from burgers_stab.defaults import DEFAULT_OUTPUT_ROOT, OUTPUT_ROOT_ENV_VAR

TRACKED_DISTRIBUTIONS = ("burgers-stab", "numpy", "scipy", "pandas", "scikit-learn", "pydantic")


def fingerprint(payload: Mapping[str, Any]) -> str:
    """SHA-256 of the canonical JSON encoding of ``payload``."""
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def package_versions(distributions: Sequence[str] = TRACKED_DISTRIBUTIONS) -> Dict[str, Optional[str]]:
    versions: Dict[str, Optional[str]] = {}
    for name in distributions:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = None
    return versions


def output_root(override: Optional[Path] = None) -> Path:
    """Directory that run outputs are written under; ``BURGERS_STAB_OUT`` overrides the default."""
    if override is not None:
        return Path(override)
    return Path(os.getenv(OUTPUT_ROOT_ENV_VAR, DEFAULT_OUTPUT_ROOT))
