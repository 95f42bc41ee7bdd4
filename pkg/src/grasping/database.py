"""
Grasp Database
--------------

Versioned JSON store of the candidates generated for one object class. Files
are written with sorted keys so identical inputs give identical bytes, and are
meant to be inspected and edited by hand: deleting a candidate entry is a
valid edit.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from src.errors import ParseError, VersionMismatch
from src.grasping.candidates import GraspCandidate, GraspGenConfig, generate_candidates
from src.grasping.gripper import GripperModel

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
FRAME_CONVENTION = ("origin at the contact midpoint; y along c1->c2 (finger stroke); "
                    "z along the approach, pointing into the object; x = y cross z")


@dataclass(eq=False)
class GraspDatabase:
    class_id: str
    candidates: List[GraspCandidate]
    generation: Dict[str, Any] = field(default_factory=dict)
    gripper: Dict[str, Any] = field(default_factory=dict)
    budget_exhausted: bool = False
    format_version: int = FORMAT_VERSION
    frame_convention: str = FRAME_CONVENTION

    def __len__(self) -> int:
        return len(self.candidates)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'format_version': self.format_version,
            'frame_convention': self.frame_convention,
            'class_id': self.class_id,
            'generation': self.generation,
            'gripper': self.gripper,
            'budget_exhausted': self.budget_exhausted,
            'candidates': [c.to_dict() for c in self.candidates],
        }

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GraspDatabase):
            return NotImplemented
        return (self.to_dict() == other.to_dict()
                and all(a == b for a, b in zip(self.candidates, other.candidates)))

    __hash__ = None


def build_database(class_id: str, mesh, center, gripper: GripperModel, config: GraspGenConfig,
                   strict: bool = False) -> GraspDatabase:
    candidates, sampling = generate_candidates(mesh, center, gripper, config, strict=strict)
    return GraspDatabase(class_id, candidates, config.to_dict(), gripper.to_dict(), sampling.budget_exhausted)


def dumps_db(database: GraspDatabase) -> str:
    return json.dumps(database.to_dict(), sort_keys=True, indent=2)


def write_db(path: Union[str, Path], database: GraspDatabase) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_db(database) + '\n')
    logger.info("wrote %d grasp candidates for %r to %s", len(database), database.class_id, path)


def loads_db(text: str, path: Optional[str] = None) -> GraspDatabase:
    """
    Parse a database document.

    Raises:
        ParseError: Malformed JSON (with the byte offset) or missing fields.
        VersionMismatch: Unknown ``format_version``.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, offset=exc.pos, path=path) from exc
    if not isinstance(data, dict):
        raise ParseError("grasp database must be a JSON object", offset=0, path=path)
    version = data.get('format_version')
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"unsupported grasp database version {version!r} (expected {FORMAT_VERSION})")
    try:
        candidates = [GraspCandidate.from_dict(entry) for entry in data['candidates']]
        return GraspDatabase(
            class_id=str(data['class_id']),
            candidates=candidates,
            generation=dict(data.get('generation', {})),
            gripper=dict(data.get('gripper', {})),
            budget_exhausted=bool(data.get('budget_exhausted', False)),
            format_version=version,
            frame_convention=str(data.get('frame_convention', FRAME_CONVENTION)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed grasp database: {exc}", path=path) from exc


def read_db(path: Union[str, Path]) -> GraspDatabase:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read grasp database: {exc.strerror}", path=str(path)) from exc
    database = loads_db(text, path=str(path))
    logger.debug("read %d grasp candidates for %r from %s", len(database), database.class_id, path)
    return database
