"""Dataset ingestion: pair degraded, reference and depth files by stem."""
import json
import os
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

from utils.errors import ConfigurationError, ImageLoadError, PairingError
from utils.image_io import DEPTH_EXTENSIONS, IMAGE_EXTENSIONS, image_size
from utils.logger import setup_logger

logger = setup_logger(__name__)

MANIFEST_VERSION = 1
DEFAULT_PAIRING = {"raw": "raw", "reference": "reference", "depth": "depth"}


@dataclass
class ManifestEntry:
    """One degraded image with its optional reference and depth map."""
    
    image_id: str
    degraded: str
    reference: Optional[str] = None
    depth: Optional[str] = None
    
    @property
    def labeled(self) -> bool:
        return self.reference is not None


@dataclass
class DatasetManifest:
    """Ordered dataset listing."""
    
    root: str
    entries: List[ManifestEntry] = field(default_factory=list)
    pairing: Dict[str, str] = field(default_factory=lambda: dict(DEFAULT_PAIRING))
    
    def labeled(self) -> List[ManifestEntry]:
        return [e for e in self.entries if e.labeled]
    
    def unlabeled(self) -> List[ManifestEntry]:
        return [e for e in self.entries if not e.labeled]
    
    def to_dict(self) -> Dict:
        return {
            "version": MANIFEST_VERSION,
            "root": self.root,
            "pairing": dict(self.pairing),
            "entries": [asdict(e) for e in self.entries],
        }
    
    def save(self, path: str) -> str:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2)
        return path
    
    @classmethod
    def load(cls, path: str) -> "DatasetManifest":
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
        if data.get("version") != MANIFEST_VERSION:
            raise ConfigurationError(f"Unsupported manifest version {data.get('version')} in {path}")
        entries = [ManifestEntry(**e) for e in data["entries"]]
        return cls(root=data["root"], entries=entries, pairing=data.get("pairing", dict(DEFAULT_PAIRING)))


def index_by_stem(directory: str, extensions=IMAGE_EXTENSIONS) -> Dict[str, str]:
    """Map file stem to path for supported files, in sorted order."""
    files: Dict[str, str] = {}
    if not os.path.isdir(directory):
        return files
    for name in sorted(os.listdir(directory)):
        path = os.path.join(directory, name)
        stem, ext = os.path.splitext(name)
        if not os.path.isfile(path) or ext.lower() not in extensions:
            continue
        if stem in files:
            logger.warning(f"Duplicate stem {stem!r} in {directory}: keeping {files[stem]}, ignoring {path}")
            continue
        files[stem] = path
    return files


def ingest(
    root: str,
    raw_dir: str = "raw",
    reference_dir: str = "reference",
    depth_dir: str = "depth",
    validate: bool = True,
) -> DatasetManifest:
    """Build a manifest from a dataset directory.
    
    Degraded images live in `root/raw_dir` (or directly in `root` when that
    subdirectory does not exist); references and depth maps are paired by
    file stem. Degraded images without a reference become unlabeled entries.
    
    Args:
        root: Dataset root
        raw_dir: Subdirectory of degraded images
        reference_dir: Subdirectory of clean references
        depth_dir: Subdirectory of depth maps
        validate: Decode every file and check paired dimensions
        
    Returns:
        DatasetManifest in stem order
    """
    if not os.path.isdir(root):
        raise ConfigurationError(f"Dataset root does not exist: {root}")
    
    raw_path = os.path.join(root, raw_dir)
    degraded = index_by_stem(raw_path if os.path.isdir(raw_path) else root)
    references = index_by_stem(os.path.join(root, reference_dir))
    depths = index_by_stem(os.path.join(root, depth_dir), DEPTH_EXTENSIONS)
    
    entries = [
        ManifestEntry(image_id=stem, degraded=path, reference=references.get(stem), depth=depths.get(stem))
        for stem, path in degraded.items()
    ]
    manifest = DatasetManifest(
        root=root,
        entries=entries,
        pairing={"raw": raw_dir, "reference": reference_dir, "depth": depth_dir},
    )
    
    orphans = sorted(set(references) - set(degraded))
    if orphans:
        logger.warning(f"{len(orphans)} reference(s) without a degraded image ignored: {', '.join(orphans)}")
    if not entries:
        logger.warning(f"No images found under {root}")
        return manifest
    
    if validate:
        validate_manifest(manifest)
    logger.info(
        f"Ingested {root}: {len(manifest.labeled())} labeled, {len(manifest.unlabeled())} unlabeled, "
        f"{sum(e.depth is not None for e in entries)} with depth"
    )
    return manifest


def validate_manifest(manifest: DatasetManifest) -> None:
    """Decode every listed file; raise with every failure itemized."""
    load_errors: List[str] = []
    pairing_errors: List[str] = []
    for entry in manifest.entries:
        sizes = {}
        for role in ("degraded", "reference", "depth"):
            path = getattr(entry, role)
            if path is None:
                continue
            if not os.path.isfile(path):
                load_errors.append(f"{path}: file does not exist")
                continue
            try:
                sizes[role] = tuple(image_size(path))
            except ImageLoadError as e:
                load_errors.append(str(e))
        if len(set(sizes.values())) > 1:
            detail = ", ".join(f"{role} {size}" for role, size in sizes.items())
            pairing_errors.append(f"{entry.image_id}: {detail}")
    if load_errors:
        raise ImageLoadError("Could not load:\n  " + "\n  ".join(load_errors))
    if pairing_errors:
        raise PairingError("Dimension mismatch within pair:\n  " + "\n  ".join(pairing_errors))
