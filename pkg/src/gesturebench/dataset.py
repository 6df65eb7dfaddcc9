"""Dataset manifests: id,class,path CSV rows tying labels to mask files."""

import csv
from dataclasses import dataclass
from pathlib import Path

from . import masks
from .classify import LabeledBundle
from .descriptors import build_bundles
from .errors import DatasetError


@dataclass
class LabeledMask:
    image_id: str
    label: str
    nmask: masks.NormalizedMask


def read_manifest(path):
    """Parse an `id,class,path` manifest; relative paths resolve against the
    manifest's directory. Returns [(id, label, absolute path)]."""
    base = Path(path).parent
    rows = []
    seen = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(ln for ln in fh if not ln.lstrip().startswith("#"))
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty manifest") from None
        if [c.strip().lower() for c in header] != ["id", "class", "path"]:
            raise DatasetError(f"{path}: expected header id,class,path")
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != 3:
                raise DatasetError(f"{path}:{lineno}: expected 3 fields")
            image_id, label, rel = (c.strip() for c in row)
            if image_id in seen:
                raise DatasetError(f"{path}:{lineno}: duplicate id {image_id!r}")
            seen.add(image_id)
            p = Path(rel)
            rows.append((image_id, label, p if p.is_absolute() else base / p))
    if not rows:
        raise DatasetError(f"{path}: no entries")
    return rows


def write_manifest(rows, path):
    """Write `id,class,path` rows; paths are kept as given."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "class", "path"])
        for image_id, label, p in rows:
            writer.writerow([image_id, label, str(p)])


def load_normalized(manifest_path, params=None, check_width=True):
    """Load every manifest entry as an already-normalized mask."""
    expected = params.target_width if (params and check_width) else None
    out = []
    for image_id, label, path in read_manifest(manifest_path):
        mask = masks.load_mask(path)
        out.append(LabeledMask(
            image_id=image_id, label=label,
            nmask=masks.as_normalized(mask, source_id=image_id,
                                      expected_width=expected)))
    return out


def bundle_dataset(labeled_masks, params=None, threads=1, features=None,
                   partial=False):
    """Build descriptor bundles for a list of LabeledMask items."""
    bundles = build_bundles([lm.nmask for lm in labeled_masks], params,
                            threads=threads, features=features, partial=partial)
    return [LabeledBundle(image_id=lm.image_id, label=lm.label, bundle=b)
            for lm, b in zip(labeled_masks, bundles)]
