"""Dataset manifests.

A manifest is a line-delimited JSON file: the first line is a header object
carrying ``class_names`` and ``ignore_value_on_disk`` (plus free-form
provenance), and every following line is one sample record. Image/mask paths
are stored relative to the manifest file so a dataset directory can be moved
wholesale.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ContractError


@dataclass
class ManifestRecord:
    id: str
    image: str
    mask: str | None = None
    label: int | None = None
    labels: list[int] | None = None

    def has_supervision(self) -> bool:
        return self.mask is not None or self.label is not None or self.labels is not None

    def to_json_dict(self) -> dict:
        d = {"id": self.id, "image": self.image}
        if self.mask is not None:
            d["mask"] = self.mask
        if self.label is not None:
            d["label"] = self.label
        if self.labels is not None:
            d["labels"] = self.labels
        return d


@dataclass
class DatasetManifest:
    records: list[ManifestRecord]
    class_names: list[str]
    ignore_value_on_disk: int = 255
    root: Path = field(default_factory=Path)
    extra: dict = field(default_factory=dict)

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def validate(self) -> None:
        ids = [r.id for r in self.records]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise ContractError(f"duplicate sample ids in manifest: {dup[:5]}")
        for r in self.records:
            if not r.has_supervision():
                raise ContractError(f"record {r.id!r} has no supervision source")

    def image_path(self, record: ManifestRecord) -> Path:
        return self.root / record.image

    def mask_path(self, record: ManifestRecord) -> Path:
        if record.mask is None:
            raise ContractError(f"record {record.id!r} has no mask")
        return self.root / record.mask

    def by_id(self, sample_id: str) -> ManifestRecord:
        for r in self.records:
            if r.id == sample_id:
                return r
        raise KeyError(sample_id)


def save_manifest(manifest: DatasetManifest, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "class_names": manifest.class_names,
        "ignore_value_on_disk": manifest.ignore_value_on_disk,
    }
    header.update(manifest.extra)
    lines = [json.dumps(header, sort_keys=True)]
    lines += [json.dumps(r.to_json_dict(), sort_keys=True) for r in manifest.records]
    path.write_text("\n".join(lines) + "\n")
    return path


def load_manifest(path: str | Path) -> DatasetManifest:
    path = Path(path)
    with open(path) as f:
        lines = [ln for ln in f.read().splitlines() if ln.strip()]
    if not lines:
        raise ContractError(f"empty manifest file: {path}")
    header = json.loads(lines[0])
    known = {"class_names", "ignore_value_on_disk"}
    manifest = DatasetManifest(
        records=[ManifestRecord(**json.loads(ln)) for ln in lines[1:]],
        class_names=list(header["class_names"]),
        ignore_value_on_disk=int(header.get("ignore_value_on_disk", 255)),
        root=path.parent,
        extra={k: v for k, v in header.items() if k not in known},
    )
    manifest.validate()
    return manifest
