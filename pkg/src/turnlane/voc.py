"""Pascal VOC annotation documents (annotation/size/object/bndbox)."""
from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path


@dataclass(frozen=True)
class VocObject:
    name: str
    xmin: int
    ymin: int
    xmax: int
    ymax: int
    truncated: int = 0
    difficult: int = 0

    @property
    def bbox(self) -> tuple[int, int, int, int]:
        return (self.xmin, self.ymin, self.xmax, self.ymax)


@dataclass(frozen=True)
class VocAnnotation:
    filename: str
    width: int
    height: int
    depth: int = 3
    folder: str = "images"
    objects: tuple[VocObject, ...] = field(default_factory=tuple)


def to_xml(ann: VocAnnotation) -> str:
    root = ET.Element("annotation")
    ET.SubElement(root, "folder").text = ann.folder
    ET.SubElement(root, "filename").text = ann.filename
    size = ET.SubElement(root, "size")
    ET.SubElement(size, "width").text = str(ann.width)
    ET.SubElement(size, "height").text = str(ann.height)
    ET.SubElement(size, "depth").text = str(ann.depth)
    ET.SubElement(root, "segmented").text = "0"
    for obj in ann.objects:
        o = ET.SubElement(root, "object")
        ET.SubElement(o, "name").text = obj.name
        ET.SubElement(o, "pose").text = "Unspecified"
        ET.SubElement(o, "truncated").text = str(obj.truncated)
        ET.SubElement(o, "difficult").text = str(obj.difficult)
        box = ET.SubElement(o, "bndbox")
        for tag in ("xmin", "ymin", "xmax", "ymax"):
            ET.SubElement(box, tag).text = str(getattr(obj, tag))
    ET.indent(root, space="  ")
    return ET.tostring(root, encoding="unicode") + "\n"


def from_xml(text: str) -> VocAnnotation:
    root = ET.fromstring(text)
    size = root.find("size")
    objects = []
    for o in root.iter("object"):
        box = o.find("bndbox")
        objects.append(VocObject(
            name=o.findtext("name"),
            xmin=int(float(box.findtext("xmin"))),
            ymin=int(float(box.findtext("ymin"))),
            xmax=int(float(box.findtext("xmax"))),
            ymax=int(float(box.findtext("ymax"))),
            truncated=int(o.findtext("truncated", "0")),
            difficult=int(o.findtext("difficult", "0")),
        ))
    return VocAnnotation(
        filename=root.findtext("filename"),
        width=int(size.findtext("width")),
        height=int(size.findtext("height")),
        depth=int(size.findtext("depth", "3")),
        folder=root.findtext("folder", "images"),
        objects=tuple(objects),
    )


def write(path: Path, ann: VocAnnotation) -> None:
    Path(path).write_text(to_xml(ann))


def read(path: Path) -> VocAnnotation:
    return from_xml(Path(path).read_text())
