"""Uniform detection abstraction.

Two detector families share one output type: the built-in HSV pipeline
and external detector processes driven over a newline-delimited JSON
protocol on stdin/stdout (one request line, one response line, strictly
serial per handle).

Wire format:
  request:  {"frame_id":"<id>","image_path":"<path>"}\\n
  response: {"frame_id":"<id>","detections":[{"label":"<str>",
             "confidence":<num>,"box":[x1,y1,x2,y2]}]}\\n
UTF-8, JSON doubles, box in pixels. A response may carry an extra
"error" field (emitted by adapters on per-frame failures); it is
tolerated and the detections list (usually empty) is used as-is.
"""

from __future__ import annotations

import json
import os
import select
import shlex
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass

import numpy as np

from . import hsv as hsvmod
from .errors import BackendExited, BackendTimeout, ProtocolViolation, ScriptExhausted
from .geometry import BoundingBox, PixelPoint, bbox_midpoint
from .validation import check_rgb_image

FRUIT_CLASSES = ("apple", "orange")

# Boxes under this confidence are dropped at the interface, before class
# mapping. Config-overridable; never asserted as a property of any
# particular external model.
DEFAULT_CONFIDENCE_THRESHOLD = 0.25

# Exit code the scripted stub uses to signal it ran out of canned replies.
SCRIPT_EXHAUSTED_EXIT_CODE = 42


@dataclass(frozen=True, slots=True)
class Detection:
    """A labelled box with confidence and its derived picking point."""

    label: str
    confidence: float
    box: BoundingBox
    picking_point: PixelPoint

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")
        if self.picking_point != bbox_midpoint(self.box):
            raise ValueError("picking_point must equal the box midpoint")

    @classmethod
    def from_box(cls, label: str, confidence: float, box: BoundingBox) -> "Detection":
        return cls(label=label, confidence=confidence, box=box, picking_point=bbox_midpoint(box))

    @property
    def is_fruit(self) -> bool:
        return self.label in FRUIT_CLASSES


@dataclass(frozen=True, slots=True)
class DetectionRequest:
    frame_id: str
    image_path: str

    def __post_init__(self):
        if not self.frame_id:
            raise ValueError("frame_id must be non-empty")

    def to_line(self) -> bytes:
        payload = {"frame_id": self.frame_id, "image_path": str(self.image_path)}
        return (json.dumps(payload, separators=(",", ":")) + "\n").encode("utf-8")


class ClassMap:
    """Total map from backend class names to pipeline labels.

    Mapped names become the given fruit class; unmapped names pass
    through unchanged and never count as fruit (e.g. a backend's
    "sports ball" stays "sports ball" and is excluded from metrics).
    """

    def __init__(self, mapping: dict[str, str] | None = None):
        mapping = dict(DEFAULT_CLASS_MAPPING if mapping is None else mapping)
        for source, target in mapping.items():
            if target not in FRUIT_CLASSES:
                raise ValueError(
                    f"class map targets must be one of {FRUIT_CLASSES}, "
                    f"got {source!r} -> {target!r}"
                )
        self.mapping = mapping

    def resolve(self, name: str) -> str:
        return self.mapping.get(name, name)


DEFAULT_CLASS_MAPPING = {"apple": "apple", "orange": "orange"}


def detect_hsv(
    img: np.ndarray,
    ranges=None,
    *,
    min_area: int = hsvmod.DEFAULT_MIN_AREA,
    morph_radius: int = hsvmod.DEFAULT_MORPH_RADIUS,
) -> list[Detection]:
    """Run the colour pipeline for every labelled range and merge.

    Per label: threshold -> open/close -> components -> detections.
    The union is ordered by confidence then component area, descending.
    """
    img = check_rgb_image(img)
    if ranges is None:
        ranges = hsvmod.DEFAULT_FRUIT_RANGES
    scored: list[tuple[float, int, int, int, Detection]] = []
    for label, hsv_range in ranges:
        mask = hsvmod.threshold_mask(img, hsv_range)
        mask = hsvmod.morphological_open_close(mask, morph_radius)
        contours = hsvmod.extract_components(mask, min_area)
        for contour, det in zip(contours, hsvmod.detections_from_contours(contours, label)):
            scored.append((det.confidence, contour.area, contour.anchor[1], contour.anchor[0], det))
    scored.sort(key=lambda item: (-item[0], -item[1], item[2], item[3]))
    return [item[4] for item in scored]


class BackendHandle:
    """A running external detector process with line-oriented pipes.

    One request may be in flight at a time; a handle must not be shared
    across threads without external locking. ``record_transcript=True``
    keeps the exact request/response bytes for protocol audits.
    """

    def __init__(self, command, *, record_transcript: bool = False):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        self._proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, bufsize=0
        )
        self._buffer = b""
        self.transcript: list[tuple[str, bytes]] | None = [] if record_transcript else None

    @property
    def pid(self) -> int:
        return self._proc.pid

    def _record(self, direction: str, data: bytes) -> None:
        if self.transcript is not None:
            self.transcript.append((direction, data))

    def send_line(self, line: bytes) -> None:
        try:
            self._proc.stdin.write(line)
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise self._exited_error() from exc
        self._record(">", line)

    def read_line(self, timeout: float) -> bytes:
        fd = self._proc.stdout.fileno()
        deadline = time.monotonic() + timeout
        while b"\n" not in self._buffer:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise BackendTimeout(f"no response line within {timeout} s")
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                raise BackendTimeout(f"no response line within {timeout} s")
            chunk = os.read(fd, 65536)
            if chunk == b"":
                raise self._exited_error()
            self._buffer += chunk
        line, self._buffer = self._buffer.split(b"\n", 1)
        line += b"\n"
        self._record("<", line)
        return line

    def request_line(self, req: DetectionRequest, timeout: float) -> bytes:
        self.send_line(req.to_line())
        return self.read_line(timeout)

    def _exited_error(self) -> BackendExited:
        code = self._proc.poll()
        if code is None:
            try:
                code = self._proc.wait(timeout=1.0)
            except subprocess.TimeoutExpired:
                code = None
        if code == SCRIPT_EXHAUSTED_EXIT_CODE:
            return ScriptExhausted("stub backend ran out of scripted responses")
        return BackendExited(f"backend exited mid-stream (exit code {code})")

    def close(self) -> int | None:
        """Close stdin (EOF), wait briefly, kill if the process lingers."""
        if self._proc.stdin and not self._proc.stdin.closed:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
        try:
            return self._proc.wait(timeout=5.0)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            return self._proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _parse_response(line: bytes, expected_frame_id: str) -> list[dict]:
    try:
        doc = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolViolation(f"malformed response line: {line!r}") from exc
    if not isinstance(doc, dict):
        raise ProtocolViolation(f"response must be a JSON object, got {type(doc).__name__}")
    if doc.get("frame_id") != expected_frame_id:
        raise ProtocolViolation(
            f"frame_id mismatch: sent {expected_frame_id!r}, got {doc.get('frame_id')!r}"
        )
    detections = doc.get("detections")
    if not isinstance(detections, list):
        raise ProtocolViolation("response lacks a detections array")
    for det in detections:
        if not isinstance(det, dict):
            raise ProtocolViolation("detection entries must be objects")
        box = det.get("box")
        if (
            not isinstance(box, (list, tuple))
            or len(box) != 4
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in box)
        ):
            raise ProtocolViolation(f"invalid box: {box!r}")
        if box[0] > box[2] or box[1] > box[3]:
            raise ProtocolViolation(f"invalid box (corners out of order): {box!r}")
        conf = det.get("confidence")
        if not isinstance(conf, (int, float)) or isinstance(conf, bool) or not 0.0 <= conf <= 1.0:
            raise ProtocolViolation(f"invalid confidence: {conf!r}")
        if not isinstance(det.get("label"), str):
            raise ProtocolViolation(f"invalid label: {det.get('label')!r}")
    return detections


def detect_external(
    backend: BackendHandle,
    req: DetectionRequest,
    class_map: ClassMap | None = None,
    timeout: float = 30.0,
    *,
    confidence_threshold: float = DEFAULT_CONFIDENCE_THRESHOLD,
) -> list[Detection]:
    """One round trip over the wire protocol, mapped into Detections.

    Sub-threshold boxes are dropped before class mapping; picking points
    are the box midpoints.
    """
    if class_map is None:
        class_map = ClassMap()
    line = backend.request_line(req, timeout)
    raw = _parse_response(line, req.frame_id)
    out = []
    for det in raw:
        if det["confidence"] < confidence_threshold:
            continue
        label = class_map.resolve(det["label"])
        box = BoundingBox(*(float(x) for x in det["box"]))
        out.append(Detection.from_box(label, float(det["confidence"]), box))
    return out


class StubBackendHandle(BackendHandle):
    """Handle over the scripted stub; refuses requests beyond the script."""

    def __init__(self, command, script_length: int, *, record_transcript: bool = False):
        super().__init__(command, record_transcript=record_transcript)
        self._script_length = script_length
        self._requests_sent = 0

    def send_line(self, line: bytes) -> None:
        if self._requests_sent >= self._script_length:
            raise ScriptExhausted(
                f"script holds {self._script_length} responses, request "
                f"{self._requests_sent + 1} refused"
            )
        self._requests_sent += 1
        super().send_line(line)


def stub_backend(script, *, record_transcript: bool = False) -> StubBackendHandle:
    """Launch the scripted stub detector as a subprocess.

    ``script`` is a list of canned response entries; the i-th request is
    answered by the i-th entry with the incoming frame_id substituted.
    Entries may instead carry stub directives ("raw", "delay_s", "exit",
    "frame_id") used to exercise host error paths.
    """
    path = tempfile.NamedTemporaryFile(
        mode="w", suffix=".json", prefix="fruitgrid-stub-", delete=False, encoding="utf-8"
    )
    with path as fh:
        json.dump(list(script), fh)
    command = [sys.executable, "-m", "fruitgrid.stub_backend", path.name]
    return StubBackendHandle(command, len(list(script)), record_transcript=record_transcript)
