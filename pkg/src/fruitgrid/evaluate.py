"""Detection/ground-truth matching and benchmark metrics.

Detections are localised on the grid plane through the calibration
homography and greedily matched one-to-one to same-label ground-truth
fruits by ascending world distance, within a distance threshold. The
aggregate report mirrors the benchmark table: true-positive detection
percentage and per-axis mean absolute localisation error in cm, per
(crop, lighting condition, disturbances on/off).

Ghost detections (fruit-labelled, matched to nothing) never reduce the
detection percentage; they are counted separately so precision can be
audited. Detections labelled outside the fruit classes are ignored
entirely.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from pathlib import Path

from .detect import FRUIT_CLASSES, Detection
from .errors import EmptyInput, NoMatches
from .geometry import Homography, apply_homography
from .synth import FruitTruth, GroundTruth

DEFAULT_MATCH_THRESHOLD_CM = 2.0

REPORT_SCHEMA_VERSION = 1
CSV_COLUMNS = (
    "crop",
    "condition",
    "disturbances",
    "x_mean_cm",
    "y_mean_cm",
    "detection_pct",
    "n_patterns",
    "n_fruits",
)


@dataclass(frozen=True, slots=True)
class MatchedPair:
    truth_index: int
    truth: FruitTruth
    detection_index: int
    detection: Detection
    dx_cm: float
    dy_cm: float


@dataclass(frozen=True, slots=True)
class MatchResult:
    """One frame's matching outcome: pairs, missed truths, ghost detections."""

    pairs: tuple[MatchedPair, ...]
    misses: tuple[tuple[int, FruitTruth], ...]
    ghosts: tuple[tuple[int, Detection], ...]

    @property
    def truth_count(self) -> int:
        return len(self.pairs) + len(self.misses)


def match_detections(
    truth: GroundTruth,
    detections,
    h: Homography,
    threshold_cm: float = DEFAULT_MATCH_THRESHOLD_CM,
) -> MatchResult:
    """Greedy one-to-one matching by ascending world distance.

    Only same-label pairs within ``threshold_cm`` are candidates; ties on
    distance prefer higher confidence, then earlier frame order. Non-fruit
    detections are ignored entirely.
    """
    if threshold_cm <= 0:
        raise ValueError("threshold_cm must be positive")
    detections = list(detections)
    fruit_dets = [(j, d) for j, d in enumerate(detections) if d.is_fruit]
    localised = {j: apply_homography(h, d.picking_point) for j, d in fruit_dets}

    candidates = []
    for i, ft in enumerate(truth.fruits):
        for j, det in fruit_dets:
            if det.label != ft.label:
                continue
            w = localised[j]
            dx, dy = w.x - ft.world.x, w.y - ft.world.y
            dist = (dx * dx + dy * dy) ** 0.5
            if dist <= threshold_cm:
                candidates.append((dist, -det.confidence, j, i, dx, dy))
    candidates.sort()

    used_truths: set[int] = set()
    used_dets: set[int] = set()
    pairs = []
    for dist, _, j, i, dx, dy in candidates:
        if i in used_truths or j in used_dets:
            continue
        used_truths.add(i)
        used_dets.add(j)
        pairs.append(
            MatchedPair(
                truth_index=i,
                truth=truth.fruits[i],
                detection_index=j,
                detection=detections[j],
                dx_cm=dx,
                dy_cm=dy,
            )
        )
    pairs.sort(key=lambda p: p.truth_index)
    misses = tuple((i, ft) for i, ft in enumerate(truth.fruits) if i not in used_truths)
    ghosts = tuple((j, d) for j, d in fruit_dets if j not in used_dets)
    return MatchResult(pairs=tuple(pairs), misses=misses, ghosts=ghosts)


def filter_by_crop(result: MatchResult, crop: str) -> MatchResult:
    return MatchResult(
        pairs=tuple(p for p in result.pairs if p.truth.label == crop),
        misses=tuple((i, ft) for i, ft in result.misses if ft.label == crop),
        ghosts=tuple((j, d) for j, d in result.ghosts if d.label == crop),
    )


def detection_rate(results) -> float:
    """Pooled true-positive percentage: 100 x matched / total truths."""
    results = list(results)
    matched = sum(len(r.pairs) for r in results)
    total = sum(r.truth_count for r in results)
    if total == 0:
        raise EmptyInput("detection rate over zero ground-truth fruits")
    return 100.0 * matched / total


def localisation_error(results) -> tuple[float, float]:
    """Pooled per-axis mean absolute deviation (cm) over matched pairs."""
    results = list(results)
    pairs = [p for r in results for p in r.pairs]
    if not pairs:
        raise NoMatches("localisation error over zero matched pairs")
    x_mean = sum(abs(p.dx_cm) for p in pairs) / len(pairs)
    y_mean = sum(abs(p.dy_cm) for p in pairs) / len(pairs)
    return x_mean, y_mean


# ----------------------------------------------------------- aggregation

@dataclass(frozen=True, slots=True)
class MetricsRow:
    crop: str
    condition: str
    disturbed: bool
    x_mean_cm: float | None
    y_mean_cm: float | None
    detection_pct: float
    n_patterns: int
    n_fruits: int
    n_ghosts: int


@dataclass(frozen=True, slots=True)
class MetricsReport:
    rows: tuple[MetricsRow, ...]

    def row(self, crop: str, condition: str, disturbed: bool) -> MetricsRow:
        for r in self.rows:
            if (r.crop, r.condition, r.disturbed) == (crop, condition, disturbed):
                return r
        raise KeyError((crop, condition, disturbed))


def aggregate_metrics(frames) -> MetricsReport:
    """Build the report from (condition, disturbed, MatchResult) triples.

    One row per (crop, condition, disturbances) cell that has at least
    one ground-truth fruit; a frame counts as one pattern.
    """
    frames = list(frames)
    cells: dict[tuple[str, str, bool], list[MatchResult]] = {}
    for condition, disturbed, result in frames:
        for crop in FRUIT_CLASSES:
            cells.setdefault((crop, condition, disturbed), []).append(
                filter_by_crop(result, crop)
            )
    rows = []
    for (crop, condition, disturbed) in sorted(cells, key=lambda k: (k[0], k[1], k[2])):
        results = cells[(crop, condition, disturbed)]
        total = sum(r.truth_count for r in results)
        if total == 0:
            continue
        try:
            x_mean, y_mean = localisation_error(results)
        except NoMatches:
            x_mean = y_mean = None
        rows.append(
            MetricsRow(
                crop=crop,
                condition=condition,
                disturbed=disturbed,
                x_mean_cm=x_mean,
                y_mean_cm=y_mean,
                detection_pct=detection_rate(results),
                n_patterns=len(results),
                n_fruits=total,
                n_ghosts=sum(len(r.ghosts) for r in results),
            )
        )
    return MetricsReport(rows=tuple(rows))


def _row_dict(row: MetricsRow) -> dict:
    return {
        "crop": row.crop,
        "condition": row.condition,
        "disturbances": "with" if row.disturbed else "without",
        "x_mean_cm": row.x_mean_cm,
        "y_mean_cm": row.y_mean_cm,
        "detection_pct": row.detection_pct,
        "n_patterns": row.n_patterns,
        "n_fruits": row.n_fruits,
        "n_ghosts": row.n_ghosts,
    }


def emit_report(report: MetricsReport, fmt: str = "table") -> str:
    """Render the report as ``table``, ``json``, or ``csv``.

    The CSV column order is fixed (crop, condition, disturbances,
    x_mean_cm, y_mean_cm, detection_pct, n_patterns, n_fruits); the JSON
    document is versioned and additionally carries ghost counts.
    """
    if fmt == "json":
        doc = {
            "schema_version": REPORT_SCHEMA_VERSION,
            "rows": [_row_dict(r) for r in report.rows],
        }
        return json.dumps(doc, indent=2) + "\n"
    if fmt == "csv":
        out = io.StringIO()
        out.write(",".join(CSV_COLUMNS) + "\n")
        for r in report.rows:
            out.write(
                ",".join(
                    [
                        r.crop,
                        r.condition,
                        "with" if r.disturbed else "without",
                        "" if r.x_mean_cm is None else f"{r.x_mean_cm:.4f}",
                        "" if r.y_mean_cm is None else f"{r.y_mean_cm:.4f}",
                        f"{r.detection_pct:.2f}",
                        str(r.n_patterns),
                        str(r.n_fruits),
                    ]
                )
                + "\n"
            )
        return out.getvalue()
    if fmt == "table":
        header = (
            "crop",
            "condition",
            "disturbances",
            "x mean (cm)",
            "y mean (cm)",
            "detection (%)",
            "patterns",
            "fruits",
            "ghosts",
        )
        body = [
            (
                r.crop,
                r.condition,
                "with" if r.disturbed else "without",
                "-" if r.x_mean_cm is None else f"{r.x_mean_cm:.3f}",
                "-" if r.y_mean_cm is None else f"{r.y_mean_cm:.3f}",
                f"{r.detection_pct:.1f}",
                str(r.n_patterns),
                str(r.n_fruits),
                str(r.n_ghosts),
            )
            for r in report.rows
        ]
        widths = [max(len(h), *(len(row[i]) for row in body)) if body else len(h)
                  for i, h in enumerate(header)]
        lines = [
            "  ".join(h.ljust(widths[i]) for i, h in enumerate(header)),
            "  ".join("-" * widths[i] for i in range(len(header))),
        ]
        lines += ["  ".join(c.ljust(widths[i]) for i, c in enumerate(row)) for row in body]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format: {fmt!r}")


# -------------------------------------------------------- raw pair dump

def frame_records(frame_id: str, result: MatchResult) -> list[dict]:
    """JSON-lines records for one frame: pairs, misses, ghosts."""
    records = []
    for p in result.pairs:
        records.append(
            {
                "type": "pair",
                "frame": frame_id,
                "truth_id": p.truth_index,
                "det_id": p.detection_index,
                "label": p.truth.label,
                "dx_cm": p.dx_cm,
                "dy_cm": p.dy_cm,
            }
        )
    for i, ft in result.misses:
        records.append({"type": "miss", "frame": frame_id, "truth_id": i, "label": ft.label})
    for j, det in result.ghosts:
        records.append({"type": "ghost", "frame": frame_id, "det_id": j, "label": det.label})
    return records


def write_pair_dump(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, separators=(",", ":")) + "\n")


def read_pair_dump(path):
    return [
        json.loads(line)
        for line in Path(path).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
