/**
 * Wire protocol types: newline-delimited JSON over stdin/stdout.
 *
 * One request line yields exactly one response line, in order. Malformed
 * or failing requests still get a response line carrying an `error`
 * field and an empty detections list, so the host's line accounting
 * never desynchronizes.
 */

export interface DetectionRequest {
  frame_id: string;
  image_path: string;
}

export interface WireDetection {
  label: string;
  confidence: number;
  box: [number, number, number, number]; // x1, y1, x2, y2 in pixels
}

export interface DetectionResponse {
  frame_id: string;
  detections: WireDetection[];
  error?: string;
}

export function parseRequest(line: string): DetectionRequest {
  let doc: unknown;
  try {
    doc = JSON.parse(line);
  } catch {
    throw new Error("malformed request line: not valid JSON");
  }
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
    throw new Error("malformed request line: not a JSON object");
  }
  const frameId = (doc as Record<string, unknown>)["frame_id"];
  const imagePath = (doc as Record<string, unknown>)["image_path"];
  if (typeof frameId !== "string" || frameId.length === 0) {
    throw new Error("malformed request line: frame_id must be a non-empty string");
  }
  if (typeof imagePath !== "string" || imagePath.length === 0) {
    throw new Error("malformed request line: image_path must be a non-empty string");
  }
  return { frame_id: frameId, image_path: imagePath };
}

export function serializeResponse(response: DetectionResponse): string {
  // key order is part of the wire contract: frame_id, detections[, error]
  const payload: Record<string, unknown> = {
    frame_id: response.frame_id,
    detections: response.detections.map((d) => ({
      label: d.label,
      confidence: d.confidence,
      box: d.box,
    })),
  };
  if (response.error !== undefined) {
    payload.error = response.error;
  }
  return JSON.stringify(payload) + "\n";
}
