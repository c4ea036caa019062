import * as readline from "node:readline";
import { Detector } from "./detector";
import { loadPng } from "./image";
import { parseRequest, serializeResponse } from "./protocol";

function writeLine(text: string): Promise<void> {
  return new Promise((resolve, reject) => {
    if (process.stdout.write(text)) {
      resolve();
    } else {
      process.stdout.once("drain", resolve);
      process.stdout.once("error", reject);
    }
  });
}

/**
 * The protocol loop: one response line per request line, strictly in
 * order. Per-frame failures (unreadable image, inference error) and
 * malformed request lines produce an error response instead of crashing.
 * Returns 0 when stdin closes.
 */
export async function serve(detector: Detector): Promise<number> {
  const rl = readline.createInterface({ input: process.stdin, terminal: false });
  for await (const line of rl) {
    if (line.trim().length === 0) {
      continue;
    }
    let frameId = "";
    try {
      const request = parseRequest(line);
      frameId = request.frame_id;
      const image = loadPng(request.image_path);
      const detections = await detector.detect(image);
      await writeLine(serializeResponse({ frame_id: frameId, detections }));
    } catch (err) {
      const message = err instanceof Error ? err.message : String(err);
      await writeLine(
        serializeResponse({ frame_id: frameId, detections: [], error: message }),
      );
    }
  }
  return 0;
}
