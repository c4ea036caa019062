import { spawn } from "node:child_process";
import * as path from "node:path";
import { describe, expect, it } from "vitest";

const MAIN = path.join(__dirname, "..", "dist", "main.js");
const FIXTURES = path.join(__dirname, "fixtures");

interface RunResult {
  code: number | null;
  lines: string[];
  stderr: string;
}

function runAdapter(inputLines: string[], args: string[] = []): Promise<RunResult> {
  return new Promise((resolve, reject) => {
    const child = spawn("node", [MAIN, ...args], { stdio: ["pipe", "pipe", "pipe"] });
    let stdout = "";
    let stderr = "";
    child.stdout.on("data", (chunk) => (stdout += chunk));
    child.stderr.on("data", (chunk) => (stderr += chunk));
    child.on("error", reject);
    child.on("close", (code) => {
      resolve({ code, lines: stdout.split("\n").filter((l) => l.length > 0), stderr });
    });
    child.stdin.write(inputLines.map((l) => l + "\n").join(""));
    child.stdin.end();
  });
}

describe("adapter protocol loop", { timeout: 60_000 }, () => {
  it("exits 0 with no output when stdin closes immediately", async () => {
    const result = await runAdapter([]);
    expect(result.code).toBe(0);
    expect(result.lines).toEqual([]);
  });

  it("answers every request line exactly once, in order", async () => {
    const scene = path.join(FIXTURES, "scene.png");
    const empty = path.join(FIXTURES, "empty.png");
    const result = await runAdapter([
      JSON.stringify({ frame_id: "f0", image_path: scene }),
      JSON.stringify({ frame_id: "f1", image_path: empty }),
      "definitely not json",
      JSON.stringify({ frame_id: "f3", image_path: "/missing/file.png" }),
    ]);
    expect(result.code).toBe(0);
    expect(result.lines).toHaveLength(4);

    const docs = result.lines.map((l) => JSON.parse(l));
    expect(docs.map((d) => d.frame_id)).toEqual(["f0", "f1", "", "f3"]);

    // scene response: schema-valid detections with ordered boxes
    for (const det of docs[0].detections) {
      expect(typeof det.label).toBe("string");
      expect(det.confidence).toBeGreaterThanOrEqual(0);
      expect(det.confidence).toBeLessThanOrEqual(1);
      expect(det.box).toHaveLength(4);
      expect(det.box[0]).toBeLessThanOrEqual(det.box[2]);
      expect(det.box[1]).toBeLessThanOrEqual(det.box[3]);
    }
    // a fruitless plate yields nothing above threshold
    expect(docs[1].detections).toEqual([]);
    // failures answer with an error field instead of crashing
    expect(docs[2].error).toMatch(/malformed/);
    expect(docs[2].detections).toEqual([]);
    expect(docs[3].error).toBeTruthy();
    expect(docs[3].detections).toEqual([]);
  });

  it("keeps responses identical across runs", async () => {
    const scene = path.join(FIXTURES, "scene.png");
    const request = JSON.stringify({ frame_id: "same", image_path: scene });
    const first = await runAdapter([request]);
    const second = await runAdapter([request]);
    expect(first.lines).toEqual(second.lines);
  });

  it("rejects bad thresholds with a usage error", async () => {
    const result = await runAdapter([], ["--threshold", "7"]);
    expect(result.code).toBe(2);
  });
});
