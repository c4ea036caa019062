"""Scripted stand-in for an external detector process.

Reads request lines from stdin and answers the i-th request with the
i-th canned entry from a JSON script file, substituting the incoming
frame_id. Besides plain replies ({"detections": [...]}), entries may be
directives for exercising host error paths:

  {"raw": "<text>"}        emit the text verbatim instead of a response
  {"delay_s": <seconds>}   sleep before replying (then reply normally)
  {"exit": <code>}         exit immediately with the given code
  {"frame_id": "<id>"}     reply with this frame_id instead of echoing

Exits 0 when stdin closes; exits 42 if a request arrives after the
script is exhausted.
"""

from __future__ import annotations

import json
import sys
import time


def serve(script: list[dict]) -> int:
    for index, line in enumerate(sys.stdin):
        if not line.strip():
            continue
        if index >= len(script):
            print("fruitgrid-stub: script exhausted", file=sys.stderr)
            return 42
        entry = script[index]
        if "delay_s" in entry:
            time.sleep(float(entry["delay_s"]))
        if "exit" in entry:
            return int(entry["exit"])
        if "raw" in entry:
            sys.stdout.write(entry["raw"])
            sys.stdout.flush()
            continue
        try:
            frame_id = json.loads(line).get("frame_id", "")
        except json.JSONDecodeError:
            frame_id = ""
        response = {
            "frame_id": entry.get("frame_id", frame_id),
            "detections": entry.get("detections", []),
        }
        sys.stdout.write(json.dumps(response, separators=(",", ":")) + "\n")
        sys.stdout.flush()
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        print("usage: python -m fruitgrid.stub_backend <script.json>", file=sys.stderr)
        return 2
    with open(argv[0], encoding="utf-8") as fh:
        script = json.load(fh)
    return serve(script)


if __name__ == "__main__":
    sys.exit(main())
