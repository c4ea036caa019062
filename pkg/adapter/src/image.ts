import * as fs from "node:fs";
import { PNG } from "pngjs";

export interface RgbImage {
  width: number;
  height: number;
  /** Row-major RGB triples, 8 bit. */
  data: Uint8Array;
}

/** Load an 8-bit RGB(A) PNG from disk, dropping any alpha channel. */
export function loadPng(path: string): RgbImage {
  const buffer = fs.readFileSync(path);
  const png = PNG.sync.read(buffer);
  const pixels = png.width * png.height;
  const rgb = new Uint8Array(pixels * 3);
  for (let i = 0; i < pixels; i++) {
    rgb[i * 3] = png.data[i * 4];
    rgb[i * 3 + 1] = png.data[i * 4 + 1];
    rgb[i * 3 + 2] = png.data[i * 4 + 2];
  }
  return { width: png.width, height: png.height, data: rgb };
}
