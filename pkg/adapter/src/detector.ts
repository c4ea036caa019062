import * as fs from "node:fs";
import * as path from "node:path";
import * as tf from "@tensorflow/tfjs";
import { COCO_CLASSES } from "./coco";
import { RgbImage } from "./image";
import { WireDetection } from "./protocol";

export interface DetectorOptions {
  /** "builtin" or a path to a tfjs model directory (model.json + shards). */
  model: string;
  /** Detections below this confidence are not emitted. */
  threshold: number;
  /** tfjs backend name; "cpu" is always available in plain Node. */
  backend: string;
  /** Square inference size for directory models. */
  inputSize: number;
  /** When set, only these class names are emitted. */
  passthrough: string[] | null;
}

export const DEFAULT_OPTIONS: DetectorOptions = {
  model: "builtin",
  threshold: 0.25,
  backend: "cpu",
  inputSize: 256,
  passthrough: null,
};

// Builtin head geometry: the image is resized to INPUT x INPUT and scored
// on a GRID x GRID lattice of cells.
const BUILTIN_INPUT = 256;
const BUILTIN_GRID = 16;
const BUILTIN_CELL = BUILTIN_INPUT / BUILTIN_GRID;

/**
 * Object detector behind the stdio adapter.
 *
 * Two model sources:
 *  - "builtin": a deterministic colour-statistics head implemented in
 *    tfjs ops. Each grid cell scores sigmoid(300 * chroma * contrast - 4),
 *    so uniform achromatic frames score ~0.018 and produce no output at
 *    sane thresholds. Class logits are cosine scores against fixed colour
 *    prototypes (apple red, orange orange) plus a seeded random map for
 *    the remaining COCO classes. A stand-in wired like a real single-stage
 *    head, not a trained model; hosts should never assert its content.
 *  - a directory holding a tfjs graph/layers model whose output is
 *    (1, N, 5 + K): normalized [x1, y1, x2, y2], objectness, K class
 *    scores. Class names come from classes.json next to model.json when
 *    present, else the COCO list.
 */
export class Detector {
  private constructor(
    private readonly opts: DetectorOptions,
    private readonly model: tf.GraphModel | tf.LayersModel | null,
    private readonly classNames: readonly string[],
    private readonly classWeights: tf.Tensor2D | null,
  ) {}

  static async create(opts: DetectorOptions): Promise<Detector> {
    await tf.setBackend(opts.backend);
    await tf.ready();
    if (opts.model === "builtin") {
      return new Detector(opts, null, COCO_CLASSES, builtinClassWeights());
    }
    const { model, classNames } = await loadDirectoryModel(opts.model);
    return new Detector(opts, model, classNames, null);
  }

  async detect(image: RgbImage): Promise<WireDetection[]> {
    const raw =
      this.model === null ? this.detectBuiltin(image) : await this.detectModel(image);
    return raw
      .filter((d) => d.confidence >= this.opts.threshold)
      .filter(
        (d) => this.opts.passthrough === null || this.opts.passthrough.includes(d.label),
      )
      .map((d) => clampDetection(d, image.width, image.height))
      .sort((a, b) => b.confidence - a.confidence);
  }

  private detectBuiltin(image: RgbImage): WireDetection[] {
    const weights = this.classWeights!;
    const [scores, classIdx] = tf.tidy(() => {
      const img = tf
        .tensor3d(Float32Array.from(image.data), [image.height, image.width, 3])
        .div(255.0) as tf.Tensor3D;
      const resized = tf.image.resizeBilinear(img, [BUILTIN_INPUT, BUILTIN_INPUT]);
      const mean = tf.avgPool(resized, BUILTIN_CELL, BUILTIN_CELL, "valid");
      const meanSq = tf.avgPool(resized.square(), BUILTIN_CELL, BUILTIN_CELL, "valid");
      const variance = tf.relu(meanSq.sub(mean.square()));
      const contrast = variance.mean(-1).sqrt();
      const chroma = mean.max(-1).sub(mean.min(-1));
      const logit = chroma.mul(contrast).mul(300.0).sub(4.0);
      const score = tf.sigmoid(logit).reshape([BUILTIN_GRID * BUILTIN_GRID]);
      // class scores from the chromatic residual so the achromatic plate
      // does not dominate every cell's colour signature
      const chromatic = mean.sub(mean.min(-1, true));
      const cells = chromatic.reshape([BUILTIN_GRID * BUILTIN_GRID, 3]) as tf.Tensor2D;
      const norm = cells.norm("euclidean", -1, true).add(1e-6);
      const classLogits = tf.matMul(cells.div(norm) as tf.Tensor2D, weights);
      return [score.dataSync(), classLogits.argMax(-1).dataSync()];
    });
    const detections: WireDetection[] = [];
    const cellW = image.width / BUILTIN_GRID;
    const cellH = image.height / BUILTIN_GRID;
    for (let gy = 0; gy < BUILTIN_GRID; gy++) {
      for (let gx = 0; gx < BUILTIN_GRID; gx++) {
        const i = gy * BUILTIN_GRID + gx;
        detections.push({
          label: this.classNames[classIdx[i] % this.classNames.length],
          confidence: Math.min(1, Math.max(0, scores[i])),
          box: [gx * cellW, gy * cellH, (gx + 1) * cellW, (gy + 1) * cellH],
        });
      }
    }
    return detections;
  }

  private async detectModel(image: RgbImage): Promise<WireDetection[]> {
    const size = this.opts.inputSize;
    const input = tf.tidy(() =>
      tf.image
        .resizeBilinear(
          tf.tensor3d(Float32Array.from(image.data), [image.height, image.width, 3]),
          [size, size],
        )
        .div(255.0)
        .expandDims(0),
    );
    let output: tf.Tensor;
    try {
      const model = this.model!;
      output =
        model instanceof tf.GraphModel
          ? ((await model.executeAsync(input)) as tf.Tensor)
          : (model.predict(input) as tf.Tensor);
    } finally {
      input.dispose();
    }
    const squeezed = output.squeeze([0]) as tf.Tensor2D;
    const data = (await squeezed.array()) as number[][];
    output.dispose();
    squeezed.dispose();

    const detections: WireDetection[] = [];
    for (const row of data) {
      if (row.length < 6) {
        throw new Error(`model output rows must be [x1,y1,x2,y2,score,classes...], got length ${row.length}`);
      }
      const classScores = row.slice(5);
      let best = 0;
      for (let k = 1; k < classScores.length; k++) {
        if (classScores[k] > classScores[best]) best = k;
      }
      detections.push({
        label: this.classNames[best % this.classNames.length],
        confidence: Math.min(1, Math.max(0, row[4] * classScores[best])),
        box: [
          row[0] * image.width,
          row[1] * image.height,
          row[2] * image.width,
          row[3] * image.height,
        ],
      });
    }
    return detections;
  }
}

function clampDetection(d: WireDetection, width: number, height: number): WireDetection {
  const clamp = (v: number, hi: number) => Math.min(hi, Math.max(0, v));
  let [x1, y1, x2, y2] = d.box;
  x1 = clamp(x1, width);
  x2 = clamp(x2, width);
  y1 = clamp(y1, height);
  y2 = clamp(y2, height);
  return {
    label: d.label,
    confidence: d.confidence,
    box: [Math.min(x1, x2), Math.min(y1, y2), Math.max(x1, x2), Math.max(y1, y2)],
  };
}

/** Deterministic class-score map: colour prototypes for the fruit classes,
 * a seeded random projection for the rest. */
function builtinClassWeights(): tf.Tensor2D {
  const rand = mulberry32(0x5eed);
  const weights = new Float32Array(3 * COCO_CLASSES.length);
  for (let k = 0; k < COCO_CLASSES.length; k++) {
    for (let c = 0; c < 3; c++) {
      weights[c * COCO_CLASSES.length + k] = (rand() * 2 - 1) * 0.3;
    }
  }
  const prototypes: Record<string, [number, number, number]> = {
    apple: [1.0, -0.6, -0.4],
    orange: [0.8, 0.3, -1.0],
  };
  for (const [name, proto] of Object.entries(prototypes)) {
    const k = COCO_CLASSES.indexOf(name);
    for (let c = 0; c < 3; c++) {
      weights[c * COCO_CLASSES.length + k] = proto[c];
    }
  }
  return tf.tensor2d(weights, [3, COCO_CLASSES.length]);
}

function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

interface LoadedModel {
  model: tf.GraphModel | tf.LayersModel;
  classNames: readonly string[];
}

/** Load a tfjs model (graph or layers format) from a local directory. */
async function loadDirectoryModel(dir: string): Promise<LoadedModel> {
  const modelJsonPath = path.join(dir, "model.json");
  const modelJson = JSON.parse(fs.readFileSync(modelJsonPath, "utf-8"));
  const handler: tf.io.IOHandler = { load: async () => readArtifacts(dir, modelJson) };
  const model =
    modelJson.format === "graph-model"
      ? await tf.loadGraphModel(handler)
      : await tf.loadLayersModel(handler);

  let classNames: readonly string[] = COCO_CLASSES;
  const classesPath = path.join(dir, "classes.json");
  if (fs.existsSync(classesPath)) {
    classNames = JSON.parse(fs.readFileSync(classesPath, "utf-8"));
  }
  return { model, classNames };
}

function readArtifacts(dir: string, modelJson: any): tf.io.ModelArtifacts {
  const manifest = modelJson.weightsManifest ?? [];
  const weightSpecs: tf.io.WeightsManifestEntry[] = [];
  const buffers: Buffer[] = [];
  for (const group of manifest) {
    weightSpecs.push(...group.weights);
    for (const p of group.paths) {
      buffers.push(fs.readFileSync(path.join(dir, p)));
    }
  }
  const weightData = Buffer.concat(buffers);
  return {
    modelTopology: modelJson.modelTopology,
    format: modelJson.format,
    generatedBy: modelJson.generatedBy,
    convertedBy: modelJson.convertedBy,
    weightSpecs,
    weightData: weightData.buffer.slice(
      weightData.byteOffset,
      weightData.byteOffset + weightData.byteLength,
    ),
  };
}
