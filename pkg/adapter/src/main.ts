import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { DEFAULT_OPTIONS, Detector } from "./detector";
import { serve } from "./serve";

async function main(): Promise<number> {
  const argv = await yargs(hideBin(process.argv))
    .scriptName("fruitgrid-adapter")
    .usage("$0 [options]  (speaks the detection protocol on stdin/stdout)")
    .option("model", {
      type: "string",
      default: DEFAULT_OPTIONS.model,
      describe: '"builtin" or a tfjs model directory (model.json + shards)',
    })
    .option("threshold", {
      type: "number",
      default: DEFAULT_OPTIONS.threshold,
      describe: "minimum confidence to emit [0, 1]",
    })
    .option("backend", {
      type: "string",
      default: DEFAULT_OPTIONS.backend,
      describe: "tfjs backend",
    })
    .option("input-size", {
      type: "number",
      default: DEFAULT_OPTIONS.inputSize,
      describe: "square inference size for directory models",
    })
    .option("classes", {
      type: "string",
      describe: "comma-separated passthrough list; omit to emit all classes",
    })
    .strict()
    .parse();

  if (!(argv.threshold >= 0 && argv.threshold <= 1)) {
    process.stderr.write("threshold must be in [0, 1]\n");
    return 2;
  }
  const detector = await Detector.create({
    model: argv.model,
    threshold: argv.threshold,
    backend: argv.backend,
    inputSize: argv["input-size"],
    passthrough:
      argv.classes === undefined
        ? null
        : argv.classes.split(",").map((s) => s.trim()).filter((s) => s.length > 0),
  });
  return serve(detector);
}

main().then(
  (code) => {
    process.exitCode = code;
  },
  (err) => {
    process.stderr.write(`fatal: ${err instanceof Error ? err.message : String(err)}\n`);
    process.exitCode = 1;
  },
);
