/**
 * Trainer CLI.
 *
 *   convert  --record <base> --out-dir <dir> [--channel 0] [--label-set NLRAV]
 *   train    --trace <file> --annotations <file> --out <weights.json>
 *            [--label-set NLRAV] [--c1 4 --c2 4 --fc1 100] [--epochs 12]
 *            [--seed 1] [--no-augment] [--centering annotated|detector]
 *   sweep    --trace <file> --annotations <file> [--grid 2_2_20,4_4_100,...]
 *            [--epochs 6] [--out sweep.csv]
 *   demo-data --out-dir <dir> [--seed 1] [--duration 120] [--label-set NLRAV]
 */

import * as fs from "fs";
import * as os from "os";
import * as path from "path";

import {
  AUGMENT_OFFSETS,
  Beat,
  buildBeats,
  frameBeats,
  splitBeats,
} from "./dataset";
import {
  DEFAULT_TRAIN_CONFIG,
  TrainConfig,
  accuracy,
  buildModel,
  extractWeights,
  modelName,
  trainModel,
} from "./model";
import { detectorOutcomes } from "./primary";
import { quantizeAndExport, writeModel } from "./quantize";
import { selectModel } from "./sweep";
import { synthLabeled } from "./synthdata";
import { LABEL_SETS, readAnnotations, readTrace, writeAnnotations, writeTrace } from "./traceio";
import { convertRecord } from "./convert";

function parseArgs(argv: string[]): { command: string; flags: Map<string, string> } {
  const command = argv[0];
  const flags = new Map<string, string>();
  for (let i = 1; i < argv.length; i++) {
    if (!argv[i].startsWith("--")) throw new Error(`unexpected argument ${argv[i]}`);
    const key = argv[i].slice(2);
    if (i + 1 < argv.length && !argv[i + 1].startsWith("--")) {
      flags.set(key, argv[++i]);
    } else {
      flags.set(key, "true");
    }
  }
  return { command, flags };
}

function need(flags: Map<string, string>, key: string): string {
  const v = flags.get(key);
  if (v === undefined) throw new Error(`missing --${key}`);
  return v;
}

function cmdConvert(flags: Map<string, string>): void {
  const result = convertRecord(need(flags, "record"), {
    channel: Number(flags.get("channel") ?? "0"),
    labelSet: (flags.get("label-set") ?? "NLRAV") as "NLRAV" | "NSVFQ",
    outDir: need(flags, "out-dir"),
  });
  console.log(
    `${result.tracePath}: ${result.sampleCount} samples, ` +
      `${result.keptBeats} beats (${result.droppedBeats} outside the label set)`
  );
}

interface LoadedDataset {
  cfg: TrainConfig;
  trainFrames: Float32Array[];
  trainLabels: number[];
  valFrames: Float32Array[];
  valLabels: number[];
  valBeats: Beat[];
  calibration: Float32Array[];
}

function loadDataset(flags: Map<string, string>, cfg: TrainConfig): LoadedDataset {
  const tracePath = need(flags, "trace");
  const trace = readTrace(tracePath);
  const classes = LABEL_SETS[cfg.labelSet];
  const annotations = readAnnotations(need(flags, "annotations"), classes);
  let beats = buildBeats(trace.recordId, annotations, classes);

  const centering = flags.get("centering") ?? "annotated";
  if (centering === "detector") {
    // centers become the node detector's detected indices for TP beats
    const workDir = fs.mkdtempSync(path.join(os.tmpdir(), "trainer_det_"));
    const outcomes = detectorOutcomes(tracePath, need(flags, "annotations"), workDir);
    const byAnnotation = new Map<number, number>();
    for (const o of outcomes) {
      if (o.outcome === "TP" && o.eventIndex !== null && o.annotationIndex !== null) {
        byAnnotation.set(o.annotationIndex, o.eventIndex);
      }
    }
    beats = beats
      .filter((b) => byAnnotation.has(b.center))
      .map((b) => ({ ...b, center: byAnnotation.get(b.center)! }));
  } else if (centering !== "annotated") {
    throw new Error(`unknown centering ${centering}`);
  }

  const split = splitBeats(beats, cfg.seed, cfg.trainFraction);
  const trainSet = frameBeats(
    trace, split.train, cfg.labelSet, classes, cfg.augment ? AUGMENT_OFFSETS : [0]
  );
  const valSet = frameBeats(trace, split.validation, cfg.labelSet, classes, [0]);
  return {
    cfg,
    trainFrames: trainSet.frames,
    trainLabels: trainSet.classIndices,
    valFrames: valSet.frames,
    valLabels: valSet.classIndices,
    valBeats: split.validation,
    calibration: trainSet.frames,
  };
}

function configFromFlags(flags: Map<string, string>): TrainConfig {
  const cfg: TrainConfig = { ...DEFAULT_TRAIN_CONFIG };
  cfg.labelSet = (flags.get("label-set") ?? cfg.labelSet) as "NLRAV" | "NSVFQ";
  cfg.c1 = Number(flags.get("c1") ?? cfg.c1);
  cfg.c2 = Number(flags.get("c2") ?? cfg.c2);
  cfg.fc1 = Number(flags.get("fc1") ?? cfg.fc1);
  cfg.epochs = Number(flags.get("epochs") ?? cfg.epochs);
  cfg.seed = Number(flags.get("seed") ?? cfg.seed);
  cfg.learningRate = Number(flags.get("lr") ?? cfg.learningRate);
  cfg.batchSize = Number(flags.get("batch") ?? cfg.batchSize);
  if (flags.get("no-augment") === "true") cfg.augment = false;
  return cfg;
}

function cmdTrain(flags: Map<string, string>): void {
  const cfg = configFromFlags(flags);
  const data = loadDataset(flags, cfg);
  const model = buildModel(cfg);
  const curve = trainModel(
    model, data.trainFrames, data.trainLabels, data.valFrames, data.valLabels, cfg,
    (line) => console.log(line)
  );
  const weights = extractWeights(model, cfg);
  const doc = quantizeAndExport(weights, data.calibration, modelName(cfg), cfg.labelSet);
  writeModel(doc, need(flags, "out"));
  const last = curve[curve.length - 1];
  console.log(
    `exported ${need(flags, "out")} ` +
      `(final val_acc=${isNaN(last.validationAccuracy) ? "-" : last.validationAccuracy.toFixed(4)})`
  );
}

function cmdSweep(flags: Map<string, string>): void {
  const grid = (flags.get("grid") ?? "2_2_20,4_4_100,8_8_50,20_20_100")
    .split(",")
    .map((s) => s.split("_").map(Number) as [number, number, number]);
  const results: { c1: number; c2: number; fc1: number; accuracy: number }[] = [];
  for (const [c1, c2, fc1] of grid) {
    const cfg = configFromFlags(flags);
    cfg.c1 = c1;
    cfg.c2 = c2;
    cfg.fc1 = fc1;
    const data = loadDataset(flags, cfg);
    const model = buildModel(cfg);
    trainModel(model, data.trainFrames, data.trainLabels, data.valFrames, data.valLabels, cfg);
    const acc = accuracy(model, data.valFrames, data.valLabels);
    results.push({ c1, c2, fc1, accuracy: acc });
    console.log(`${c1}_${c2}_${fc1}: val_acc=${acc.toFixed(4)}`);
  }
  const points = selectModel(results);
  const lines = ["name,accuracy,energy_uj,valid,selected"];
  for (const p of points) {
    lines.push(`${p.name},${p.accuracy},${p.energyUj},${p.valid},${p.selected}`);
  }
  const out = flags.get("out");
  if (out) fs.writeFileSync(out, lines.join("\n") + "\n");
  const winner = points.find((p) => p.selected);
  console.log(`selected: ${winner?.name}`);
}

function cmdDemoData(flags: Map<string, string>): void {
  const outDir = need(flags, "out-dir");
  const labelSet = flags.get("label-set") ?? "NLRAV";
  const { trace, annotations } = synthLabeled({
    bpm: Number(flags.get("bpm") ?? "75"),
    durationS: Number(flags.get("duration") ?? "120"),
    sampleRateHz: 330,
    noiseAmp: Number(flags.get("noise") ?? "20"),
    seed: Number(flags.get("seed") ?? "1"),
    classes: LABEL_SETS[labelSet],
  });
  fs.mkdirSync(outDir, { recursive: true });
  const tracePath = path.join(outDir, `${trace.recordId}.trace.csv`);
  const annPath = path.join(outDir, `${trace.recordId}.ann.csv`);
  writeTrace(trace, tracePath);
  writeAnnotations(annotations, annPath);
  console.log(`${tracePath}: ${trace.samples.length} samples, ${annotations.length} beats`);
}

export function main(argv: string[]): number {
  try {
    const { command, flags } = parseArgs(argv);
    switch (command) {
      case "convert":
        cmdConvert(flags);
        return 0;
      case "train":
        cmdTrain(flags);
        return 0;
      case "sweep":
        cmdSweep(flags);
        return 0;
      case "demo-data":
        cmdDemoData(flags);
        return 0;
      default:
        console.error(
          "usage: cli <convert|train|sweep|demo-data> [flags]  (see file header)"
        );
        return 1;
    }
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
