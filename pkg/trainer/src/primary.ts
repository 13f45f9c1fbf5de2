/**
 * Bridge to the inference node's CLI.  The trainer talks to it only
 * through its public surfaces: canonical trace/annotation files, the
 * weight-file schema, and the `score`/`classify` subcommands.
 */

import { execFileSync } from "child_process";
import * as fs from "fs";
import * as path from "path";

const PYTHON = process.env.ECGNODE_PYTHON ?? "python3";

export function runPrimary(args: string[], cwd?: string): string {
  return execFileSync(PYTHON, ["-m", "ecgnode", ...args], {
    cwd,
    encoding: "utf-8",
    stdio: ["ignore", "pipe", "pipe"],
  });
}

export interface DetectorOutcome {
  eventIndex: number | null;
  annotationIndex: number | null;
  label: string;
  outcome: "TP" | "FP" | "FN";
}

/** Run the node's detector via `score` and parse per-beat outcomes. */
export function detectorOutcomes(
  tracePath: string,
  annotationPath: string,
  workDir: string
): DetectorOutcome[] {
  const outDir = path.join(workDir, "score_out");
  runPrimary([
    "score",
    "--trace", tracePath,
    "--annotations", annotationPath,
    "--out-dir", outDir,
  ]);
  const record = path.basename(tracePath).replace(/\.[^.]+$/, "");
  const csv = fs.readFileSync(path.join(outDir, `outcomes_${record}.csv`), "utf-8");
  const rows = csv.trim().split(/\r?\n/).slice(1);
  return rows.map((row) => {
    const [ev, ann, label, outcome] = row.split(",");
    return {
      eventIndex: ev === "" ? null : Number(ev),
      annotationIndex: ann === "" ? null : Number(ann),
      label,
      outcome: outcome as DetectorOutcome["outcome"],
    };
  });
}

/** Classify frames at given centers with an exported weight file. */
export function classifyWithPrimary(
  tracePath: string,
  centers: number[],
  weightsPath: string,
  workDir: string
): number[] {
  const centersPath = path.join(workDir, "centers.csv");
  fs.writeFileSync(centersPath, centers.map((c) => String(c)).join("\n") + "\n");
  const outPath = path.join(workDir, "preds.csv");
  runPrimary([
    "classify",
    "--trace", tracePath,
    "--centers", centersPath,
    "--weights", weightsPath,
    "--out", outPath,
  ]);
  const rows = fs.readFileSync(outPath, "utf-8").trim().split(/\r?\n/).slice(1);
  return rows.map((row) => Number(row.split(",")[1]));
}
