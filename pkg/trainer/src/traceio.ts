/**
 * Canonical trace/annotation text formats shared with the inference node
 * (see ../docs/formats.md in the repository root).
 */

import * as fs from "fs";

export interface Trace {
  sampleRateHz: number;
  recordId: string;
  samples: Int32Array;
}

export interface Annotation {
  peakIndex: number;
  label: string;
}

export const LABEL_SETS: Record<string, string[]> = {
  NLRAV: ["N", "L", "R", "A", "V"],
  NSVFQ: ["N", "S", "V", "F", "Q"],
};

export function writeTrace(trace: Trace, path: string): void {
  const lines: string[] = [
    `sample_rate_hz=${formatRate(trace.sampleRateHz)}`,
    `record_id=${trace.recordId}`,
  ];
  for (const v of trace.samples) lines.push(String(v));
  fs.writeFileSync(path, lines.join("\n") + "\n", "utf-8");
}

function formatRate(rate: number): string {
  return Number.isInteger(rate) ? String(rate) : String(rate);
}

export function readTrace(path: string): Trace {
  const lines = fs.readFileSync(path, "utf-8").split("\n");
  if (!lines[0]?.startsWith("sample_rate_hz=")) {
    throw new Error(`${path}:1: missing sample_rate_hz header`);
  }
  const sampleRateHz = Number(lines[0].slice("sample_rate_hz=".length));
  if (!(sampleRateHz > 0)) throw new Error(`${path}:1: bad sample rate`);
  if (!lines[1]?.startsWith("record_id=")) {
    throw new Error(`${path}:2: missing record_id header`);
  }
  const recordId = lines[1].slice("record_id=".length);
  const samples: number[] = [];
  for (let i = 2; i < lines.length; i++) {
    const text = lines[i].trim();
    if (text === "") continue;
    const v = Number(text);
    if (!Number.isInteger(v)) throw new Error(`${path}:${i + 1}: non-integer sample`);
    if (Math.abs(v) >= 32768) throw new Error(`${path}:${i + 1}: out of 16-bit range`);
    samples.push(v);
  }
  return { sampleRateHz, recordId, samples: Int32Array.from(samples) };
}

export function writeAnnotations(annotations: Annotation[], path: string): void {
  const body = annotations.map((a) => `${a.peakIndex},${a.label}`).join("\n");
  fs.writeFileSync(path, body + (annotations.length ? "\n" : ""), "utf-8");
}

export function readAnnotations(path: string, labelSet: string[]): Annotation[] {
  const out: Annotation[] = [];
  const lines = fs.readFileSync(path, "utf-8").split("\n");
  for (let i = 0; i < lines.length; i++) {
    const text = lines[i].trim();
    if (text === "") continue;
    const [idxRaw, label] = text.split(",");
    const peakIndex = Number(idxRaw);
    if (!Number.isInteger(peakIndex) || peakIndex < 0) {
      throw new Error(`${path}:${i + 1}: bad index`);
    }
    if (!labelSet.includes(label)) {
      throw new Error(`${path}:${i + 1}: unknown label ${label}`);
    }
    out.push({ peakIndex, label });
  }
  out.sort((a, b) => a.peakIndex - b.peakIndex);
  return out;
}
