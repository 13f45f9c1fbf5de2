/**
 * Beat-frame dataset construction: label mapping, 198-sample frame
 * extraction (annotated or detector-dictated centering), the 70/30
 * train/validation split, and shifted-copy augmentation.
 *
 * Splitting happens at the peak level before augmentation, so shifted
 * copies of a validation beat can never leak into training.
 */

import { Annotation, Trace } from "./traceio";

export const FRAME_LEN = 198;
const HALF = 99;

/** 33 offsets, 3 apart, symmetric around 0 (the original + 32 copies). */
export const AUGMENT_OFFSETS: number[] = [];
for (let k = -48; k <= 48; k += 3) AUGMENT_OFFSETS.push(k);

/** Map a raw annotation symbol into the target label set (null = drop). */
export function mapSymbol(symbol: string, labelSet: string): string | null {
  if (labelSet === "NLRAV") {
    return ["N", "L", "R", "A", "V"].includes(symbol) ? symbol : null;
  }
  if (labelSet === "NSVFQ") {
    if (["N", ".", "L", "R", "e", "j"].includes(symbol)) return "N";
    if (["A", "a", "J", "S"].includes(symbol)) return "S";
    if (["V", "E"].includes(symbol)) return "V";
    if (symbol === "F") return "F";
    if (["Q", "/", "f"].includes(symbol)) return "Q";
    return null;
  }
  throw new Error(`unknown label set ${labelSet}`);
}

export function extractFrame(samples: Int32Array, center: number): Float32Array {
  const frame = new Float32Array(FRAME_LEN);
  for (let i = 0; i < FRAME_LEN; i++) {
    const src = center - HALF + i;
    frame[i] = src >= 0 && src < samples.length ? samples[src] : 0;
  }
  return frame;
}

export interface Beat {
  recordId: string;
  center: number;
  label: string;
  classIndex: number;
}

export interface FramedDataset {
  labelSet: string;
  classes: string[];
  frames: Float32Array[];
  classIndices: number[];
  beats: Beat[]; // one per frame (augmented copies repeat their beat)
}

export function buildBeats(
  recordId: string,
  annotations: Annotation[],
  classes: string[]
): Beat[] {
  const beats: Beat[] = [];
  for (const ann of annotations) {
    const classIndex = classes.indexOf(ann.label);
    if (classIndex < 0) continue;
    beats.push({ recordId, center: ann.peakIndex, label: ann.label, classIndex });
  }
  return beats;
}

export function frameBeats(
  trace: Trace,
  beats: Beat[],
  labelSet: string,
  classes: string[],
  offsets: number[] = [0]
): FramedDataset {
  const frames: Float32Array[] = [];
  const classIndices: number[] = [];
  const perFrameBeat: Beat[] = [];
  for (const beat of beats) {
    for (const off of offsets) {
      frames.push(extractFrame(trace.samples, beat.center + off));
      classIndices.push(beat.classIndex);
      perFrameBeat.push(beat);
    }
  }
  return { labelSet, classes, frames, classIndices, beats: perFrameBeat };
}

/** Deterministic seeded shuffle (mulberry32). */
export function seededRandom(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function shuffled<T>(items: T[], rand: () => number): T[] {
  const out = items.slice();
  for (let i = out.length - 1; i > 0; i--) {
    const j = Math.floor(rand() * (i + 1));
    [out[i], out[j]] = [out[j], out[i]];
  }
  return out;
}

export interface Split<T> {
  train: T[];
  validation: T[];
}

/** Random 70/30 split at the beat level; deterministic per seed. */
export function splitBeats(beats: Beat[], seed: number, trainFraction = 0.7): Split<Beat> {
  const order = shuffled(beats, seededRandom(seed));
  const nTrain = Math.round(order.length * trainFraction);
  return { train: order.slice(0, nTrain), validation: order.slice(nTrain) };
}
