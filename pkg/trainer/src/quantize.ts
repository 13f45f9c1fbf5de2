/**
 * Post-training static quantization: a float64 reference forward pass
 * over the extracted weights records each layer's output range
 * (min/max observers), activation scale/zero-point pairs come from
 * those ranges, weights become symmetric int8, biases are zero by
 * construction, and the result is serialized in the weight-file schema
 * the inference node loads (docs/formats.md).
 */

import * as fs from "fs";

import { FRAME_LEN } from "./dataset";
import { ExtractedWeights, INPUT_SCALE } from "./model";

export interface QuantObservation {
  min: number;
  max: number;
}

export interface QuantParams {
  scale: number;
  zeroPoint: number;
}

function roundHalfAway(v: number): number {
  return v >= 0 ? Math.floor(v + 0.5) : -Math.floor(-v + 0.5);
}

export function minmaxQuantParams(obs: QuantObservation, scaleFloor = 1e-12): QuantParams {
  const lo = Math.min(obs.min, 0);
  const hi = Math.max(obs.max, 0);
  const scale = Math.max((hi - lo) / 255, scaleFloor);
  const zp = Math.max(-128, Math.min(127, roundHalfAway(-128 - lo / scale)));
  return { scale, zeroPoint: zp };
}

export function symmetricQuantize(weights: number[]): { q: number[]; scale: number } {
  let maxAbs = 0;
  for (const w of weights) maxAbs = Math.max(maxAbs, Math.abs(w));
  const scale = Math.max(maxAbs / 127, 1e-12);
  const q = weights.map((w) => Math.max(-127, Math.min(127, roundHalfAway(w / scale))));
  return { q, scale };
}

/** Float64 forward pass over raw-ADC frames using the extracted
 * weights (training's input scaling folded into the first conv). */
export class FloatReference {
  private readonly w: ExtractedWeights;
  readonly conv1: number[][][];

  constructor(w: ExtractedWeights) {
    this.w = w;
    // fold the training-time input scaling into conv1 so the reference
    // (and the exported model) consume raw ADC values
    this.conv1 = w.conv1.map((perIn) =>
      perIn.map((taps) => taps.map((t) => t * INPUT_SCALE))
    );
  }

  /** Returns logits and, optionally, records per-stage pre-relu ranges. */
  forward(frame: ArrayLike<number>, observers?: QuantObservation[]): number[] {
    const { kernel, pool } = this.w;
    let acts: number[][] = [Array.from(frame, Number)];

    acts = this.convolve(acts, this.conv1, kernel);
    this.observe(acts, observers, 0);
    acts = poolMax(relu(acts), pool);

    acts = this.convolve(acts, this.w.conv2, kernel);
    this.observe(acts, observers, 1);
    acts = poolMax(relu(acts), pool);

    const flat: number[] = [];
    for (const row of acts) flat.push(...row); // channel-major
    let vec = matVec(this.w.fc1, flat);
    this.observe([vec], observers, 2);
    vec = vec.map((v) => Math.max(v, 0));
    const logits = matVec(this.w.fc2, vec);
    this.observe([logits], observers, 3);
    return logits;
  }

  predict(frame: ArrayLike<number>): number {
    return argmax(this.forward(frame));
  }

  private convolve(acts: number[][], weights: number[][][], kernel: number): number[][] {
    const outLen = acts[0].length - kernel + 1;
    return weights.map((perIn) => {
      const row = new Array<number>(outLen).fill(0);
      for (let j = 0; j < outLen; j++) {
        let acc = 0;
        for (let c = 0; c < perIn.length; c++) {
          const taps = perIn[c];
          const src = acts[c];
          for (let t = 0; t < kernel; t++) acc += src[j + t] * taps[t];
        }
        row[j] = acc;
      }
      return row;
    });
  }

  private observe(acts: number[][], observers: QuantObservation[] | undefined, idx: number) {
    if (!observers) return;
    const obs = observers[idx];
    for (const row of acts) {
      for (const v of row) {
        if (v < obs.min) obs.min = v;
        if (v > obs.max) obs.max = v;
      }
    }
  }
}

function relu(acts: number[][]): number[][] {
  return acts.map((row) => row.map((v) => (v > 0 ? v : 0)));
}

function poolMax(acts: number[][], pool: number): number[][] {
  const outLen = Math.floor((acts[0].length - pool) / pool) + 1;
  return acts.map((row) => {
    const out = new Array<number>(outLen);
    for (let j = 0; j < outLen; j++) {
      let m = row[j * pool];
      for (let t = 1; t < pool; t++) m = Math.max(m, row[j * pool + t]);
      out[j] = m;
    }
    return out;
  });
}

function matVec(weights: number[][], vec: number[]): number[] {
  return weights.map((row) => {
    let acc = 0;
    for (let i = 0; i < row.length; i++) acc += row[i] * vec[i];
    return acc;
  });
}

export function argmax(values: number[]): number {
  let best = 0;
  for (let i = 1; i < values.length; i++) if (values[i] > values[best]) best = i;
  return best;
}

export interface ExportedModel {
  name: string;
  label_set: string;
  input_len: number;
  input_scale: number;
  input_zero_point: number;
  layers: object[];
}

/**
 * Run min/max observation over the calibration frames, quantize, and
 * build the weight-file document.
 */
export function quantizeAndExport(
  weights: ExtractedWeights,
  calibrationFrames: Float32Array[],
  name: string,
  labelSet: string
): ExportedModel {
  if (calibrationFrames.length === 0) throw new Error("calibration set is empty");
  const reference = new FloatReference(weights);
  const observers: QuantObservation[] = Array.from({ length: 4 }, () => ({
    min: Infinity,
    max: -Infinity,
  }));
  let inMin = Infinity;
  let inMax = -Infinity;
  for (const frame of calibrationFrames) {
    for (const v of frame) {
      if (v < inMin) inMin = v;
      if (v > inMax) inMax = v;
    }
    reference.forward(frame, observers);
  }

  const inputQp = minmaxQuantParams({ min: inMin, max: inMax });

  const q1 = quantizeConv(reference.conv1);
  const q2 = quantizeConv(weights.conv2);
  const q3 = quantizeFc(weights.fc1);
  const q4 = quantizeFc(weights.fc2);

  // floor every activation scale so in_scale*w_scale/out_scale stays
  // inside the loader's fixed-point range
  const qp: QuantParams[] = [];
  let prevScale = inputQp.scale;
  for (let i = 0; i < 4; i++) {
    const wScale = [q1, q2, q3, q4][i].scale;
    const p = minmaxQuantParams(observers[i], (prevScale * wScale) / 2 ** 29);
    qp.push(p);
    prevScale = p.scale;
  }

  return {
    name,
    label_set: labelSet,
    input_len: FRAME_LEN,
    input_scale: inputQp.scale,
    input_zero_point: inputQp.zeroPoint,
    layers: [
      {
        kind: "conv1d",
        in_channels: 1,
        out_channels: weights.c1,
        kernel: weights.kernel,
        stride: 1,
        weights: q1.q,
        weight_scale: q1.scale,
        output_scale: qp[0].scale,
        output_zero_point: qp[0].zeroPoint,
      },
      { kind: "relu" },
      { kind: "maxpool1d", kernel: weights.pool, stride: weights.pool },
      {
        kind: "conv1d",
        in_channels: weights.c1,
        out_channels: weights.c2,
        kernel: weights.kernel,
        stride: 1,
        weights: q2.q,
        weight_scale: q2.scale,
        output_scale: qp[1].scale,
        output_zero_point: qp[1].zeroPoint,
      },
      { kind: "relu" },
      { kind: "maxpool1d", kernel: weights.pool, stride: weights.pool },
      {
        kind: "fully_connected",
        in_features: weights.c2 * weights.pooledLen,
        out_features: weights.fc1Units,
        weights: q3.q,
        weight_scale: q3.scale,
        output_scale: qp[2].scale,
        output_zero_point: qp[2].zeroPoint,
      },
      { kind: "relu" },
      {
        kind: "fully_connected",
        in_features: weights.fc1Units,
        out_features: 5,
        weights: q4.q,
        weight_scale: q4.scale,
        output_scale: qp[3].scale,
        output_zero_point: qp[3].zeroPoint,
      },
    ],
  };
}

function quantizeConv(conv: number[][][]): { q: number[][][]; scale: number } {
  const flat: number[] = [];
  for (const perIn of conv) for (const taps of perIn) flat.push(...taps);
  const { q, scale } = symmetricQuantize(flat);
  let pos = 0;
  const out = conv.map((perIn) => perIn.map((taps) => taps.map(() => q[pos++])));
  return { q: out, scale };
}

function quantizeFc(fc: number[][]): { q: number[][]; scale: number } {
  const flat: number[] = [];
  for (const row of fc) flat.push(...row);
  const { q, scale } = symmetricQuantize(flat);
  let pos = 0;
  const out = fc.map((row) => row.map(() => q[pos++]));
  return { q: out, scale };
}

export function writeModel(doc: ExportedModel, path: string): void {
  fs.writeFileSync(path, JSON.stringify(doc, null, 1), "utf-8");
}
