/**
 * Synthetic labeled ECG-like data for pipeline tests and demos: five
 * distinguishable beat morphologies at a fixed rate over a flat
 * baseline, with seeded noise.  Not physiological; just separable.
 */

import { seededRandom } from "./dataset";
import { Annotation, Trace } from "./traceio";

interface Shape {
  sigma: number;
  amplitude: number;
  lobeOffset: number; // secondary lobe position relative to the apex
  lobeAmplitude: number;
}

const SHAPES: Shape[] = [
  { sigma: 5, amplitude: 1200, lobeOffset: 0, lobeAmplitude: 0 }, // N
  { sigma: 9, amplitude: 950, lobeOffset: 25, lobeAmplitude: -500 }, // L-like
  { sigma: 3.5, amplitude: 1500, lobeOffset: -22, lobeAmplitude: -450 }, // R-like
  { sigma: 5, amplitude: 800, lobeOffset: 35, lobeAmplitude: 420 }, // A-like
  { sigma: 13, amplitude: 1000, lobeOffset: 18, lobeAmplitude: -800 }, // V-like
];

export interface SynthOptions {
  bpm: number;
  durationS: number;
  sampleRateHz: number;
  noiseAmp: number;
  seed: number;
  classes: string[];
  /** class index per beat; cycles through all five by default */
  pattern?: number[];
}

export function synthLabeled(opts: SynthOptions): { trace: Trace; annotations: Annotation[] } {
  const n = Math.round(opts.durationS * opts.sampleRateHz);
  const period = Math.round((opts.sampleRateHz * 60) / opts.bpm);
  const rand = seededRandom(opts.seed);
  const signal = new Float64Array(n);
  const annotations: Annotation[] = [];

  let beat = 0;
  for (let center = Math.floor(period / 2); center < n; center += period, beat++) {
    const classIndex = opts.pattern
      ? opts.pattern[beat % opts.pattern.length]
      : beat % SHAPES.length;
    const shape = SHAPES[classIndex];
    addGaussian(signal, center, shape.sigma, shape.amplitude);
    if (shape.lobeAmplitude !== 0) {
      addGaussian(signal, center + shape.lobeOffset, shape.sigma * 1.4, shape.lobeAmplitude);
    }
    annotations.push({ peakIndex: center, label: opts.classes[classIndex] });
  }

  const samples = new Int32Array(n);
  for (let i = 0; i < n; i++) {
    const noise = opts.noiseAmp > 0 ? gauss(rand) * opts.noiseAmp : 0;
    samples[i] = Math.max(-32767, Math.min(32767, Math.round(signal[i] + noise)));
  }
  return {
    trace: {
      sampleRateHz: opts.sampleRateHz,
      recordId: `labeled_${opts.seed}`,
      samples,
    },
    annotations,
  };
}

function addGaussian(signal: Float64Array, center: number, sigma: number, amplitude: number) {
  const halfWidth = Math.ceil(4 * sigma);
  for (let i = -halfWidth; i <= halfWidth; i++) {
    const idx = center + i;
    if (idx >= 0 && idx < signal.length) {
      signal[idx] += amplitude * Math.exp(-0.5 * (i / sigma) ** 2);
    }
  }
}

function gauss(rand: () => number): number {
  // Box-Muller on the seeded uniform stream
  const u = Math.max(rand(), 1e-12);
  const v = rand();
  return Math.sqrt(-2 * Math.log(u)) * Math.cos(2 * Math.PI * v);
}
