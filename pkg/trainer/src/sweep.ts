/**
 * Topology exploration: train a grid of (c1, c2, fc1) variants, then
 * keep the cheapest model whose accuracy stays within half a percent
 * of the best.  Inference energy uses the measured constants for the
 * two characterized topologies and a MAC-proportional estimate for the
 * rest.
 */

import { FRAME_LEN } from "./dataset";

export interface SweepPoint {
  c1: number;
  c2: number;
  fc1: number;
  name: string;
  accuracy: number;
  energyUj: number;
  valid: boolean;
  selected: boolean;
}

const MEASURED_ENERGY_UJ: Record<string, number> = {
  "4_4_100": 148.78,
  "20_20_100": 660.37,
};

export function macs(c1: number, c2: number, fc1: number, kernel = 7, pool = 2): number {
  const l1 = FRAME_LEN - kernel + 1;
  const p1 = Math.floor((l1 - pool) / pool) + 1;
  const l2 = p1 - kernel + 1;
  const p2 = Math.floor((l2 - pool) / pool) + 1;
  return l1 * c1 * kernel + l2 * c2 * c1 * kernel + fc1 * c2 * p2 + 5 * fc1;
}

export function inferenceEnergyUj(c1: number, c2: number, fc1: number): number {
  const key = `${c1}_${c2}_${fc1}`;
  if (key in MEASURED_ENERGY_UJ) return MEASURED_ENERGY_UJ[key];
  const reference = MEASURED_ENERGY_UJ["4_4_100"];
  return (reference * macs(c1, c2, fc1)) / macs(4, 4, 100);
}

export const MAX_ACCURACY_DROP = 0.005;

/**
 * Apply the selection rule to (topology, accuracy) results: models
 * within MAX_ACCURACY_DROP of the most accurate one are valid; the
 * valid model with the lowest inference energy wins.
 */
export function selectModel(
  results: { c1: number; c2: number; fc1: number; accuracy: number }[]
): SweepPoint[] {
  if (results.length === 0) return [];
  const best = Math.max(...results.map((r) => r.accuracy));
  const points: SweepPoint[] = results.map((r) => ({
    ...r,
    name: `${r.c1}_${r.c2}_${r.fc1}`,
    energyUj: inferenceEnergyUj(r.c1, r.c2, r.fc1),
    valid: r.accuracy >= best - MAX_ACCURACY_DROP,
    selected: false,
  }));
  const winner = points
    .filter((p) => p.valid)
    .reduce((a, b) => (b.energyUj < a.energyUj ? b : a));
  winner.selected = true;
  return points;
}
