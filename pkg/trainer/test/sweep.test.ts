import { describe, expect, it } from "vitest";

import { inferenceEnergyUj, macs, selectModel } from "../src/sweep";

describe("inference energy", () => {
  it("uses the measured constants for the characterized topologies", () => {
    expect(inferenceEnergyUj(4, 4, 100)).toBe(148.78);
    expect(inferenceEnergyUj(20, 20, 100)).toBe(660.37);
  });

  it("scales other topologies by their multiply count", () => {
    const small = inferenceEnergyUj(2, 2, 20);
    expect(small).toBeLessThan(148.78);
    expect(small).toBeCloseTo((148.78 * macs(2, 2, 20)) / macs(4, 4, 100), 6);
  });

  it("macs grow with every size knob", () => {
    const base = macs(4, 4, 100);
    expect(macs(8, 4, 100)).toBeGreaterThan(base);
    expect(macs(4, 8, 100)).toBeGreaterThan(base);
    expect(macs(4, 4, 200)).toBeGreaterThan(base);
  });
});

describe("selection rule", () => {
  it("keeps the cheapest model within half a percent of the best", () => {
    const points = selectModel([
      { c1: 20, c2: 20, fc1: 100, accuracy: 0.9922 },
      { c1: 4, c2: 4, fc1: 100, accuracy: 0.9908 }, // within 0.5% of best
      { c1: 2, c2: 2, fc1: 20, accuracy: 0.9700 }, // cheap but too inaccurate
    ]);
    expect(points.find((p) => p.name === "2_2_20")!.valid).toBe(false);
    expect(points.find((p) => p.name === "4_4_100")!.valid).toBe(true);
    const selected = points.filter((p) => p.selected);
    expect(selected.length).toBe(1);
    expect(selected[0].name).toBe("4_4_100"); // cheaper than 20_20_100, still valid
  });

  it("falls back to the most accurate model when nothing else is valid", () => {
    const points = selectModel([
      { c1: 20, c2: 20, fc1: 100, accuracy: 0.99 },
      { c1: 2, c2: 2, fc1: 20, accuracy: 0.90 },
    ]);
    expect(points.find((p) => p.selected)!.name).toBe("20_20_100");
  });

  it("handles the boundary of the allowed drop", () => {
    const points = selectModel([
      { c1: 8, c2: 8, fc1: 50, accuracy: 0.9 },
      { c1: 2, c2: 2, fc1: 20, accuracy: 0.895 }, // exactly 0.5% below
    ]);
    expect(points.find((p) => p.name === "2_2_20")!.valid).toBe(true);
    expect(points.find((p) => p.selected)!.name).toBe("2_2_20");
  });
});
