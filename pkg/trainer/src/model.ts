/**
 * The two-conv / two-fc beat classifier, built without biases so the
 * exported integer model needs none, and trained deterministically
 * (seeded initializers, seeded shuffling, no tfjs-side randomness).
 */

import * as tf from "@tensorflow/tfjs";

import { FRAME_LEN, seededRandom } from "./dataset";

export interface TrainConfig {
  labelSet: "NLRAV" | "NSVFQ";
  c1: number;
  c2: number;
  fc1: number;
  kernel: number;
  pool: number;
  seed: number;
  epochs: number;
  learningRate: number;
  batchSize: number;
  augment: boolean;
  trainFraction: number;
}

export const DEFAULT_TRAIN_CONFIG: TrainConfig = {
  labelSet: "NLRAV",
  c1: 4,
  c2: 4,
  fc1: 100,
  kernel: 7,
  pool: 2,
  seed: 1,
  epochs: 12,
  learningRate: 1e-3,
  batchSize: 32,
  augment: true,
  trainFraction: 0.7,
};

/** Inputs are scaled by this factor during training for stability; the
 * exporter folds it back into the first conv layer's weights. */
export const INPUT_SCALE = 1 / 2048;

export function modelName(cfg: TrainConfig): string {
  return `${cfg.labelSet}_${cfg.c1}_${cfg.c2}_${cfg.fc1}`;
}

export function buildModel(cfg: TrainConfig): tf.Sequential {
  const model = tf.sequential();
  model.add(
    tf.layers.conv1d({
      inputShape: [FRAME_LEN, 1],
      filters: cfg.c1,
      kernelSize: cfg.kernel,
      useBias: false,
      kernelInitializer: tf.initializers.glorotUniform({ seed: cfg.seed }),
    })
  );
  model.add(tf.layers.reLU());
  model.add(tf.layers.maxPooling1d({ poolSize: cfg.pool, strides: cfg.pool }));
  model.add(
    tf.layers.conv1d({
      filters: cfg.c2,
      kernelSize: cfg.kernel,
      useBias: false,
      kernelInitializer: tf.initializers.glorotUniform({ seed: cfg.seed + 1 }),
    })
  );
  model.add(tf.layers.reLU());
  model.add(tf.layers.maxPooling1d({ poolSize: cfg.pool, strides: cfg.pool }));
  model.add(tf.layers.flatten());
  model.add(
    tf.layers.dense({
      units: cfg.fc1,
      useBias: false,
      kernelInitializer: tf.initializers.glorotUniform({ seed: cfg.seed + 2 }),
    })
  );
  model.add(tf.layers.reLU());
  model.add(
    tf.layers.dense({
      units: 5,
      useBias: false,
      kernelInitializer: tf.initializers.glorotUniform({ seed: cfg.seed + 3 }),
    })
  );
  return model;
}

function toTensor(frames: Float32Array[]): tf.Tensor3D {
  const n = frames.length;
  const flat = new Float32Array(n * FRAME_LEN);
  for (let i = 0; i < n; i++) {
    for (let j = 0; j < FRAME_LEN; j++) flat[i * FRAME_LEN + j] = frames[i][j] * INPUT_SCALE;
  }
  return tf.tensor3d(flat, [n, FRAME_LEN, 1]);
}

export interface EpochStats {
  epoch: number;
  loss: number;
  trainAccuracy: number;
  validationAccuracy: number;
}

export function predictClasses(model: tf.LayersModel, frames: Float32Array[]): number[] {
  if (frames.length === 0) return [];
  return tf.tidy(() => {
    const logits = model.predict(toTensor(frames)) as tf.Tensor2D;
    return Array.from(logits.argMax(1).dataSync());
  });
}

export function accuracy(model: tf.LayersModel, frames: Float32Array[], labels: number[]): number {
  if (frames.length === 0) return NaN;
  const preds = predictClasses(model, frames);
  let hit = 0;
  for (let i = 0; i < preds.length; i++) if (preds[i] === labels[i]) hit++;
  return hit / preds.length;
}

/** Deterministic mini-batch training loop; returns the accuracy curve. */
export function trainModel(
  model: tf.LayersModel,
  trainFrames: Float32Array[],
  trainLabels: number[],
  valFrames: Float32Array[],
  valLabels: number[],
  cfg: TrainConfig,
  log: (line: string) => void = () => undefined
): EpochStats[] {
  const optimizer = tf.train.adam(cfg.learningRate);
  const rand = seededRandom(cfg.seed * 7919 + 17);
  const curve: EpochStats[] = [];
  const n = trainFrames.length;

  for (let epoch = 0; epoch < cfg.epochs; epoch++) {
    const order = Array.from({ length: n }, (_, i) => i);
    for (let i = n - 1; i > 0; i--) {
      const j = Math.floor(rand() * (i + 1));
      [order[i], order[j]] = [order[j], order[i]];
    }
    let lossSum = 0;
    let batches = 0;
    for (let start = 0; start < n; start += cfg.batchSize) {
      const idx = order.slice(start, start + cfg.batchSize);
      const xs = toTensor(idx.map((i) => trainFrames[i]));
      const ys = tf.oneHot(
        tf.tensor1d(idx.map((i) => trainLabels[i]), "int32"),
        5
      );
      const loss = optimizer.minimize(
        () =>
          tf.losses.softmaxCrossEntropy(
            ys,
            model.apply(xs, { training: true }) as tf.Tensor2D
          ) as tf.Scalar,
        true
      ) as tf.Scalar;
      lossSum += loss.dataSync()[0];
      batches++;
      tf.dispose([xs, ys, loss]);
    }
    const stats: EpochStats = {
      epoch,
      loss: lossSum / Math.max(batches, 1),
      trainAccuracy: accuracy(model, trainFrames, trainLabels),
      validationAccuracy: accuracy(model, valFrames, valLabels),
    };
    curve.push(stats);
    log(
      `epoch ${epoch}: loss=${stats.loss.toFixed(4)} ` +
        `train_acc=${stats.trainAccuracy.toFixed(4)} ` +
        `val_acc=${isNaN(stats.validationAccuracy) ? "-" : stats.validationAccuracy.toFixed(4)}`
    );
  }
  optimizer.dispose();
  return curve;
}

export interface ExtractedWeights {
  /** conv kernels as [out][in][k]; fc kernels as [out][in] channel-major. */
  conv1: number[][][];
  conv2: number[][][];
  fc1: number[][];
  fc2: number[][];
  c1: number;
  c2: number;
  fc1Units: number;
  kernel: number;
  pool: number;
  pooledLen: number;
}

/** Pull weights out of tfjs layout into the wire layout (channel-major). */
export function extractWeights(model: tf.LayersModel, cfg: TrainConfig): ExtractedWeights {
  const tensors = model.getWeights();
  if (tensors.length !== 4) throw new Error(`expected 4 weight tensors, got ${tensors.length}`);
  const [k1, k2, d1, d2] = tensors;

  // tfjs conv1d kernels are [kernel, in, out]
  const conv1 = transposeConv(k1.arraySync() as number[][][]);
  const conv2 = transposeConv(k2.arraySync() as number[][][]);

  const l1 = FRAME_LEN - cfg.kernel + 1;
  const p1 = Math.floor((l1 - cfg.pool) / cfg.pool) + 1;
  const l2 = p1 - cfg.kernel + 1;
  const p2 = Math.floor((l2 - cfg.pool) / cfg.pool) + 1;

  // tfjs dense kernel is [inFeatures, units] with inFeatures ordered
  // position-major ((pos, channel) pairs); rewire to channel-major.
  const d1arr = d1.arraySync() as number[][];
  const fc1: number[][] = [];
  for (let o = 0; o < cfg.fc1; o++) {
    const row = new Array<number>(cfg.c2 * p2);
    for (let ch = 0; ch < cfg.c2; ch++) {
      for (let pos = 0; pos < p2; pos++) {
        row[ch * p2 + pos] = d1arr[pos * cfg.c2 + ch][o];
      }
    }
    fc1.push(row);
  }
  const d2arr = d2.arraySync() as number[][];
  const fc2: number[][] = [];
  for (let o = 0; o < 5; o++) fc2.push(d2arr.map((r) => r[o]));

  return {
    conv1,
    conv2,
    fc1,
    fc2,
    c1: cfg.c1,
    c2: cfg.c2,
    fc1Units: cfg.fc1,
    kernel: cfg.kernel,
    pool: cfg.pool,
    pooledLen: p2,
  };
}

function transposeConv(kernelInOut: number[][][]): number[][][] {
  const k = kernelInOut.length;
  const cin = kernelInOut[0].length;
  const cout = kernelInOut[0][0].length;
  const out: number[][][] = [];
  for (let o = 0; o < cout; o++) {
    const perIn: number[][] = [];
    for (let i = 0; i < cin; i++) {
      const taps: number[] = [];
      for (let t = 0; t < k; t++) taps.push(kernelInOut[t][i][o]);
      perIn.push(taps);
    }
    out.push(perIn);
  }
  return out;
}
