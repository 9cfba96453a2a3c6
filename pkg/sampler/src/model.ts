/**
 * Small convolutional digit classifier with noise-augmentation training.
 *
 * Architecture: 28x28 input -> 5x5/2 conv, 8 maps -> ReLU -> 3x3/2 conv,
 * 16 maps -> ReLU -> linear 400 -> 10. Forward and backward passes are
 * written directly against flat Float64Arrays; at this scale (16k
 * parameters, ~60k multiply-adds per image) that is faster to run and to
 * audit than hauling in a tensor framework, and every draw stays on the
 * package's deterministic generator.
 */

import { createHash } from "node:crypto";
import { readFileSync, writeFileSync } from "node:fs";
import { Rng } from "./rng.js";
import { addGaussian } from "./noise.js";
import { loadSubset, PIXELS, CLASSES, type Subset } from "./mnist.js";
import type { SamplerConfig } from "./config.js";

const IN = 28;
const C1F = 8, C1K = 5, C1S = 2, O1 = 12;   // (28 - 5)/2 + 1
const C2F = 16, C2K = 3, C2S = 2, O2 = 5;   // (12 - 3)/2 + 1
const FC_IN = C2F * O2 * O2;                // 400

export const MODEL_FORMAT = "model-sampler/convnet-v1";

export interface Scratch {
  z1: Float64Array;
  a1: Float64Array;
  z2: Float64Array;
  a2: Float64Array;
  logits: Float64Array;
}

export function makeScratch(): Scratch {
  return {
    z1: new Float64Array(C1F * O1 * O1),
    a1: new Float64Array(C1F * O1 * O1),
    z2: new Float64Array(C2F * O2 * O2),
    a2: new Float64Array(C2F * O2 * O2),
    logits: new Float64Array(CLASSES),
  };
}

export class ConvNet {
  w1 = new Float64Array(C1F * C1K * C1K);
  b1 = new Float64Array(C1F);
  w2 = new Float64Array(C2F * C1F * C2K * C2K);
  b2 = new Float64Array(C2F);
  wf = new Float64Array(FC_IN * CLASSES);
  bf = new Float64Array(CLASSES);

  static init(rng: Rng): ConvNet {
    const net = new ConvNet();
    const he = (arr: Float64Array, fanIn: number) => {
      const std = Math.sqrt(2 / fanIn);
      for (let i = 0; i < arr.length; i++) arr[i] = std * rng.normal();
    };
    he(net.w1, C1K * C1K);
    he(net.w2, C1F * C2K * C2K);
    he(net.wf, FC_IN);
    return net;
  }

  /** logits for one image; intermediate activations land in s */
  forward(x: Float64Array, s: Scratch): Float64Array {
    const { w1, b1, w2, b2, wf, bf } = this;
    const { z1, a1, z2, a2, logits } = s;
    for (let f = 0; f < C1F; f++) {
      const wb = f * 25;
      const zb = f * 144;
      for (let oy = 0; oy < O1; oy++) {
        const iy = oy * C1S;
        for (let ox = 0; ox < O1; ox++) {
          const ix = ox * C1S;
          let acc = b1[f];
          for (let ky = 0; ky < 5; ky++) {
            const xr = (iy + ky) * IN + ix;
            const wr = wb + ky * 5;
            acc += x[xr] * w1[wr] + x[xr + 1] * w1[wr + 1] + x[xr + 2] * w1[wr + 2]
                 + x[xr + 3] * w1[wr + 3] + x[xr + 4] * w1[wr + 4];
          }
          const zi = zb + oy * O1 + ox;
          z1[zi] = acc;
          a1[zi] = acc > 0 ? acc : 0;
        }
      }
    }
    for (let f = 0; f < C2F; f++) {
      const wb = f * 72;
      const zb = f * 25;
      for (let oy = 0; oy < O2; oy++) {
        const iy = oy * C2S;
        for (let ox = 0; ox < O2; ox++) {
          const ix = ox * C2S;
          let acc = b2[f];
          for (let c = 0; c < C1F; c++) {
            const ab = c * 144 + iy * O1 + ix;
            const wr = wb + c * 9;
            acc += a1[ab] * w2[wr] + a1[ab + 1] * w2[wr + 1] + a1[ab + 2] * w2[wr + 2]
                 + a1[ab + 12] * w2[wr + 3] + a1[ab + 13] * w2[wr + 4] + a1[ab + 14] * w2[wr + 5]
                 + a1[ab + 24] * w2[wr + 6] + a1[ab + 25] * w2[wr + 7] + a1[ab + 26] * w2[wr + 8];
          }
          const zi = zb + oy * O2 + ox;
          z2[zi] = acc;
          a2[zi] = acc > 0 ? acc : 0;
        }
      }
    }
    for (let c = 0; c < CLASSES; c++) logits[c] = bf[c];
    for (let j = 0; j < FC_IN; j++) {
      const a = a2[j];
      if (a === 0) continue;
      const wb = j * CLASSES;
      for (let c = 0; c < CLASSES; c++) logits[c] += a * wf[wb + c];
    }
    return logits;
  }

  /** argmax class, lowest index on ties */
  predict(x: Float64Array, s: Scratch): number {
    const logits = this.forward(x, s);
    let best = 0;
    for (let c = 1; c < CLASSES; c++) if (logits[c] > logits[best]) best = c;
    return best;
  }
}

interface Grads {
  w1: Float64Array; b1: Float64Array;
  w2: Float64Array; b2: Float64Array;
  wf: Float64Array; bf: Float64Array;
  da1: Float64Array;
}

function makeGrads(): Grads {
  return {
    w1: new Float64Array(C1F * C1K * C1K),
    b1: new Float64Array(C1F),
    w2: new Float64Array(C2F * C1F * C2K * C2K),
    b2: new Float64Array(C2F),
    wf: new Float64Array(FC_IN * CLASSES),
    bf: new Float64Array(CLASSES),
    da1: new Float64Array(C1F * O1 * O1),
  };
}

/** softmax cross-entropy loss and gradient accumulation for one sample */
function backward(net: ConvNet, x: Float64Array, label: number, s: Scratch, g: Grads): number {
  const { logits, z1, a1, z2, a2 } = s;
  let maxLogit = logits[0];
  for (let c = 1; c < CLASSES; c++) if (logits[c] > maxLogit) maxLogit = logits[c];
  let total = 0;
  const probs = new Float64Array(CLASSES);
  for (let c = 0; c < CLASSES; c++) {
    probs[c] = Math.exp(logits[c] - maxLogit);
    total += probs[c];
  }
  for (let c = 0; c < CLASSES; c++) probs[c] /= total;
  const loss = -Math.log(Math.max(probs[label], 1e-300));
  probs[label] -= 1;                               // probs is now dL/dlogits

  const dz2 = new Float64Array(FC_IN);
  for (let j = 0; j < FC_IN; j++) {
    const a = a2[j];
    const wb = j * CLASSES;
    let grad = 0;
    for (let c = 0; c < CLASSES; c++) {
      grad += net.wf[wb + c] * probs[c];
      if (a !== 0) g.wf[wb + c] += a * probs[c];
    }
    dz2[j] = z2[j] > 0 ? grad : 0;
  }
  for (let c = 0; c < CLASSES; c++) g.bf[c] += probs[c];

  g.da1.fill(0);
  for (let f = 0; f < C2F; f++) {
    const wb = f * 72;
    const zb = f * 25;
    for (let oy = 0; oy < O2; oy++) {
      const iy = oy * C2S;
      for (let ox = 0; ox < O2; ox++) {
        const v = dz2[zb + oy * O2 + ox];
        if (v === 0) continue;
        const ix = ox * C2S;
        g.b2[f] += v;
        for (let c = 0; c < C1F; c++) {
          const ab = c * 144 + iy * O1 + ix;
          const wr = wb + c * 9;
          g.w2[wr] += a1[ab] * v;       g.da1[ab] += net.w2[wr] * v;
          g.w2[wr + 1] += a1[ab + 1] * v; g.da1[ab + 1] += net.w2[wr + 1] * v;
          g.w2[wr + 2] += a1[ab + 2] * v; g.da1[ab + 2] += net.w2[wr + 2] * v;
          g.w2[wr + 3] += a1[ab + 12] * v; g.da1[ab + 12] += net.w2[wr + 3] * v;
          g.w2[wr + 4] += a1[ab + 13] * v; g.da1[ab + 13] += net.w2[wr + 4] * v;
          g.w2[wr + 5] += a1[ab + 14] * v; g.da1[ab + 14] += net.w2[wr + 5] * v;
          g.w2[wr + 6] += a1[ab + 24] * v; g.da1[ab + 24] += net.w2[wr + 6] * v;
          g.w2[wr + 7] += a1[ab + 25] * v; g.da1[ab + 25] += net.w2[wr + 7] * v;
          g.w2[wr + 8] += a1[ab + 26] * v; g.da1[ab + 26] += net.w2[wr + 8] * v;
        }
      }
    }
  }

  for (let f = 0; f < C1F; f++) {
    const wb = f * 25;
    const zb = f * 144;
    for (let oy = 0; oy < O1; oy++) {
      const iy = oy * C1S;
      for (let ox = 0; ox < O1; ox++) {
        const zi = zb + oy * O1 + ox;
        if (z1[zi] <= 0) continue;
        const v = g.da1[zi];
        if (v === 0) continue;
        const ix = ox * C1S;
        g.b1[f] += v;
        for (let ky = 0; ky < 5; ky++) {
          const xr = (iy + ky) * IN + ix;
          const wr = wb + ky * 5;
          g.w1[wr] += x[xr] * v;
          g.w1[wr + 1] += x[xr + 1] * v;
          g.w1[wr + 2] += x[xr + 2] * v;
          g.w1[wr + 3] += x[xr + 3] * v;
          g.w1[wr + 4] += x[xr + 4] * v;
        }
      }
    }
  }
  return loss;
}

class Adam {
  private m: Float64Array;
  private v: Float64Array;
  private t = 0;
  constructor(private size: number, private lr: number) {
    this.m = new Float64Array(size);
    this.v = new Float64Array(size);
  }
  step(param: Float64Array, grad: Float64Array, offset: number): void {
    const b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const t = this.t;
    const correction = this.lr * Math.sqrt(1 - Math.pow(b2, t)) / (1 - Math.pow(b1, t));
    for (let i = 0; i < param.length; i++) {
      const gi = grad[i];
      const mi = (this.m[offset + i] = b1 * this.m[offset + i] + (1 - b1) * gi);
      const vi = (this.v[offset + i] = b2 * this.v[offset + i] + (1 - b2) * gi * gi);
      param[i] -= correction * mi / (Math.sqrt(vi) + eps);
    }
  }
  tick(): void { this.t += 1; }
}

export interface TrainResult {
  net: ConvNet;
  cleanAccuracy: number;
  epochLosses: number[];
}

export function evaluate(net: ConvNet, xs: Float64Array[], ys: number[]): number {
  const s = makeScratch();
  let hits = 0;
  for (let i = 0; i < xs.length; i++) if (net.predict(xs[i], s) === ys[i]) hits++;
  return hits / xs.length;
}

/**
 * Noise-augmented training: each visit to an image adds a fresh Gaussian
 * perturbation of scale cfg.sigma before the forward pass, so the model
 * learns the smoothed task rather than the clean one. cfg.epochs = 0 skips
 * training entirely and leaves the seeded random initialization.
 */
export function trainModel(cfg: SamplerConfig, data: Subset): TrainResult {
  const rng = new Rng(cfg.seed, 17);
  const net = ConvNet.init(rng);
  const grads = makeGrads();
  const scratch = makeScratch();
  const noisy = new Float64Array(PIXELS);
  const n = data.trainX.length;
  const order = new Int32Array(n);
  for (let i = 0; i < n; i++) order[i] = i;

  const groups: Array<[Float64Array, Float64Array]> = [
    [net.w1, grads.w1], [net.b1, grads.b1],
    [net.w2, grads.w2], [net.b2, grads.b2],
    [net.wf, grads.wf], [net.bf, grads.bf],
  ];
  let total = 0;
  for (const [p] of groups) total += p.length;
  const adam = new Adam(total, cfg.lr);

  const epochLosses: number[] = [];
  for (let epoch = 0; epoch < cfg.epochs; epoch++) {
    const started = Date.now();
    for (let i = n - 1; i > 0; i--) {
      const j = rng.below(i + 1);
      const tmp = order[i]; order[i] = order[j]; order[j] = tmp;
    }
    let lossSum = 0;
    for (let start = 0; start < n; start += cfg.batchSize) {
      const end = Math.min(start + cfg.batchSize, n);
      for (const [, gr] of groups) gr.fill(0);
      for (let i = start; i < end; i++) {
        const idx = order[i];
        const x = data.trainX[idx];
        let input = x;
        if (cfg.sigma > 0) {
          addGaussian(x, noisy, cfg.sigma, PIXELS, rng);
          input = noisy;
        }
        net.forward(input, scratch);
        lossSum += backward(net, input, data.trainY[idx], scratch, grads);
      }
      const scale = 1 / (end - start);
      for (const [, gr] of groups) for (let i = 0; i < gr.length; i++) gr[i] *= scale;
      adam.tick();
      let offset = 0;
      for (const [p, gr] of groups) {
        adam.step(p, gr, offset);
        offset += p.length;
      }
    }
    const avgLoss = lossSum / n;
    epochLosses.push(avgLoss);
    console.log(`epoch ${epoch + 1}/${cfg.epochs}: loss ${avgLoss.toFixed(4)} ` +
      `(${((Date.now() - started) / 1000).toFixed(1)}s)`);
  }
  const cleanAccuracy = evaluate(net, data.evalX, data.evalY);
  return { net, cleanAccuracy, epochLosses };
}

export interface ModelFile {
  format: typeof MODEL_FORMAT;
  arch: { input: [number, number]; conv1: [number, number, number]; conv2: [number, number, number]; fc: [number, number] };
  train: { sigma: number; epochs: number; batchSize: number; lr: number; seed: number; trainPerClass: number; evalPerClass: number };
  untrained: boolean;
  cleanAccuracy: number;
  datasetSha256: string;
  weights: { w1: number[]; b1: number[]; w2: number[]; b2: number[]; wf: number[]; bf: number[] };
  hash: string;
}

function manifestHash(file: Omit<ModelFile, "hash">): string {
  return createHash("sha256").update(JSON.stringify(file)).digest("hex");
}

export function saveModel(net: ConvNet, cfg: SamplerConfig, cleanAccuracy: number,
                          datasetSha256: string, path: string): ModelFile {
  const body: Omit<ModelFile, "hash"> = {
    format: MODEL_FORMAT,
    arch: { input: [IN, IN], conv1: [C1F, C1K, C1S], conv2: [C2F, C2K, C2S], fc: [FC_IN, CLASSES] },
    train: {
      sigma: cfg.sigma, epochs: cfg.epochs, batchSize: cfg.batchSize, lr: cfg.lr,
      seed: cfg.seed, trainPerClass: cfg.trainPerClass, evalPerClass: cfg.evalPerClass,
    },
    untrained: cfg.epochs === 0,
    cleanAccuracy,
    datasetSha256,
    weights: {
      w1: Array.from(net.w1), b1: Array.from(net.b1),
      w2: Array.from(net.w2), b2: Array.from(net.b2),
      wf: Array.from(net.wf), bf: Array.from(net.bf),
    },
  };
  const file: ModelFile = { ...body, hash: manifestHash(body) };
  writeFileSync(path, JSON.stringify(file));
  return file;
}

export function loadModel(path: string): { net: ConvNet; file: ModelFile } {
  const file = JSON.parse(readFileSync(path, "utf-8")) as ModelFile;
  if (file.format !== MODEL_FORMAT) {
    throw new Error(`unsupported model format: ${String(file.format)}`);
  }
  const { hash, ...body } = file;
  if (manifestHash(body) !== hash) {
    throw new Error(`model file ${path} failed its integrity check`);
  }
  const net = new ConvNet();
  net.w1.set(file.weights.w1); net.b1.set(file.weights.b1);
  net.w2.set(file.weights.w2); net.b2.set(file.weights.b2);
  net.wf.set(file.weights.wf); net.bf.set(file.weights.bf);
  return { net, file };
}

/**
 * The full training step: verify and load the dataset subset, train with
 * noise augmentation, evaluate clean accuracy on the held-out split, and
 * persist the artifact. Accuracy below 80% is reported but still saved,
 * so an intentionally untrained model remains a usable fixture.
 */
export function trainBaseModel(cfg: SamplerConfig, modelPath: string): { file: ModelFile; net: ConvNet } {
  const data = loadSubset(cfg.trainPerClass, cfg.evalPerClass);
  const result = trainModel(cfg, data);
  console.log(`clean accuracy on ${data.evalX.length} held-out examples: ` +
    `${(result.cleanAccuracy * 100).toFixed(2)}%`);
  if (result.cleanAccuracy < 0.8) {
    console.warn(`warning: clean accuracy ${(result.cleanAccuracy * 100).toFixed(1)}% ` +
      `is below 80%; saving the artifact anyway`);
  }
  const file = saveModel(result.net, cfg, result.cleanAccuracy, data.combinedSha256, modelPath);
  console.log(`saved model to ${modelPath} (hash ${file.hash.slice(0, 12)})`);
  return { file, net: result.net };
}
