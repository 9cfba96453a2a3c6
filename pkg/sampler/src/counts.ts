/**
 * Prediction-count sampling in the certifier's JSONL schema.
 *
 * One record per example: the class is chosen by a majority vote over
 * nSelection draws from the primary law P, then counted over n fresh draws
 * from P and n from the more concentrated law Q. Every record is validated
 * against the schema before it is written; a failure aborts the run rather
 * than emit a file the certifier would reject.
 */

import { writeFileSync } from "node:fs";
import { z } from "zod";
import { Rng } from "./rng.js";
import { addNoise, makeLaw, type NoiseLaw } from "./noise.js";
import { CLASSES, PIXELS, type Subset } from "./mnist.js";
import { makeScratch, type ConvNet, type ModelFile } from "./model.js";
import type { SamplerConfig } from "./config.js";

const noiseSchema = z.object({
  kind: z.enum(["standard-gaussian", "general-gaussian"]),
  sigma_p: z.number().positive(),
  sigma_q: z.number().positive(),
  k: z.number().int().nonnegative(),
  d: z.number().int().positive(),
}).strict();

export const countRecordSchema = z.object({
  schema_version: z.literal(1),
  example_id: z.string().min(1),
  label: z.number().int().min(0).max(CLASSES - 1),
  predicted: z.number().int().min(0).max(CLASSES - 1),
  n_selection: z.number().int().positive(),
  count_p: z.number().int().nonnegative(),
  count_q: z.number().int().nonnegative(),
  n_samples: z.number().int().positive(),
  noise: noiseSchema,
  seed: z.number().int().nonnegative(),
}).strict()
  .refine((r) => r.count_p <= r.n_samples && r.count_q <= r.n_samples, {
    message: "counts cannot exceed n_samples",
  })
  .refine((r) => 2 * r.noise.k < r.noise.d, {
    message: "need 2k < d",
  });

export type CountRecord = z.infer<typeof countRecordSchema>;

/** the certification config must describe the model that was trained */
export function checkModelMatchesConfig(file: ModelFile, cfg: SamplerConfig): void {
  if (!file.untrained && file.train.sigma !== cfg.sigmaP) {
    throw new Error(
      `model was trained with noise sigma ${file.train.sigma} but the run ` +
      `certifies at sigma_p ${cfg.sigmaP}; train a matching model`,
    );
  }
}

function countHits(net: ConvNet, x: Float64Array, law: NoiseLaw, target: number,
                   draws: number, rng: Rng, noisy: Float64Array,
                   scratch: ReturnType<typeof makeScratch>): number {
  let hits = 0;
  for (let i = 0; i < draws; i++) {
    addNoise(x, noisy, law, rng);
    if (net.predict(noisy, scratch) === target) hits++;
  }
  return hits;
}

export interface SampleProgress {
  (done: number, total: number): void;
}

/**
 * Sample count records for examples [start, start + limit) of the eval
 * split. Per-example generators are derived from (seed + index, phase), so
 * any subset of examples reproduces exactly the records it would get in a
 * full run.
 */
export function sampleCounts(net: ConvNet, data: Subset, cfg: SamplerConfig,
                             opts: { start?: number; limit?: number; onProgress?: SampleProgress } = {}): CountRecord[] {
  const lawP = makeLaw("general-gaussian", cfg.sigmaP, cfg.k, cfg.d);
  const lawQ = makeLaw("general-gaussian", cfg.sigmaQ, cfg.k, cfg.d);
  const start = opts.start ?? 0;
  const limit = opts.limit ?? data.evalX.length - start;
  const end = Math.min(start + limit, data.evalX.length);
  const scratch = makeScratch();
  const noisy = new Float64Array(PIXELS);
  const votes = new Int32Array(CLASSES);
  const records: CountRecord[] = [];
  for (let idx = start; idx < end; idx++) {
    const x = data.evalX[idx];
    const exampleSeed = cfg.seed + idx;
    const rngSel = new Rng(exampleSeed, 1);
    votes.fill(0);
    for (let i = 0; i < cfg.nSelection; i++) {
      addNoise(x, noisy, lawP, rngSel);
      votes[net.predict(noisy, scratch)]++;
    }
    let predicted = 0;
    for (let c = 1; c < CLASSES; c++) if (votes[c] > votes[predicted]) predicted = c;

    const countP = countHits(net, x, lawP, predicted, cfg.n, new Rng(exampleSeed, 2), noisy, scratch);
    const countQ = countHits(net, x, lawQ, predicted, cfg.n, new Rng(exampleSeed, 3), noisy, scratch);

    const record = countRecordSchema.parse({
      schema_version: 1,
      example_id: `ex${String(idx).padStart(4, "0")}`,
      label: data.evalY[idx],
      predicted,
      n_selection: cfg.nSelection,
      count_p: countP,
      count_q: countQ,
      n_samples: cfg.n,
      noise: { kind: "general-gaussian", sigma_p: cfg.sigmaP, sigma_q: cfg.sigmaQ, k: cfg.k, d: cfg.d },
      seed: exampleSeed,
    });
    records.push(record);
    opts.onProgress?.(idx - start + 1, end - start);
  }
  return records;
}

export function writeCountsFile(records: CountRecord[], path: string): void {
  const lines = records.map((r) => JSON.stringify(countRecordSchema.parse(r)));
  writeFileSync(path, lines.join("\n") + "\n");
}
