/**
 * One config object drives both training and count sampling, so a single
 * file can describe a full model-to-counts run.
 */

import { readFileSync } from "node:fs";
import { z } from "zod";

export const samplerConfigSchema = z.object({
  dataset: z.literal("mnist-subset").default("mnist-subset"),
  // training
  sigma: z.number().nonnegative().default(0.5),
  epochs: z.number().int().nonnegative().default(3),
  batchSize: z.number().int().positive().default(16),
  lr: z.number().positive().default(3e-3),
  trainPerClass: z.number().int().positive().default(750),
  evalPerClass: z.number().int().positive().default(100),
  // count sampling
  n: z.number().int().positive().default(2000),
  nSelection: z.number().int().positive().default(200),
  sigmaP: z.number().positive().default(0.5),
  sigmaQ: z.number().positive().default(0.4),
  k: z.number().int().nonnegative().default(386),
  d: z.literal(784).default(784),
  // run
  out: z.string().default("counts.jsonl"),
  seed: z.number().int().nonnegative().default(0),
})
  .refine((c) => 2 * c.k < c.d, {
    message: "need 2k < d for a normalizable noise law",
  })
  .refine((c) => c.sigmaQ < c.sigmaP, {
    message: "the secondary law must be more concentrated: sigma_q < sigma_p",
  });

export type SamplerConfig = z.infer<typeof samplerConfigSchema>;

/** Parse overrides on top of an optional JSON config file. CLI flags win. */
export function resolveConfig(configPath: string | undefined,
                              overrides: Record<string, unknown>): SamplerConfig {
  let base: Record<string, unknown> = {};
  if (configPath !== undefined) {
    base = JSON.parse(readFileSync(configPath, "utf-8")) as Record<string, unknown>;
  }
  const merged = { ...base };
  for (const [key, value] of Object.entries(overrides)) {
    if (value !== undefined) merged[key] = value;
  }
  return samplerConfigSchema.parse(merged);
}
