#!/usr/bin/env node
/**
 * model-sampler: train a noise-augmented digit classifier and emit
 * prediction-count files for the certification CLI.
 *
 *   model-sampler fetch                      verify the bundled dataset
 *   model-sampler train --sigma 0.5 ...      train and save a model artifact
 *   model-sampler sample --model m.json ...  write count records (JSONL)
 */

import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { ZodError } from "zod";
import { verifyDataset, loadSubset } from "./mnist.js";
import { trainBaseModel, loadModel } from "./model.js";
import { resolveConfig } from "./config.js";
import { sampleCounts, writeCountsFile, checkModelMatchesConfig } from "./counts.js";

function fail(err: unknown): never {
  const msg = err instanceof ZodError
    ? err.issues.map((i) => `${i.path.join(".") || "config"}: ${i.message}`).join("; ")
    : err instanceof Error ? err.message : String(err);
  console.error(`model-sampler: error: ${msg}`);
  process.exit(1);
}

const configOption = {
  config: { type: "string" as const, describe: "JSON config file; flags override it" },
};

void yargs(hideBin(process.argv))
  .scriptName("model-sampler")
  .command(
    "fetch",
    "verify the bundled digit dataset against pinned checksums",
    {},
    () => {
      try {
        const check = verifyDataset();
        console.log(`per-class examples: ${check.perClass.join(", ")}`);
        console.log(`combined digest: ${check.combinedSha256}`);
        if (!check.ok) {
          console.error(`model-sampler: error: checksum mismatch:\n  ${check.mismatches.join("\n  ")}`);
          process.exit(1);
        }
        console.log("dataset intact");
      } catch (err) {
        fail(err);
      }
    },
  )
  .command(
    "train",
    "train the classifier with Gaussian-augmented inputs and save it",
    {
      ...configOption,
      sigma: { type: "number", describe: "training noise scale (0 trains clean)" },
      epochs: { type: "number", describe: "passes over the training split (0 saves the random init)" },
      "batch-size": { type: "number" },
      lr: { type: "number" },
      seed: { type: "number" },
      "train-per-class": { type: "number" },
      "eval-per-class": { type: "number" },
      model: { type: "string", default: "model.json", describe: "output path for the model artifact" },
    },
    (argv) => {
      try {
        const cfg = resolveConfig(argv.config, {
          sigma: argv.sigma, epochs: argv.epochs, batchSize: argv["batch-size"],
          lr: argv.lr, seed: argv.seed,
          trainPerClass: argv["train-per-class"], evalPerClass: argv["eval-per-class"],
        });
        trainBaseModel(cfg, argv.model);
      } catch (err) {
        fail(err);
      }
    },
  )
  .command(
    "sample",
    "sample prediction counts for the held-out examples",
    {
      ...configOption,
      model: { type: "string", default: "model.json", describe: "model artifact from `train`" },
      out: { type: "string", describe: "output JSONL path" },
      n: { type: "number", describe: "draws per law per example" },
      "n-selection": { type: "number", describe: "draws for the class-selection vote" },
      "sigma-p": { type: "number" },
      "sigma-q": { type: "number" },
      k: { type: "number", describe: "radial pole order of the sampling law" },
      seed: { type: "number" },
      examples: { type: "number", describe: "only sample the first EXAMPLES held-out images" },
    },
    (argv) => {
      try {
        const cfg = resolveConfig(argv.config, {
          out: argv.out, n: argv.n, nSelection: argv["n-selection"],
          sigmaP: argv["sigma-p"], sigmaQ: argv["sigma-q"], k: argv.k, seed: argv.seed,
        });
        const { net, file } = loadModel(argv.model);
        checkModelMatchesConfig(file, cfg);
        const data = loadSubset(file.train.trainPerClass, file.train.evalPerClass);
        if (data.combinedSha256 !== file.datasetSha256) {
          throw new Error("dataset digest changed since the model was trained");
        }
        const started = Date.now();
        const records = sampleCounts(net, data, cfg, {
          limit: argv.examples,
          onProgress: (done, total) => {
            if (done % 50 === 0 || done === total) {
              const rate = done / ((Date.now() - started) / 1000);
              console.log(`sampled ${done}/${total} examples (${rate.toFixed(1)}/s)`);
            }
          },
        });
        writeCountsFile(records, cfg.out);
        console.log(`wrote ${records.length} count records to ${cfg.out}`);
      } catch (err) {
        fail(err);
      }
    },
  )
  .demandCommand(1, "pick a command: fetch, train, or sample")
  .strict()
  .help()
  .parse();
