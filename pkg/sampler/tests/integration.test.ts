/**
 * End-to-end run at the default scale: train the noise-augmented model,
 * sample counts for all 1000 held-out examples at N = 2000, and hand the
 * file to the certification CLI. Certified accuracy at radius zero must
 * land within five points of the model's clean accuracy, every line must
 * parse, and the whole pipeline must finish within 45 minutes.
 *
 * Certification runs the closed-form method over the full subset; the
 * two-law method, which costs an order of magnitude more per record at
 * this dimension, is exercised on a class-stratified slice. Radius zero
 * accuracy is the same under both methods, so the full-subset figure is
 * method-independent.
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, describe, expect, it } from "vitest";
import { samplerConfigSchema } from "../src/config.js";
import { sampleCounts, writeCountsFile } from "../src/counts.js";
import { loadSubset } from "../src/mnist.js";
import { trainBaseModel } from "../src/model.js";

const dir = mkdtempSync(join(tmpdir(), "sampler-e2e-"));
afterAll(() => rmSync(dir, { recursive: true, force: true }));

const BUDGET_S = 2700;

function certify(countsPath: string, mode: string, outPath: string) {
  return spawnSync(
    "smoothcert",
    ["certify", countsPath, "--mode", mode, "--out", outPath],
    { encoding: "utf-8", maxBuffer: 16 * 1024 * 1024 },
  );
}

interface ResultRow {
  exampleId: string;
  method: string;
  radius: number;
  correct: boolean;
}

function readResults(path: string): ResultRow[] {
  const lines = readFileSync(path, "utf-8").trim().split("\n");
  expect(lines[0]).toBe("example_id,method,radius,abstained,correct,pa_low,qa_low,qa_high");
  return lines.slice(1).map((line) => {
    const f = line.split(",");
    return { exampleId: f[0], method: f[1], radius: Number(f[2]), correct: f[4] === "true" };
  });
}

describe("certification pipeline", () => {
  it("certifies the full held-out subset within budget", () => {
    const cfg = samplerConfigSchema.parse({});
    const t0 = Date.now();
    const mark = (stage: string) =>
      console.log(`[e2e +${((Date.now() - t0) / 1000).toFixed(0)}s] ${stage}`);

    const { net, file } = trainBaseModel(cfg, join(dir, "model.json"));
    mark(`trained, clean accuracy ${(file.cleanAccuracy * 100).toFixed(2)}%`);
    expect(file.cleanAccuracy).toBeGreaterThan(0.9);

    const data = loadSubset(cfg.trainPerClass, cfg.evalPerClass);
    const records = sampleCounts(net, data, cfg, {
      onProgress: (done, total) => {
        if (done % 200 === 0) mark(`sampled ${done}/${total}`);
      },
    });
    expect(records.length).toBe(1000);
    const countsPath = join(dir, "counts.jsonl");
    writeCountsFile(records, countsPath);
    mark("counts written");

    const npOut = join(dir, "results-np.csv");
    const np = certify(countsPath, "np", npOut);
    mark("closed-form certification done");
    expect(np.status).toBe(0);
    expect(np.stderr).not.toMatch(/skipping malformed line/);
    expect(np.stdout).toMatch(/wrote 1000 results for 1000 records/);

    const npRows = readResults(npOut);
    expect(npRows.length).toBe(1000);
    const r0Accuracy = npRows.filter((r) => r.correct).length / npRows.length;
    mark(`certified accuracy at r=0: ${(r0Accuracy * 100).toFixed(2)}%`);
    expect(Math.abs(r0Accuracy - file.cleanAccuracy)).toBeLessThanOrEqual(0.05);

    // class-stratified slice through the two-law method: eval examples are
    // grouped 100 per class, so stride 50 picks two from each digit
    const slice = records.filter((_, i) => i % 50 === 0);
    const slicePath = join(dir, "slice.jsonl");
    writeCountsFile(slice, slicePath);
    const bothOut = join(dir, "results-both.csv");
    const both = certify(slicePath, "both", bothOut);
    mark("two-law slice done");
    expect(both.status).toBe(0);
    expect(both.stderr).not.toMatch(/skipping malformed line/);

    const bothRows = readResults(bothOut);
    expect(bothRows.length).toBe(2 * slice.length);
    for (const record of slice) {
      const pair = bothRows.filter((r) => r.exampleId === record.example_id);
      const npRadius = pair.find((r) => r.method === "np")!.radius;
      const dsrsRadius = pair.find((r) => r.method === "dsrs")!.radius;
      expect(dsrsRadius).toBeGreaterThanOrEqual(npRadius - 1e-4);
    }

    const elapsed = (Date.now() - t0) / 1000;
    mark(`pipeline finished in ${elapsed.toFixed(0)}s`);
    expect(elapsed).toBeLessThan(BUDGET_S);
  }, BUDGET_S * 1000);
});
