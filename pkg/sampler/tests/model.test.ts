import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, describe, expect, it } from "vitest";
import { samplerConfigSchema } from "../src/config.js";
import { loadSubset } from "../src/mnist.js";
import { ConvNet, loadModel, makeScratch, trainBaseModel, trainModel } from "../src/model.js";
import { Rng } from "../src/rng.js";

const dir = mkdtempSync(join(tmpdir(), "sampler-model-"));
afterAll(() => rmSync(dir, { recursive: true, force: true }));

describe("forward pass", () => {
  it("produces ten finite logits and a class index", () => {
    const net = ConvNet.init(new Rng(0, 17));
    const s = makeScratch();
    const x = new Float64Array(784).fill(0.5);
    const logits = net.forward(x, s);
    expect(logits.length).toBe(10);
    for (const v of logits) expect(Number.isFinite(v)).toBe(true);
    const c = net.predict(x, s);
    expect(c).toBeGreaterThanOrEqual(0);
    expect(c).toBeLessThan(10);
  });
});

describe("training artifacts", () => {
  it("epochs = 0 saves the random init flagged as untrained", () => {
    const cfg = samplerConfigSchema.parse({ epochs: 0, trainPerClass: 20, evalPerClass: 10 });
    const path = join(dir, "untrained.json");
    const { file } = trainBaseModel(cfg, path);
    expect(file.untrained).toBe(true);
    expect(file.cleanAccuracy).toBeLessThan(0.8);
    const loaded = loadModel(path);
    expect(loaded.file.hash).toBe(file.hash);
  });

  it("identical seeds produce identical manifest hashes", () => {
    const cfg = samplerConfigSchema.parse({
      epochs: 1, seed: 5, trainPerClass: 40, evalPerClass: 10,
    });
    const a = trainBaseModel(cfg, join(dir, "seed-a.json"));
    const b = trainBaseModel(cfg, join(dir, "seed-b.json"));
    expect(a.file.hash).toBe(b.file.hash);
    const other = trainBaseModel(
      samplerConfigSchema.parse({ epochs: 1, seed: 6, trainPerClass: 40, evalPerClass: 10 }),
      join(dir, "seed-c.json"),
    );
    expect(other.file.hash).not.toBe(a.file.hash);
  });

  it("a corrupted artifact fails its integrity check", async () => {
    const cfg = samplerConfigSchema.parse({ epochs: 0, trainPerClass: 20, evalPerClass: 10 });
    const path = join(dir, "corrupt.json");
    trainBaseModel(cfg, path);
    const fs = await import("node:fs");
    const body = JSON.parse(fs.readFileSync(path, "utf-8"));
    body.weights.b1[0] += 1e-3;
    fs.writeFileSync(path, JSON.stringify(body));
    expect(() => loadModel(path)).toThrow(/integrity/);
  });
});

describe("clean training benchmark", () => {
  it("clean accuracy beats 95% after two epochs without augmentation", () => {
    const cfg = samplerConfigSchema.parse({ sigma: 0, epochs: 2, seed: 0 });
    const data = loadSubset(cfg.trainPerClass, cfg.evalPerClass);
    const { cleanAccuracy } = trainModel(cfg, data);
    expect(cleanAccuracy).toBeGreaterThan(0.95);
  }, 60_000);
});
