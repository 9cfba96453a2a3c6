/**
 * Bundled digit dataset: 28x28 grayscale images, ten classes, roughly one
 * thousand examples per class, shipped as JSON by the mnist npm package so
 * no network fetch happens at run time. Integrity is checked against
 * pinned SHA-256 digests of the per-class files.
 */

import { createRequire } from "node:module";
import { createHash } from "node:crypto";
import { readFileSync } from "node:fs";

const require = createRequire(import.meta.url);

export const IMAGE_SIZE = 28;
export const PIXELS = IMAGE_SIZE * IMAGE_SIZE;
export const CLASSES = 10;

// sha256 of mnist/src/digits/<c>.json, frozen at mnist@1.1.0
const PINNED_SHA256: readonly string[] = [
  "64c965faccfe0483cf69df89a24fb69ee338abb4dcf4ddc890258d66e40d5de2",
  "2143d080bd62935928448372a5315c2ddfdcb0c517f2939e12eb0472ffc9b25e",
  "7db7b18ebab81b02468fb36acd349137fff8d9024988a7c64361ab5e6567be90",
  "c12910410ef545feacb25e36d96af981833f45fb814899e7f7d82cedbb54fa54",
  "b2cb87a1d05a8bd86b0a84d12070bb31f2a4c6cffa19a5c5f598502afc28b5a8",
  "9286c3b47bdcb24c6b10552e81159233dd1c4c4c13aff7833a2ebaba6bf396ca",
  "0ef0d890993b69694719899c0a326b026caa48cee34508ad15ac5427f92d641a",
  "14b83ca1b3d3db6f05c4ed1b386ddc9ad9072230856500950b491bd3d21a2a33",
  "6ea5298d9b7e4012e0980d97b565e0cdde50befee0e20b2ef8a86d0abce0c762",
  "bd0ffaad429227dacd35988a05dc0801a294a021e28da86392d628278cfa58ab",
];

export interface DatasetCheck {
  ok: boolean;
  perClass: number[];
  mismatches: string[];
  combinedSha256: string;
}

function digitFile(c: number): string {
  return require.resolve(`mnist/src/digits/${c}.json`);
}

/**
 * Verify the bundled files against the pinned digests and report per-class
 * example counts. This is the "fetch" step: the data rides in with the
 * package install, so all that is left to do is prove it is intact.
 */
export function verifyDataset(): DatasetCheck {
  const perClass: number[] = [];
  const mismatches: string[] = [];
  const combined = createHash("sha256");
  for (let c = 0; c < CLASSES; c++) {
    const path = digitFile(c);
    const bytes = readFileSync(path);
    const digest = createHash("sha256").update(bytes).digest("hex");
    combined.update(digest);
    if (digest !== PINNED_SHA256[c]) {
      mismatches.push(`${c}.json: expected ${PINNED_SHA256[c]}, got ${digest}`);
    }
    const data = JSON.parse(bytes.toString("utf-8")).data as number[];
    perClass.push(Math.floor(data.length / PIXELS));
  }
  return {
    ok: mismatches.length === 0,
    perClass,
    mismatches,
    combinedSha256: combined.digest("hex"),
  };
}

export interface Subset {
  trainX: Float64Array[];
  trainY: number[];
  evalX: Float64Array[];
  evalY: number[];
  combinedSha256: string;
}

interface MnistDigit {
  raw: number[];
  length: number;
}

/**
 * Deterministic split: the first trainPerClass images of each class train
 * the model, the last evalPerClass are held out for evaluation and
 * certification. The smallest class has 863 images, which bounds the sum.
 */
export function loadSubset(trainPerClass: number, evalPerClass: number): Subset {
  const check = verifyDataset();
  if (!check.ok) {
    throw new Error(`dataset integrity check failed: ${check.mismatches.join("; ")}`);
  }
  const minCount = Math.min(...check.perClass);
  if (trainPerClass + evalPerClass > minCount) {
    throw new Error(
      `trainPerClass + evalPerClass = ${trainPerClass + evalPerClass} exceeds the ` +
      `smallest class count ${minCount}`,
    );
  }
  const mnist = require("mnist") as Record<number, MnistDigit>;
  const trainX: Float64Array[] = [];
  const trainY: number[] = [];
  const evalX: Float64Array[] = [];
  const evalY: number[] = [];
  const slice = (raw: number[], index: number): Float64Array => {
    const out = new Float64Array(PIXELS);
    const base = index * PIXELS;
    for (let i = 0; i < PIXELS; i++) out[i] = raw[base + i];
    return out;
  };
  for (let c = 0; c < CLASSES; c++) {
    const digit = mnist[c];
    for (let i = 0; i < trainPerClass; i++) {
      trainX.push(slice(digit.raw, i));
      trainY.push(c);
    }
    for (let i = digit.length - evalPerClass; i < digit.length; i++) {
      evalX.push(slice(digit.raw, i));
      evalY.push(c);
    }
  }
  return { trainX, trainY, evalX, evalY, combinedSha256: check.combinedSha256 };
}
