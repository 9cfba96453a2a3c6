/**
 * Isotropic noise laws matching the certifier's conventions.
 *
 * Density is proportional to ||z||^(-2k) * exp(-||z||^2 / (2 sigma'^2))
 * with sigma' = sqrt(d / (d - 2k)) * sigma, so the typical norm stays
 * calibrated to a standard Gaussian of scale sigma for every k. The
 * squared radius satisfies R^2 / (2 sigma'^2) ~ Gamma(d/2 - k), which is
 * what sampleRadius draws; directions are uniform on the sphere.
 */

import { Rng } from "./rng.js";

export type NoiseKind = "standard-gaussian" | "general-gaussian";

export interface NoiseLaw {
  kind: NoiseKind;
  sigma: number;
  k: number;
  d: number;
}

export function makeLaw(kind: NoiseKind, sigma: number, k: number, d: number): NoiseLaw {
  if (!(sigma > 0)) throw new Error(`sigma must be positive, got ${sigma}`);
  if (!Number.isInteger(k) || k < 0) throw new Error(`k must be a non-negative integer, got ${k}`);
  if (!Number.isInteger(d) || d <= 0) throw new Error(`d must be a positive integer, got ${d}`);
  if (2 * k >= d) throw new Error(`need 2k < d for a normalizable law, got k=${k}, d=${d}`);
  if (kind === "standard-gaussian" && k !== 0) {
    throw new Error("standard-gaussian requires k = 0");
  }
  return { kind, sigma, k, d };
}

export function sigmaPrime(law: NoiseLaw): number {
  return law.sigma * Math.sqrt(law.d / (law.d - 2 * law.k));
}

/** one draw of the radial norm ||z|| */
export function sampleRadius(law: NoiseLaw, rng: Rng): number {
  const shape = law.d / 2 - law.k;
  return sigmaPrime(law) * Math.sqrt(2 * rng.gamma(shape));
}

/**
 * out := x + z with z ~ law. Radius and direction are drawn separately so
 * the same code path serves k = 0 and k > 0; at k = 0 this is exactly an
 * isotropic Gaussian of scale sigma.
 */
export function addNoise(x: Float64Array, out: Float64Array, law: NoiseLaw, rng: Rng): void {
  const d = law.d;
  let ss = 0;
  for (let i = 0; i < d; i++) {
    const g = rng.normal();
    out[i] = g;
    ss += g * g;
  }
  const scale = sampleRadius(law, rng) / Math.sqrt(ss);
  for (let i = 0; i < d; i++) out[i] = x[i] + out[i] * scale;
}

/** out := x + sigma * g, the plain Gaussian used for training augmentation */
export function addGaussian(x: Float64Array, out: Float64Array, sigma: number, d: number, rng: Rng): void {
  for (let i = 0; i < d; i++) out[i] = x[i] + sigma * rng.normal();
}
