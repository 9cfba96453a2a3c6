/**
 * Deterministic random numbers for sampling runs.
 *
 * Count files must be reproducible from the config seed alone, so every
 * draw in this package goes through this generator. Core is xoshiro128**
 * (32-bit ops only, fast in V8) seeded through splitmix32 so that nearby
 * (seed, stream) pairs land in unrelated states.
 */

const TWO_PI = 2 * Math.PI;
const INV_2_32 = 2 ** -32;

function splitmix32(h: number): [number, number] {
  h = (h + 0x9e3779b9) | 0;
  let z = h;
  z = Math.imul(z ^ (z >>> 16), 0x21f0aaad);
  z = Math.imul(z ^ (z >>> 15), 0x735a2d97);
  z = z ^ (z >>> 15);
  return [h, z >>> 0];
}

export class Rng {
  private s0: number;
  private s1: number;
  private s2: number;
  private s3: number;
  private spare: number | null = null;

  constructor(seed: number, stream = 0) {
    if (!Number.isInteger(seed) || seed < 0) {
      throw new Error(`seed must be a non-negative integer, got ${seed}`);
    }
    if (!Number.isInteger(stream) || stream < 0) {
      throw new Error(`stream must be a non-negative integer, got ${stream}`);
    }
    // fold both words into the splitmix state before drawing the 4 lanes
    let h = (seed ^ Math.imul(stream, 0x85ebca6b)) | 0;
    let v: number;
    [h, v] = splitmix32(h);
    this.s0 = v;
    [h, v] = splitmix32(h);
    this.s1 = v;
    [h, v] = splitmix32(h);
    this.s2 = v;
    [h, v] = splitmix32(h);
    this.s3 = v;
    if ((this.s0 | this.s1 | this.s2 | this.s3) === 0) this.s0 = 1;
  }

  /** next uint32 */
  nextU32(): number {
    const s1 = this.s1;
    const r0 = Math.imul(s1, 5);
    const result = (Math.imul(((r0 << 7) | (r0 >>> 25)), 9)) >>> 0;
    const t = s1 << 9;
    this.s2 ^= this.s0;
    this.s3 ^= s1;
    this.s1 = s1 ^ this.s2;
    this.s0 ^= this.s3;
    this.s2 ^= t;
    this.s3 = ((this.s3 << 11) | (this.s3 >>> 21)) | 0;
    return result;
  }

  /** uniform on the open interval (0, 1) */
  uniform(): number {
    return (this.nextU32() + 0.5) * INV_2_32;
  }

  /** integer in [0, n) without modulo bias for n << 2^32 */
  below(n: number): number {
    return Math.floor(this.uniform() * n);
  }

  /** standard normal via Box-Muller, second half cached */
  normal(): number {
    if (this.spare !== null) {
      const out = this.spare;
      this.spare = null;
      return out;
    }
    const m = Math.sqrt(-2 * Math.log(this.uniform()));
    const a = TWO_PI * this.uniform();
    this.spare = m * Math.sin(a);
    return m * Math.cos(a);
  }

  fillNormal(out: Float64Array, n: number): void {
    for (let i = 0; i < n; i++) out[i] = this.normal();
  }

  /**
   * Gamma(shape, 1) via Marsaglia-Tsang squeeze; shapes below one use the
   * boosting identity G(a) = G(a+1) * U^(1/a).
   */
  gamma(shape: number): number {
    if (!(shape > 0)) throw new Error(`gamma shape must be positive, got ${shape}`);
    if (shape < 1) {
      return this.gamma(shape + 1) * Math.pow(this.uniform(), 1 / shape);
    }
    const d = shape - 1 / 3;
    const c = 1 / Math.sqrt(9 * d);
    for (;;) {
      let x: number;
      let v: number;
      do {
        x = this.normal();
        v = 1 + c * x;
      } while (v <= 0);
      v = v * v * v;
      const u = this.uniform();
      const x2 = x * x;
      if (u < 1 - 0.0331 * x2 * x2) return d * v;
      if (Math.log(u) < 0.5 * x2 + d * (1 - v + Math.log(v))) return d * v;
    }
  }
}
