/**
 * Small deterministic random source so repeated exports with the same seed
 * produce bit-identical calibration tensors on every platform.
 */

/** splitmix32: uniform 32-bit generator with solid mixing for small seeds. */
export class Rng {
  private state: number;
  private spare: number | null = null;

  constructor(seed: number) {
    this.state = seed >>> 0;
  }

  /** Uniform float in [0, 1) with 32 bits of resolution. */
  uniform(): number {
    this.state = (this.state + 0x9e3779b9) >>> 0;
    let z = this.state;
    z ^= z >>> 16;
    z = Math.imul(z, 0x21f0aaad);
    z ^= z >>> 15;
    z = Math.imul(z, 0x735a2d97);
    z ^= z >>> 15;
    return (z >>> 0) / 4294967296;
  }

  /** Standard normal via Box-Muller (polar form is avoided so the draw
   * count per sample is fixed and seeding stays reproducible). */
  gaussian(): number {
    if (this.spare !== null) {
      const v = this.spare;
      this.spare = null;
      return v;
    }
    const u1 = 1 - this.uniform(); // (0, 1]: keeps log() finite
    const u2 = this.uniform();
    const r = Math.sqrt(-2 * Math.log(u1));
    this.spare = r * Math.sin(2 * Math.PI * u2);
    return r * Math.cos(2 * Math.PI * u2);
  }

  /** k distinct indices drawn from [0, n) without replacement
   * (partial Fisher-Yates over an index table). */
  sampleWithoutReplacement(n: number, k: number): number[] {
    if (k > n) {
      throw new Error(`cannot draw ${k} distinct items from a pool of ${n}`);
    }
    const idx = Array.from({ length: n }, (_, i) => i);
    for (let i = 0; i < k; i++) {
      const j = i + Math.floor(this.uniform() * (n - i));
      const tmp = idx[i] as number;
      idx[i] = idx[j] as number;
      idx[j] = tmp;
    }
    return idx.slice(0, k);
  }
}
