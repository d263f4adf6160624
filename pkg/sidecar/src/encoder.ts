/**
 * Deterministic hash-projection encoder.
 *
 * Stands in for a pretrained sentence encoder: tokens are CRC32-hashed into
 * feature buckets, the bag-of-tokens vector is L2-normalized and projected
 * through a seeded Gaussian matrix, and the output is L2-normalized again.
 * Same model id and seed always produce the same vector for the same text.
 */

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

export function crc32(text: string): number {
  const bytes = Buffer.from(text, "utf-8");
  let crc = 0xffffffff;
  for (const byte of bytes) {
    crc = CRC_TABLE[(crc ^ byte) & 0xff] ^ (crc >>> 8);
  }
  return (crc ^ 0xffffffff) >>> 0;
}

// mulberry32: small fast PRNG, plenty for reproducible projection weights
function seededRandom(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function gaussianMatrix(rows: number, cols: number, seed: number): Float64Array {
  const rand = seededRandom(seed);
  const out = new Float64Array(rows * cols);
  for (let i = 0; i < out.length; i += 2) {
    // Box-Muller transform
    const u = Math.max(rand(), 1e-12);
    const v = rand();
    const r = Math.sqrt(-2 * Math.log(u));
    out[i] = r * Math.cos(2 * Math.PI * v);
    if (i + 1 < out.length) out[i + 1] = r * Math.sin(2 * Math.PI * v);
  }
  return out;
}

export class HashProjectionEncoder {
  readonly dim: number;
  readonly dimFeat: number;
  readonly modelId: string;
  private readonly weight: Float64Array;

  constructor(modelId = "hash-projection-v1", dim = 32, dimFeat = 256) {
    this.modelId = modelId;
    this.dim = dim;
    this.dimFeat = dimFeat;
    this.weight = gaussianMatrix(dim, dimFeat, crc32(modelId));
  }

  encode(tokens: string[]): number[] {
    if (tokens.length === 0) {
      throw new Error("cannot encode an empty token list");
    }
    const feats = new Float64Array(this.dimFeat);
    for (const token of tokens) {
      feats[crc32(token) % this.dimFeat] += 1;
    }
    normalize(feats);
    const out = new Array<number>(this.dim).fill(0);
    for (let i = 0; i < this.dim; i++) {
      let acc = 0;
      const base = i * this.dimFeat;
      for (let j = 0; j < this.dimFeat; j++) {
        acc += this.weight[base + j] * feats[j];
      }
      out[i] = acc;
    }
    const norm = Math.hypot(...out);
    if (norm === 0) {
      throw new Error("encoder produced a zero vector");
    }
    return out.map((x) => x / norm);
  }
}

function normalize(v: Float64Array): void {
  let sq = 0;
  for (const x of v) sq += x * x;
  const norm = Math.sqrt(sq);
  if (norm === 0) {
    throw new Error("zero feature vector");
  }
  for (let i = 0; i < v.length; i++) v[i] /= norm;
}

export function cosine(a: number[], b: number[]): number {
  let dot = 0;
  let na = 0;
  let nb = 0;
  for (let i = 0; i < a.length; i++) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / (Math.sqrt(na) * Math.sqrt(nb));
}
