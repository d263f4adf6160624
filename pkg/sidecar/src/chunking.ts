export interface ChunkingConfig {
  chunkSize: number;
  overlap: number;
}

export const DEFAULT_CHUNKING: ChunkingConfig = { chunkSize: 510, overlap: 50 };

/**
 * Split tokens into overlapping windows. The stride is chunkSize - overlap,
 * and the loop stops as soon as a window reaches the final token, so a text
 * of exactly chunkSize tokens yields one chunk and chunkSize + 1 yields two.
 */
export function chunk(tokens: string[], config: ChunkingConfig): string[][] {
  if (tokens.length === 0) {
    throw new Error("cannot chunk an empty token list");
  }
  if (config.chunkSize < 1 || config.overlap < 0 || config.overlap >= config.chunkSize) {
    throw new Error(`invalid chunking config ${JSON.stringify(config)}`);
  }
  const stride = config.chunkSize - config.overlap;
  const chunks: string[][] = [];
  let start = 0;
  for (;;) {
    const end = Math.min(start + config.chunkSize, tokens.length);
    chunks.push(tokens.slice(start, end));
    if (end >= tokens.length) break;
    start += stride;
  }
  return chunks;
}

/** Combine chunk vectors: 0.5 * (componentwise mean + componentwise max). */
export function meanMaxPool(vectors: number[][]): number[] {
  if (vectors.length === 0) {
    throw new Error("cannot pool an empty chunk list");
  }
  const dim = vectors[0].length;
  for (const v of vectors) {
    if (v.length !== dim) {
      throw new Error(`chunk vector dimension mismatch: ${v.length} vs ${dim}`);
    }
  }
  const pooled = new Array<number>(dim);
  for (let j = 0; j < dim; j++) {
    let sum = 0;
    let max = -Infinity;
    for (const v of vectors) {
      sum += v[j];
      if (v[j] > max) max = v[j];
    }
    pooled[j] = 0.5 * (sum / vectors.length + max);
  }
  return pooled;
}
