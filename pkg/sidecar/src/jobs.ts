import * as fs from "node:fs";

import { ChunkingConfig, DEFAULT_CHUNKING, chunk, meanMaxPool } from "./chunking.js";
import { HashProjectionEncoder, cosine } from "./encoder.js";
import {
  atomicWrite,
  readRun,
  readTable,
  sha256File,
  writeEmbeddings,
  writeScores,
} from "./formats.js";

export type Task = "embed_corpus" | "embed_queries" | "score_pairs" | "token_stats";

export interface SidecarJob {
  model: string;
  task: Task;
  input: {
    corpus?: string;
    queries?: string;
    run?: string;
    depth?: number;
  };
  output: string;
  chunking?: ChunkingConfig;
  fields?: string[];
  maxLength?: number;
}

export const SEP_MARKER = "[SEP]";
// fixed stand-in for a transformer tokenizer's CLS/SEP wrapping
export const SPECIAL_TOKEN_OVERHEAD = 2;

const DEFAULT_FIELDS = ["title", "abstract"];
const DEFAULT_MAX_LENGTH = 512;

export function composeText(row: Record<string, string>, fields: string[]): string {
  const blocks = fields.map((f) => (row[f] ?? "").trim()).filter((b) => b.length > 0);
  if (blocks.length === 0) {
    throw new Error(`document ${row.doc_id ?? "?"} has no text in fields ${fields.join(",")}`);
  }
  return blocks.join(` ${SEP_MARKER} `);
}

export function tokenize(text: string): string[] {
  return text.toLowerCase().split(/\s+/).filter((t) => t.length > 0);
}

export function embedTokens(
  tokens: string[],
  encoder: HashProjectionEncoder,
  chunking: ChunkingConfig
): number[] {
  const vectors = chunk(tokens, chunking).map((c) => encoder.encode(c));
  return meanMaxPool(vectors);
}

interface Manifest {
  model: string;
  task: Task;
  chunking: ChunkingConfig;
  pooling: string;
  specialTokenOverhead: number;
  inputs: Record<string, string>;
  outputs: Record<string, string>;
}

function writeManifest(job: SidecarJob, chunking: ChunkingConfig): void {
  const inputs: Record<string, string> = {};
  for (const [key, value] of Object.entries(job.input)) {
    if (typeof value === "string") inputs[key] = sha256File(value);
  }
  const manifest: Manifest = {
    model: job.model,
    task: job.task,
    chunking,
    pooling: "0.5 * (componentwise mean + componentwise max) over chunk vectors",
    specialTokenOverhead: SPECIAL_TOKEN_OVERHEAD,
    inputs,
    outputs: { [job.output]: sha256File(job.output) },
  };
  atomicWrite(`${job.output}.manifest.json`, JSON.stringify(manifest, null, 1) + "\n");
}

function requirePath(value: string | undefined, name: string): string {
  if (!value) throw new Error(`job input.${name} is required for this task`);
  if (!fs.existsSync(value)) throw new Error(`input file not found: ${value}`);
  return value;
}

function embedTable(
  rows: Record<string, string>[],
  idColumn: string,
  textOf: (row: Record<string, string>) => string,
  encoder: HashProjectionEncoder,
  chunking: ChunkingConfig
): Map<string, number[]> {
  const entries = new Map<string, number[]>();
  for (const row of rows) {
    const id = row[idColumn];
    if (!id) throw new Error(`row missing ${idColumn}`);
    entries.set(id, embedTokens(tokenize(textOf(row)), encoder, chunking));
  }
  return entries;
}

export function runJob(job: SidecarJob): void {
  const chunking = job.chunking ?? DEFAULT_CHUNKING;
  const fields = job.fields ?? DEFAULT_FIELDS;
  const maxLength = job.maxLength ?? DEFAULT_MAX_LENGTH;
  const encoder = new HashProjectionEncoder(job.model);

  switch (job.task) {
    case "embed_corpus": {
      const rows = readTable(requirePath(job.input.corpus, "corpus"));
      const entries = embedTable(rows, "doc_id", (r) => composeText(r, fields), encoder, chunking);
      writeEmbeddings(entries, encoder.dim, job.output);
      break;
    }
    case "embed_queries": {
      const rows = readTable(requirePath(job.input.queries, "queries"));
      const entries = embedTable(rows, "query_id", (r) => r.text, encoder, chunking);
      writeEmbeddings(entries, encoder.dim, job.output);
      break;
    }
    case "score_pairs": {
      const run = readRun(requirePath(job.input.run, "run"));
      const corpus = readTable(requirePath(job.input.corpus, "corpus"));
      const queries = readTable(requirePath(job.input.queries, "queries"));
      const depth = job.input.depth ?? 10;
      const docText = new Map(corpus.map((r) => [r.doc_id, composeText(r, fields)]));
      const queryText = new Map(queries.map((r) => [r.query_id, r.text]));

      const seen = new Set<string>();
      const rows: Array<[string, string, number]> = [];
      for (const qid of [...run.keys()].sort()) {
        const text = queryText.get(qid);
        if (text === undefined) throw new Error(`no text for query ${qid}`);
        const queryVec = embedTokens(tokenize(text), encoder, chunking);
        for (const did of run.get(qid)!.slice(0, depth)) {
          const key = `${qid}\t${did}`;
          if (seen.has(key)) {
            console.warn(`duplicate pair ${qid}/${did} skipped`);
            continue;
          }
          seen.add(key);
          const doc = docText.get(did);
          if (doc === undefined) throw new Error(`no text for document ${did}`);
          const docTokens = tokenize(doc).slice(0, maxLength - SPECIAL_TOKEN_OVERHEAD);
          rows.push([qid, did, cosine(queryVec, embedTokens(docTokens, encoder, chunking))]);
        }
      }
      writeScores(rows, job.output);
      break;
    }
    case "token_stats": {
      const source = job.input.corpus ?? job.input.queries;
      const rows = readTable(requirePath(source, "corpus or queries"));
      const idColumn = job.input.corpus ? "doc_id" : "query_id";
      const lines = ["id,token_count"];
      const counted = rows.map((row) => {
        const text = idColumn === "doc_id" ? composeText(row, fields) : row.text;
        return [row[idColumn], tokenize(text).length + SPECIAL_TOKEN_OVERHEAD] as const;
      });
      counted.sort((a, b) => (a[0] < b[0] ? -1 : a[0] > b[0] ? 1 : 0));
      for (const [id, count] of counted) lines.push(`${id},${count}`);
      atomicWrite(job.output, lines.join("\n") + "\n");
      break;
    }
    default:
      throw new Error(`unknown task ${(job as SidecarJob).task}`);
  }
  writeManifest(job, chunking);
}
