import { createHash } from "node:crypto";
import * as fs from "node:fs";
import * as path from "node:path";

export interface Row {
  [column: string]: string;
}

/** Tab-separated file with a header row; fields hold no tabs or newlines. */
export function readTsv(filePath: string): Row[] {
  const lines = fs.readFileSync(filePath, "utf-8").split("\n").filter((l) => l.length > 0);
  if (lines.length === 0) return [];
  const header = lines[0].split("\t");
  return lines.slice(1).map((line, i) => {
    const cells = line.split("\t");
    if (cells.length !== header.length) {
      throw new Error(`${filePath}:${i + 2}: expected ${header.length} columns, got ${cells.length}`);
    }
    const row: Row = {};
    header.forEach((name, j) => (row[name] = cells[j]));
    return row;
  });
}

export function readJsonl(filePath: string): Row[] {
  return fs
    .readFileSync(filePath, "utf-8")
    .split("\n")
    .filter((l) => l.trim().length > 0)
    .map((l) => JSON.parse(l) as Row);
}

export function readTable(filePath: string): Row[] {
  return filePath.endsWith(".jsonl") ? readJsonl(filePath) : readTsv(filePath);
}

/** TREC run line: query_id Q0 doc_id rank score tag. */
export function readRun(filePath: string): Map<string, string[]> {
  const run = new Map<string, string[]>();
  for (const line of fs.readFileSync(filePath, "utf-8").split("\n")) {
    if (!line.trim()) continue;
    const parts = line.trim().split(/\s+/);
    if (parts.length !== 6) {
      throw new Error(`${filePath}: malformed run line ${JSON.stringify(line)}`);
    }
    const [qid, , did] = parts;
    if (!run.has(qid)) run.set(qid, []);
    run.get(qid)!.push(did);
  }
  return run;
}

const EMB_MAGIC = "EMB1";
const EMB_VERSION = 1;

/**
 * Binary embedding file: magic "EMB1", u8 version, u32 dim, u64 count,
 * then per record u16 id byte length, UTF-8 id, dim little-endian f32
 * components. Records are sorted by id bytes so output is reproducible.
 */
export function writeEmbeddings(entries: Map<string, number[]>, dim: number, filePath: string): void {
  const ids = [...entries.keys()].sort();
  const parts: Buffer[] = [];
  const header = Buffer.alloc(4 + 1 + 4 + 8);
  header.write(EMB_MAGIC, 0, "ascii");
  header.writeUInt8(EMB_VERSION, 4);
  header.writeUInt32LE(dim, 5);
  header.writeBigUInt64LE(BigInt(ids.length), 9);
  parts.push(header);
  for (const id of ids) {
    const vec = entries.get(id)!;
    if (vec.length !== dim) {
      throw new Error(`vector for ${id} has dim ${vec.length}, expected ${dim}`);
    }
    const idBytes = Buffer.from(id, "utf-8");
    const rec = Buffer.alloc(2 + idBytes.length + 4 * dim);
    rec.writeUInt16LE(idBytes.length, 0);
    idBytes.copy(rec, 2);
    vec.forEach((x, j) => rec.writeFloatLE(x, 2 + idBytes.length + 4 * j));
    parts.push(rec);
  }
  atomicWrite(filePath, Buffer.concat(parts));
}

export function readEmbeddings(filePath: string): { dim: number; entries: Map<string, number[]> } {
  const data = fs.readFileSync(filePath);
  if (data.subarray(0, 4).toString("ascii") !== EMB_MAGIC) {
    throw new Error(`${filePath}: bad magic`);
  }
  const version = data.readUInt8(4);
  if (version !== EMB_VERSION) {
    throw new Error(`${filePath}: unsupported version ${version}`);
  }
  const dim = data.readUInt32LE(5);
  const count = Number(data.readBigUInt64LE(9));
  const entries = new Map<string, number[]>();
  let offset = 17;
  for (let i = 0; i < count; i++) {
    const idLen = data.readUInt16LE(offset);
    offset += 2;
    const id = data.subarray(offset, offset + idLen).toString("utf-8");
    offset += idLen;
    const vec: number[] = [];
    for (let j = 0; j < dim; j++) {
      vec.push(data.readFloatLE(offset));
      offset += 4;
    }
    entries.set(id, vec);
  }
  if (offset !== data.length) {
    throw new Error(`${filePath}: trailing bytes after ${count} records`);
  }
  return { dim, entries };
}

/** Headerless score TSV: query_id, doc_id, score. */
export function writeScores(rows: Array<[string, string, number]>, filePath: string): void {
  const text = rows.map(([q, d, s]) => `${q}\t${d}\t${formatScore(s)}\n`).join("");
  atomicWrite(filePath, Buffer.from(text, "utf-8"));
}

function formatScore(x: number): string {
  // mirror printf %.10g
  const formatted = x.toPrecision(10);
  return formatted.includes("e") ? formatted : String(Number(formatted));
}

export function atomicWrite(filePath: string, data: Buffer | string): void {
  fs.mkdirSync(path.dirname(filePath), { recursive: true });
  const tmp = path.join(path.dirname(filePath), `.tmp-${path.basename(filePath)}-${process.pid}`);
  fs.writeFileSync(tmp, data);
  fs.renameSync(tmp, filePath);
}

export function sha256File(filePath: string): string {
  return createHash("sha256").update(fs.readFileSync(filePath)).digest("hex");
}
