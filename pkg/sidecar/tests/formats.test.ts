import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { readEmbeddings, readRun, readTsv, writeEmbeddings, writeScores } from "../src/formats.js";

const tmp = () => mkdtempSync(join(tmpdir(), "sidecar-"));

describe("embedding file", () => {
  it("round trips ids and vectors", () => {
    const path = join(tmp(), "v.emb");
    const entries = new Map([
      ["d1", [0.25, -1.5, 3]],
      ["d0", [1, 2, 4]],
    ]);
    writeEmbeddings(entries, 3, path);
    const loaded = readEmbeddings(path);
    expect(loaded.dim).toBe(3);
    expect([...loaded.entries.keys()]).toEqual(["d0", "d1"]);
    expect(loaded.entries.get("d1")).toEqual([0.25, -1.5, 3]);
  });

  it("starts with the EMB1 magic and version byte", () => {
    const path = join(tmp(), "v.emb");
    writeEmbeddings(new Map([["a", [1]]]), 1, path);
    const head = readFileSync(path).subarray(0, 5);
    expect(head.toString("ascii", 0, 4)).toBe("EMB1");
    expect(head[4]).toBe(1);
  });

  it("writes byte-identical files for the same input", () => {
    const dir = tmp();
    const entries = new Map([["x", [0.1, 0.2]]]);
    writeEmbeddings(entries, 2, join(dir, "a.emb"));
    writeEmbeddings(entries, 2, join(dir, "b.emb"));
    expect(readFileSync(join(dir, "a.emb"))).toEqual(readFileSync(join(dir, "b.emb")));
  });

  it("rejects a bad magic", () => {
    const path = join(tmp(), "v.emb");
    writeFileSync(path, Buffer.from("NOPE" + "\0".repeat(20)));
    expect(() => readEmbeddings(path)).toThrow(/magic/);
  });
});

describe("score tsv", () => {
  it("writes one tab-separated row per pair", () => {
    const path = join(tmp(), "s.tsv");
    writeScores([["q1", "d1", 0.5], ["q2", "d9", -1.25]], path);
    expect(readFileSync(path, "utf-8")).toBe("q1\td1\t0.5\nq2\td9\t-1.25\n");
  });
});

describe("table and run readers", () => {
  it("reads a headered tsv", () => {
    const path = join(tmp(), "t.tsv");
    writeFileSync(path, "doc_id\ttitle\nd1\thello world\n");
    expect(readTsv(path)).toEqual([{ doc_id: "d1", title: "hello world" }]);
  });

  it("rejects a ragged row", () => {
    const path = join(tmp(), "t.tsv");
    writeFileSync(path, "doc_id\ttitle\nd1\n");
    expect(() => readTsv(path)).toThrow(/columns/);
  });

  it("reads run files preserving rank order", () => {
    const path = join(tmp(), "r.trec");
    writeFileSync(path, "q1 Q0 d2 1 2.0 tag\nq1 Q0 d1 2 1.0 tag\n");
    expect(readRun(path).get("q1")).toEqual(["d2", "d1"]);
  });
});
