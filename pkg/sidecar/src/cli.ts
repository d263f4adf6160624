#!/usr/bin/env node
import * as fs from "node:fs";

import { SidecarJob, runJob } from "./jobs.js";

const TASKS = new Set(["embed_corpus", "embed_queries", "score_pairs", "token_stats"]);

function loadJob(jobPath: string): SidecarJob {
  const job = JSON.parse(fs.readFileSync(jobPath, "utf-8")) as SidecarJob;
  if (typeof job.model !== "string" || job.model.length === 0) {
    throw new Error("job.model must be a non-empty string");
  }
  if (!TASKS.has(job.task)) {
    throw new Error(`job.task must be one of ${[...TASKS].join(", ")}`);
  }
  if (typeof job.output !== "string" || job.output.length === 0) {
    throw new Error("job.output must be a file path");
  }
  if (typeof job.input !== "object" || job.input === null) {
    throw new Error("job.input must be an object of file paths");
  }
  return job;
}

function main(argv: string[]): number {
  if (argv.length !== 1) {
    console.error("usage: evidence-sidecar <job.json>");
    return 2;
  }
  try {
    runJob(loadJob(argv[0]));
    return 0;
  } catch (err) {
    console.error(err instanceof Error ? err.message : String(err));
    return 1;
  }
}

process.exit(main(process.argv.slice(2)));
