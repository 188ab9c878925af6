#!/usr/bin/env node
/** Export job runner.
 *
 * Usage: manner-export <job.json> [--out <dir>]
 *
 * Reads an export job (vocab, video list with trim boundaries, output dir,
 * feature dims), runs the frozen backbone over every decodable video, and
 * writes the four corpus files the primary library loads: vocab.json,
 * manifest.jsonl, features.bin and text_embeddings.jsonl.
 */

import { mkdir, writeFile } from "node:fs/promises";
import { readFileSync } from "node:fs";
import path from "node:path";

import { Backbone, HashBackbone } from "./backbone.js";
import { exportFeatures } from "./exportFeatures.js";
import { exportText } from "./exportText.js";
import { ExportJob, ExportResult, VocabSpec } from "./types.js";

function validateVocab(vocab: VocabSpec): void {
  if (new Set(vocab.verbs).size !== vocab.verbs.length) {
    throw new Error("duplicate verbs in vocab");
  }
  if (new Set(vocab.adverbs).size !== vocab.adverbs.length) {
    throw new Error("duplicate adverbs in vocab");
  }
  if (vocab.antonyms) {
    const seen = new Set<string>();
    for (const [a, b] of vocab.antonyms) {
      for (const name of [a, b]) {
        if (!vocab.adverbs.includes(name)) {
          throw new Error(`antonym pair names unknown adverb ${name}`);
        }
        if (seen.has(name)) throw new Error(`adverb ${name} in two antonym pairs`);
        seen.add(name);
      }
      if (a === b) throw new Error(`adverb ${a} is its own antonym`);
    }
    if (seen.size !== vocab.adverbs.length) {
      throw new Error("antonym pairing must cover every adverb");
    }
  }
}

export async function runExport(
  job: ExportJob,
  backbone?: Backbone,
): Promise<ExportResult> {
  validateVocab(job.vocab);
  await mkdir(job.outDir, { recursive: true });
  const model = backbone ?? new HashBackbone(job.dSeg, job.dPool, job.dText);

  const vocabPath = path.join(job.outDir, "vocab.json");
  const vocabDoc: Record<string, unknown> = {
    verbs: job.vocab.verbs,
    adverbs: job.vocab.adverbs,
  };
  if (job.vocab.antonyms) vocabDoc.antonyms = job.vocab.antonyms;
  await writeFile(vocabPath, JSON.stringify(vocabDoc, null, 1) + "\n");

  const features = await exportFeatures(job, model);
  const textPath = await exportText(job, model);
  return {
    written: [vocabPath, features.manifestPath, features.featuresPath, textPath],
    exported: features.exported.length,
    skipped: features.skipped,
  };
}

export function loadJob(jobPath: string, outOverride?: string): ExportJob {
  const job = JSON.parse(readFileSync(jobPath, "utf-8")) as ExportJob;
  if (outOverride) job.outDir = outOverride;
  for (const key of ["vocab", "videos", "outDir", "dSeg", "dPool", "dText"] as const) {
    if (job[key] === undefined) throw new Error(`job is missing "${key}"`);
  }
  return job;
}

async function main(argv: string[]): Promise<number> {
  const args = argv.slice(2);
  if (args.length < 1) {
    console.error("usage: manner-export <job.json> [--out <dir>]");
    return 2;
  }
  let outOverride: string | undefined;
  const outFlag = args.indexOf("--out");
  if (outFlag >= 0) outOverride = args[outFlag + 1];
  try {
    const job = loadJob(args[0], outOverride);
    const result = await runExport(job);
    console.log(
      `exported ${result.exported} videos (${result.skipped.length} skipped) ` +
      `-> ${job.outDir}`,
    );
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("index.js") || entry.endsWith("manner-export")) {
  main(process.argv).then((code) => process.exit(code));
}
