/** Segment-feature and manifest export. */

import { writeFile } from "node:fs/promises";
import path from "node:path";

import { Backbone } from "./backbone.js";
import { encodeFeatures, VideoPayload } from "./binwriter.js";
import { planSegments, segmentCount } from "./segments.js";
import { ExportJob, VideoItem } from "./types.js";

export interface FeatureExport {
  featuresPath: string;
  manifestPath: string;
  exported: VideoItem[];
  skipped: { id: string; reason: string }[];
}

export async function exportFeatures(
  job: ExportJob,
  backbone: Backbone,
): Promise<FeatureExport> {
  const framesPerSegment = job.framesPerSegment ?? 16;
  const payloads: VideoPayload[] = [];
  const exported: VideoItem[] = [];
  const skipped: { id: string; reason: string }[] = [];
  const verbSet = new Set(job.vocab.verbs);
  const adverbSet = new Set(job.vocab.adverbs);

  for (const video of job.videos) {
    try {
      if (!verbSet.has(video.verb) || !adverbSet.has(video.adverb)) {
        throw new Error(`labels (${video.verb}, ${video.adverb}) not in vocab`);
      }
      const t = segmentCount(video);
      if (t < 1) {
        throw new Error("shorter than one whole segment");
      }
      const plans = planSegments(video, framesPerSegment);
      payloads.push({
        id: video.id,
        segments: plans.map((p) => backbone.segmentFeature(p)),
        pooled: backbone.pooledEmbedding(video.id),
      });
      exported.push({ ...video });
    } catch (err) {
      const reason = err instanceof Error ? err.message : String(err);
      console.error(`skipping ${video.id}: ${reason}`);
      skipped.push({ id: video.id, reason });
    }
  }

  const featuresPath = path.join(job.outDir, "features.bin");
  await writeFile(featuresPath, encodeFeatures(job.dSeg, job.dPool, payloads));

  const manifestPath = path.join(job.outDir, "manifest.jsonl");
  const lines = exported.map((v) =>
    JSON.stringify({
      id: v.id,
      verb: v.verb,
      adverb: v.adverb,
      split: v.split,
      t: segmentCount(v),
    }),
  );
  await writeFile(manifestPath, lines.join("\n") + (lines.length ? "\n" : ""));
  return { featuresPath, manifestPath, exported, skipped };
}
