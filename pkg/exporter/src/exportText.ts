/** Text-embedding export: verbs, adverbs, "verb adverb" phrases for every
 * vocab pair, and the bare-verb sentence used by the antonym-free target. */

import { writeFile } from "node:fs/promises";
import path from "node:path";

import { Backbone } from "./backbone.js";
import { ExportJob } from "./types.js";

export async function exportText(job: ExportJob, backbone: Backbone): Promise<string> {
  const lines: string[] = [];
  const put = (key: string, sentence: string) => {
    const vec = backbone.textEmbedding(sentence);
    lines.push(JSON.stringify({ key, vec: Array.from(vec) }));
  };
  for (const verb of job.vocab.verbs) put(`verb:${verb}`, verb);
  for (const adverb of job.vocab.adverbs) put(`adverb:${adverb}`, adverb);
  for (const verb of job.vocab.verbs) {
    for (const adverb of job.vocab.adverbs) {
      put(`sent:${verb} ${adverb}`, `${verb} ${adverb}`);
    }
    put(`sent:${verb}`, verb);
  }
  const outPath = path.join(job.outDir, "text_embeddings.jsonl");
  await writeFile(outPath, lines.join("\n") + "\n");
  return outPath;
}
