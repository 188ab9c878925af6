/** The frozen feature extractors behind one interface.
 *
 * A production deployment implements `Backbone` on top of a pretrained
 * joint video-text model (segment features from its video tower, pooled
 * and sentence embeddings from the joint space).  Nothing is trained or
 * fine-tuned here: the exporter only calls these three methods.
 *
 * `HashBackbone` is the deterministic reference implementation used by
 * tests and offline runs: every vector is derived from SHA-256 of its
 * inputs, so re-exports are byte-identical and no model weights or video
 * decoding are required.
 */

import { createHash } from "node:crypto";

import { SegmentPlan } from "./types.js";

export interface Backbone {
  /** one feature vector per one-second segment (16 sampled frames) */
  segmentFeature(plan: SegmentPlan): Float32Array;
  /** pooled joint-space embedding for a whole video */
  pooledEmbedding(videoId: string): Float32Array;
  /** joint-space embedding of a sentence ("verb", "verb adverb", ...) */
  textEmbedding(sentence: string): Float32Array;
}

/** Unit vector whose entries are a deterministic function of the key. */
export function hashVector(key: string, dim: number): Float32Array {
  const out = new Float32Array(dim);
  let block = Buffer.alloc(0);
  let counter = 0;
  let offset = 0;
  let norm = 0;
  for (let i = 0; i < dim; i++) {
    if (offset + 4 > block.length) {
      block = createHash("sha256").update(`${key}:${counter++}`).digest();
      offset = 0;
    }
    const u = block.readUInt32LE(offset) / 0xffffffff; // [0, 1]
    offset += 4;
    out[i] = 2 * u - 1;
    norm += out[i] * out[i];
  }
  norm = Math.sqrt(norm) || 1;
  for (let i = 0; i < dim; i++) out[i] /= norm;
  return out;
}

export class HashBackbone implements Backbone {
  constructor(
    private dSeg: number,
    private dPool: number,
    private dText: number,
  ) {}

  segmentFeature(plan: SegmentPlan): Float32Array {
    const key = `seg:${plan.videoId}:${plan.index}:${plan.frameTimes.length}`;
    return hashVector(key, this.dSeg);
  }

  pooledEmbedding(videoId: string): Float32Array {
    return hashVector(`pooled:${videoId}`, this.dPool);
  }

  textEmbedding(sentence: string): Float32Array {
    return hashVector(`text:${sentence}`, this.dText);
  }
}
