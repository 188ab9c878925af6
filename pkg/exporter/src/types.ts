/** Job description and vocab types for an export run. */

export interface VocabSpec {
  verbs: string[];
  adverbs: string[];
  /** optional antonym pairing as adverb-string pairs */
  antonyms?: [string, string][];
}

export interface VideoItem {
  id: string;
  /** source file; informational for the reference backbone */
  path?: string;
  /** full clip duration in seconds */
  duration: number;
  /** trim window; defaults to the whole clip */
  trimStart?: number;
  trimEnd?: number;
  verb: string;
  adverb: string;
  split: "train" | "test";
}

export interface ExportJob {
  vocab: VocabSpec;
  videos: VideoItem[];
  outDir: string;
  /** per-segment feature width (the video backbone's output) */
  dSeg: number;
  /** pooled joint video-text embedding width */
  dPool: number;
  /** text embedding width; joint-space dot products need dText == dPool */
  dText: number;
  /** RGB frames sampled per one-second segment */
  framesPerSegment?: number;
}

export interface SegmentPlan {
  videoId: string;
  index: number;
  /** timestamps (s, within the original clip) of the sampled frames */
  frameTimes: number[];
}

export interface ExportResult {
  written: string[];
  exported: number;
  skipped: { id: string; reason: string }[];
}
