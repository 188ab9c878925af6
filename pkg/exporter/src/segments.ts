/** Trim handling and the one-second segmentation plan. */

import { SegmentPlan, VideoItem } from "./types.js";

/** Whole one-second segments inside the trim window; fractional tails are
 * dropped. */
export function segmentCount(video: VideoItem): number {
  const start = video.trimStart ?? 0;
  const end = video.trimEnd ?? video.duration;
  if (start < 0 || end > video.duration + 1e-9 || end < start) {
    throw new Error(
      `video ${video.id}: trim [${start}, ${end}] outside duration ${video.duration}`,
    );
  }
  return Math.floor(end - start);
}

/** Frame-sampling plan: per segment, evenly spaced timestamps covering the
 * second. */
export function planSegments(
  video: VideoItem,
  framesPerSegment: number,
): SegmentPlan[] {
  const start = video.trimStart ?? 0;
  const t = segmentCount(video);
  const plans: SegmentPlan[] = [];
  for (let seg = 0; seg < t; seg++) {
    const frameTimes: number[] = [];
    for (let f = 0; f < framesPerSegment; f++) {
      frameTimes.push(start + seg + (f + 0.5) / framesPerSegment);
    }
    plans.push({ videoId: video.id, index: seg, frameTimes });
  }
  return plans;
}
