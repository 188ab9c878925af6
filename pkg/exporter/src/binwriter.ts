/** Writer for the binary feature container consumed by the primary loader.
 *
 * Layout (all little-endian): magic "AVF1", u32 version=1, u32 dSeg,
 * u32 dPool, u64 count; an index block of (u32 id length, UTF-8 id,
 * u64 absolute byte offset, u32 t) per video; then per video t x dSeg
 * float32 row-major segment features followed by dPool float32 pooled
 * values.
 */

export interface VideoPayload {
  id: string;
  segments: Float32Array[]; // t rows of dSeg
  pooled: Float32Array; // dPool
}

const MAGIC = "AVF1";
const VERSION = 1;

export function encodeFeatures(
  dSeg: number,
  dPool: number,
  videos: VideoPayload[],
): Buffer {
  const header = Buffer.alloc(24);
  header.write(MAGIC, 0, "ascii");
  header.writeUInt32LE(VERSION, 4);
  header.writeUInt32LE(dSeg, 8);
  header.writeUInt32LE(dPool, 12);
  header.writeBigUInt64LE(BigInt(videos.length), 16);

  const ids = videos.map((v) => Buffer.from(v.id, "utf-8"));
  const indexSize = ids.reduce((acc, id) => acc + 4 + id.length + 8 + 4, 0);
  const index = Buffer.alloc(indexSize);
  const payloads: Buffer[] = [];

  let cursor = 0;
  let offset = header.length + indexSize;
  for (let i = 0; i < videos.length; i++) {
    const video = videos[i];
    const t = video.segments.length;
    for (const row of video.segments) {
      if (row.length !== dSeg) {
        throw new Error(`video ${video.id}: segment width ${row.length} != ${dSeg}`);
      }
    }
    if (video.pooled.length !== dPool) {
      throw new Error(`video ${video.id}: pooled width ${video.pooled.length} != ${dPool}`);
    }
    index.writeUInt32LE(ids[i].length, cursor);
    cursor += 4;
    ids[i].copy(index, cursor);
    cursor += ids[i].length;
    index.writeBigUInt64LE(BigInt(offset), cursor);
    cursor += 8;
    index.writeUInt32LE(t, cursor);
    cursor += 4;

    const payload = Buffer.alloc(4 * (t * dSeg + dPool));
    let p = 0;
    for (const row of video.segments) {
      for (const x of row) {
        payload.writeFloatLE(x, p);
        p += 4;
      }
    }
    for (const x of video.pooled) {
      payload.writeFloatLE(x, p);
      p += 4;
    }
    payloads.push(payload);
    offset += payload.length;
  }
  return Buffer.concat([header, index, ...payloads]);
}
