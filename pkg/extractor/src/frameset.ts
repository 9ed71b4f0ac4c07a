/**
 * Writer (and verifying reader) for the frame-set formats consumed by the
 * scoring toolkit.
 *
 * Frame file: magic "FADE", version u32=1, dim u32, n_frames u64, then
 * n_frames*dim little-endian float32, row-major. A set directory holds one
 * file per song plus set.json with the model metadata and the song list;
 * an unbounded context is encoded as the string "unbounded".
 */
import * as fs from 'fs';
import * as path from 'path';

import { ModelInfo } from './registry';

const MAGIC = 'FADE';
const VERSION = 1;
const HEADER_BYTES = 20;

export function encodeFrameFile(dim: number, frames: Float32Array[]): Buffer {
  if (frames.length < 1) throw new Error('frame file needs at least one frame');
  const buf = Buffer.alloc(HEADER_BYTES + 4 * dim * frames.length);
  buf.write(MAGIC, 0, 'ascii');
  buf.writeUInt32LE(VERSION, 4);
  buf.writeUInt32LE(dim, 8);
  buf.writeBigUInt64LE(BigInt(frames.length), 12);
  let pos = HEADER_BYTES;
  for (const frame of frames) {
    if (frame.length !== dim) {
      throw new Error(`frame width ${frame.length} does not match dim ${dim}`);
    }
    for (let i = 0; i < dim; i++) {
      if (!Number.isFinite(frame[i])) throw new Error('non-finite frame value');
      buf.writeFloatLE(frame[i], pos);
      pos += 4;
    }
  }
  return buf;
}

export function decodeFrameFile(buf: Buffer): { dim: number; frames: Float32Array[] } {
  if (buf.length < HEADER_BYTES) throw new Error('truncated frame file');
  if (buf.toString('ascii', 0, 4) !== MAGIC) throw new Error('bad magic');
  const version = buf.readUInt32LE(4);
  if (version !== VERSION) throw new Error(`unsupported version ${version}`);
  const dim = buf.readUInt32LE(8);
  const count = Number(buf.readBigUInt64LE(12));
  if (buf.length !== HEADER_BYTES + 4 * dim * count) throw new Error('truncated payload');
  const frames: Float32Array[] = [];
  let pos = HEADER_BYTES;
  for (let f = 0; f < count; f++) {
    const frame = new Float32Array(dim);
    for (let i = 0; i < dim; i++) {
      frame[i] = buf.readFloatLE(pos);
      pos += 4;
    }
    frames.push(frame);
  }
  return { dim, frames };
}

export interface SongEntry {
  id: string;
  file: string;
}

export function writeSetJson(dir: string, model: ModelInfo, variant: string, songs: SongEntry[]): void {
  const payload = {
    model: {
      name: variant,
      input_channels: model.inputChannels,
      sample_rate_hz: model.sampleRateHz,
      dim: model.dim,
      context_sec: model.contextSec === null ? 'unbounded' : model.contextSec,
      hop_sec: model.hopSec,
    },
    songs: [...songs].sort((a, b) => (a.id < b.id ? -1 : a.id > b.id ? 1 : 0)),
  };
  fs.writeFileSync(path.join(dir, 'set.json'), JSON.stringify(payload, null, 2) + '\n');
}

export function songFilename(songId: string): string {
  return songId.replace(/[^A-Za-z0-9._-]/g, '_') + '.fade';
}
