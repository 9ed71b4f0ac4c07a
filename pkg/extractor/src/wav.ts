/**
 * Minimal RIFF/WAVE codec: 16-bit PCM and 32-bit IEEE float, any channel
 * count. Enough for fixture generation and the degradation pipeline.
 */

export interface AudioClip {
  sampleRate: number;
  /** one Float32Array per channel, equal lengths, samples in [-1, 1]-ish */
  channels: Float32Array[];
}

export function clipLength(clip: AudioClip): number {
  return clip.channels.length === 0 ? 0 : clip.channels[0].length;
}

export function decodeWav(buf: Buffer): AudioClip {
  if (buf.length < 12 || buf.toString('ascii', 0, 4) !== 'RIFF' || buf.toString('ascii', 8, 12) !== 'WAVE') {
    throw new Error('not a RIFF/WAVE file');
  }
  let offset = 12;
  let format: number | null = null;
  let channels = 0;
  let sampleRate = 0;
  let bitsPerSample = 0;
  let data: Buffer | null = null;
  while (offset + 8 <= buf.length) {
    const id = buf.toString('ascii', offset, offset + 4);
    const size = buf.readUInt32LE(offset + 4);
    const body = offset + 8;
    if (body + size > buf.length) {
      throw new Error(`truncated chunk "${id}"`);
    }
    if (id === 'fmt ') {
      format = buf.readUInt16LE(body);
      channels = buf.readUInt16LE(body + 2);
      sampleRate = buf.readUInt32LE(body + 4);
      bitsPerSample = buf.readUInt16LE(body + 14);
      if (format === 0xfffe && size >= 40) {
        // WAVE_FORMAT_EXTENSIBLE: subformat GUID starts with the format tag
        format = buf.readUInt16LE(body + 24);
      }
    } else if (id === 'data') {
      data = buf.subarray(body, body + size);
    }
    offset = body + size + (size % 2); // chunks are word-aligned
  }
  if (format === null || data === null) throw new Error('missing fmt/data chunk');
  if (channels < 1 || sampleRate < 1) throw new Error('malformed fmt chunk');

  let samples: Float32Array;
  if (format === 1 && bitsPerSample === 16) {
    const n = Math.floor(data.length / 2);
    samples = new Float32Array(n);
    for (let i = 0; i < n; i++) samples[i] = data.readInt16LE(2 * i) / 32768;
  } else if (format === 3 && bitsPerSample === 32) {
    const n = Math.floor(data.length / 4);
    samples = new Float32Array(n);
    for (let i = 0; i < n; i++) samples[i] = data.readFloatLE(4 * i);
  } else {
    throw new Error(`unsupported WAV encoding: format=${format}, bits=${bitsPerSample}`);
  }

  const perChannel = Math.floor(samples.length / channels);
  const out: Float32Array[] = [];
  for (let c = 0; c < channels; c++) {
    const ch = new Float32Array(perChannel);
    for (let i = 0; i < perChannel; i++) ch[i] = samples[i * channels + c];
    out.push(ch);
  }
  return { sampleRate, channels: out };
}

/** Encode as 32-bit float WAV (format tag 3). */
export function encodeWav(clip: AudioClip): Buffer {
  const channels = clip.channels.length;
  if (channels < 1) throw new Error('cannot encode a clip with no channels');
  const n = clipLength(clip);
  const dataBytes = n * channels * 4;
  const buf = Buffer.alloc(44 + dataBytes);
  buf.write('RIFF', 0, 'ascii');
  buf.writeUInt32LE(36 + dataBytes, 4);
  buf.write('WAVE', 8, 'ascii');
  buf.write('fmt ', 12, 'ascii');
  buf.writeUInt32LE(16, 16);
  buf.writeUInt16LE(3, 20); // IEEE float
  buf.writeUInt16LE(channels, 22);
  buf.writeUInt32LE(clip.sampleRate, 24);
  buf.writeUInt32LE(clip.sampleRate * channels * 4, 28);
  buf.writeUInt16LE(channels * 4, 32);
  buf.writeUInt16LE(32, 34);
  buf.write('data', 36, 'ascii');
  buf.writeUInt32LE(dataBytes, 40);
  let pos = 44;
  for (let i = 0; i < n; i++) {
    for (let c = 0; c < channels; c++) {
      buf.writeFloatLE(clip.channels[c][i], pos);
      pos += 4;
    }
  }
  return buf;
}
