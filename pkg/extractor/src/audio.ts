/**
 * Channel policy and resampling ahead of embedding extraction.
 *
 * Mono models get a channel average; stereo models get stereo as-is or
 * duplicated mono. Resampling is linear interpolation: adequate for the
 * bundled spectral featurizer, and deterministic.
 */
import { AudioClip, clipLength } from './wav';

export function mixToChannels(clip: AudioClip, target: 1 | 2): AudioClip {
  const n = clipLength(clip);
  if (clip.channels.length === target) return clip;
  if (target === 1) {
    const mono = new Float32Array(n);
    for (const ch of clip.channels) {
      for (let i = 0; i < n; i++) mono[i] += ch[i] / clip.channels.length;
    }
    return { sampleRate: clip.sampleRate, channels: [mono] };
  }
  if (clip.channels.length === 1) {
    return { sampleRate: clip.sampleRate, channels: [clip.channels[0], clip.channels[0].slice()] };
  }
  // >2 channels down to stereo: average into two halves
  const left = new Float32Array(n);
  const right = new Float32Array(n);
  const half = Math.ceil(clip.channels.length / 2);
  for (let c = 0; c < clip.channels.length; c++) {
    const dst = c < half ? left : right;
    const scale = c < half ? half : clip.channels.length - half;
    for (let i = 0; i < n; i++) dst[i] += clip.channels[c][i] / scale;
  }
  return { sampleRate: clip.sampleRate, channels: [left, right] };
}

export function resampleChannel(samples: Float32Array, srcRate: number, dstRate: number): Float32Array {
  if (srcRate < 1 || dstRate < 1) {
    throw new Error(`resample failure: invalid rates ${srcRate} -> ${dstRate}`);
  }
  if (srcRate === dstRate) return samples;
  if (samples.length === 0) return new Float32Array(0);
  const ratio = srcRate / dstRate;
  const outLen = Math.max(1, Math.floor((samples.length - 1) / ratio) + 1);
  const out = new Float32Array(outLen);
  for (let i = 0; i < outLen; i++) {
    const pos = i * ratio;
    const lo = Math.floor(pos);
    const hi = Math.min(lo + 1, samples.length - 1);
    const frac = pos - lo;
    out[i] = samples[lo] * (1 - frac) + samples[hi] * frac;
  }
  return out;
}

export function resampleClip(clip: AudioClip, dstRate: number): AudioClip {
  return {
    sampleRate: dstRate,
    channels: clip.channels.map((ch) => resampleChannel(ch, clip.sampleRate, dstRate)),
  };
}
