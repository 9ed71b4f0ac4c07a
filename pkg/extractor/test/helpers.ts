import { AudioClip } from '../src/wav';

function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Deterministic fixture: two sines plus broadband noise. */
export function makeClip(
  durationSec: number,
  sampleRate: number,
  channels = 1,
  seed = 1
): AudioClip {
  const n = Math.round(durationSec * sampleRate);
  const out: Float32Array[] = [];
  for (let c = 0; c < channels; c++) {
    const rand = mulberry32(seed + 1000 * c);
    const ch = new Float32Array(n);
    for (let i = 0; i < n; i++) {
      const t = i / sampleRate;
      ch[i] =
        0.4 * Math.sin(2 * Math.PI * 220 * t) +
        0.2 * Math.sin(2 * Math.PI * 2800 * t + c) +
        0.1 * (rand() * 2 - 1);
    }
    out.push(ch);
  }
  return { sampleRate, channels: out };
}
