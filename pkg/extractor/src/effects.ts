/**
 * The five audio degradations: distortion, low-pass filtering,
 * reverberation, pitch down, pitch up.
 *
 * Default parameter values are placeholders for calibration, not measured
 * constants. Pitch shifting changes the clip length; the other effects
 * preserve it. A 0-semitone pitch shift and a low-pass at or above Nyquist
 * are exact passthroughs.
 */
import { AudioClip, clipLength } from './wav';

export const EFFECT_NAMES = ['distortion', 'lowpass', 'reverb', 'pitch_down', 'pitch_up'] as const;
export type EffectName = (typeof EFFECT_NAMES)[number];

export interface EffectParams {
  driveDb?: number; // distortion
  cutoffHz?: number; // lowpass
  roomSize?: number; // reverb, 0..1
  wet?: number; // reverb, 0..1
  semitones?: number; // pitch_down / pitch_up magnitude
}

export function degrade(clip: AudioClip, effect: EffectName | string, params: EffectParams = {}): AudioClip {
  switch (effect) {
    case 'distortion':
      return mapChannels(clip, (ch) => distort(ch, params.driveDb ?? 25));
    case 'lowpass':
      return lowpass(clip, params.cutoffHz ?? 3500);
    case 'reverb':
      return mapChannels(clip, (ch) => reverb(ch, clip.sampleRate, params.roomSize ?? 0.5, params.wet ?? 0.33));
    case 'pitch_down':
      return pitchShift(clip, -(params.semitones ?? 4));
    case 'pitch_up':
      return pitchShift(clip, params.semitones ?? 4);
    default:
      throw new Error(`unknown effect "${effect}"; known: ${EFFECT_NAMES.join(', ')}`);
  }
}

function mapChannels(clip: AudioClip, fn: (ch: Float32Array) => Float32Array): AudioClip {
  return { sampleRate: clip.sampleRate, channels: clip.channels.map(fn) };
}

function distort(samples: Float32Array, driveDb: number): Float32Array {
  const gain = Math.pow(10, driveDb / 20);
  const out = new Float32Array(samples.length);
  for (let i = 0; i < samples.length; i++) out[i] = Math.tanh(gain * samples[i]);
  return out;
}

function lowpass(clip: AudioClip, cutoffHz: number): AudioClip {
  const nyquist = clip.sampleRate / 2;
  if (cutoffHz <= 0) throw new Error(`lowpass cutoff must be positive, got ${cutoffHz}`);
  if (cutoffHz >= nyquist) {
    return mapChannels(clip, (ch) => ch.slice());
  }
  // RBJ biquad, Butterworth Q = 1/sqrt(2): alpha = sin(w0)/(2Q)
  const w0 = (2 * Math.PI * cutoffHz) / clip.sampleRate;
  const alpha = Math.sin(w0) * Math.SQRT1_2;
  const cosW0 = Math.cos(w0);
  const b0 = (1 - cosW0) / 2;
  const b1 = 1 - cosW0;
  const b2 = (1 - cosW0) / 2;
  const a0 = 1 + alpha;
  const a1 = -2 * cosW0;
  const a2 = 1 - alpha;
  return mapChannels(clip, (ch) => {
    const out = new Float32Array(ch.length);
    let x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (let i = 0; i < ch.length; i++) {
      const x0 = ch[i];
      const y0 = (b0 * x0 + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2) / a0;
      out[i] = y0;
      x2 = x1; x1 = x0; y2 = y1; y1 = y0;
    }
    return out;
  });
}

// classic Schroeder network: four parallel feedback combs, two allpasses
const COMB_DELAYS_MS = [29.7, 37.1, 41.1, 43.7];
const ALLPASS_DELAYS_MS = [5.0, 1.7];

function reverb(samples: Float32Array, sampleRate: number, roomSize: number, wet: number): Float32Array {
  const room = Math.min(1, Math.max(0, roomSize));
  const mix = Math.min(1, Math.max(0, wet));
  const feedback = 0.6 + 0.28 * room;
  let acc = new Float32Array(samples.length);
  for (const delayMs of COMB_DELAYS_MS) {
    const delay = Math.max(1, Math.round((delayMs * (0.5 + room)) * sampleRate / 1000));
    const buf = new Float32Array(delay);
    let pos = 0;
    for (let i = 0; i < samples.length; i++) {
      const echoed = buf[pos];
      buf[pos] = samples[i] + echoed * feedback;
      acc[i] += echoed / COMB_DELAYS_MS.length;
      pos = (pos + 1) % delay;
    }
  }
  for (const delayMs of ALLPASS_DELAYS_MS) {
    const delay = Math.max(1, Math.round((delayMs * sampleRate) / 1000));
    const buf = new Float32Array(delay);
    let pos = 0;
    const g = 0.5;
    const next = new Float32Array(acc.length);
    for (let i = 0; i < acc.length; i++) {
      const delayed = buf[pos];
      const y = -g * acc[i] + delayed;
      buf[pos] = acc[i] + g * y;
      next[i] = y;
      pos = (pos + 1) % delay;
    }
    acc = next;
  }
  const out = new Float32Array(samples.length);
  for (let i = 0; i < samples.length; i++) out[i] = (1 - mix) * samples[i] + mix * acc[i];
  return out;
}

function pitchShift(clip: AudioClip, semitones: number): AudioClip {
  // playback-rate shift: duration changes by the inverse pitch ratio
  const rate = Math.pow(2, semitones / 12);
  if (rate === 1) return mapChannels(clip, (ch) => ch.slice());
  const n = clipLength(clip);
  const outLen = Math.max(1, Math.floor((n - 1) / rate) + 1);
  return mapChannels(clip, (ch) => {
    const out = new Float32Array(outLen);
    for (let i = 0; i < outLen; i++) {
      const pos = i * rate;
      const lo = Math.floor(pos);
      const hi = Math.min(lo + 1, n - 1);
      const frac = pos - lo;
      out[i] = ch[lo] * (1 - frac) + ch[hi] * frac;
    }
    return out;
  });
}
