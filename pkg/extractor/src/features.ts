/**
 * Embedding backends.
 *
 * The built-in "dsp" backend is a deterministic spectral projection: each
 * window is mean-pooled to a fixed FFT length, transformed, reduced to
 * log band energies, and projected to the model's embedding size through a
 * fixed matrix seeded from the model variant name. It needs no weights and
 * produces registry-shaped output, which makes it the default for offline
 * use and testing. It is a stand-in, not a reimplementation of any
 * pretrained model.
 *
 * The "neural" backend is the integration seam for real pretrained models:
 * it resolves weights from a local directory (weights are fetched and
 * cached outside the repo, never vendored) and fails with "missing
 * weights" when they are absent. Runtimes register themselves via
 * `registerBackend`.
 */
import * as fs from 'fs';
import * as path from 'path';

import { ModelInfo } from './registry';

export interface EmbeddingBackend {
  /** Embed one window of mono samples into a `model.dim` vector. */
  embedWindow(samples: Float32Array, model: ModelInfo, variant: string): Float32Array;
}

const FFT_SIZE = 2048;
const BANDS = 64;

function fnv1a(text: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 0x01000193) >>> 0;
  }
  return h >>> 0;
}

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

/** Iterative radix-2 FFT, in place over re/im. */
function fft(re: Float64Array, im: Float64Array): void {
  const n = re.length;
  for (let i = 1, j = 0; i < n; i++) {
    let bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      [re[i], re[j]] = [re[j], re[i]];
      [im[i], im[j]] = [im[j], im[i]];
    }
  }
  for (let len = 2; len <= n; len <<= 1) {
    const angle = (-2 * Math.PI) / len;
    const wRe = Math.cos(angle);
    const wIm = Math.sin(angle);
    for (let i = 0; i < n; i += len) {
      let curRe = 1;
      let curIm = 0;
      for (let k = 0; k < len / 2; k++) {
        const uRe = re[i + k];
        const uIm = im[i + k];
        const vRe = re[i + k + len / 2] * curRe - im[i + k + len / 2] * curIm;
        const vIm = re[i + k + len / 2] * curIm + im[i + k + len / 2] * curRe;
        re[i + k] = uRe + vRe;
        im[i + k] = uIm + vIm;
        re[i + k + len / 2] = uRe - vRe;
        im[i + k + len / 2] = uIm - vIm;
        const nextRe = curRe * wRe - curIm * wIm;
        curIm = curRe * wIm + curIm * wRe;
        curRe = nextRe;
      }
    }
  }
}

function bandEnergies(samples: Float32Array): Float64Array {
  // mean-pool (or zero-pad) the window onto the fixed FFT grid
  const re = new Float64Array(FFT_SIZE);
  const im = new Float64Array(FFT_SIZE);
  if (samples.length >= FFT_SIZE) {
    const stride = samples.length / FFT_SIZE;
    for (let i = 0; i < FFT_SIZE; i++) {
      const lo = Math.floor(i * stride);
      const hi = Math.max(lo + 1, Math.floor((i + 1) * stride));
      let acc = 0;
      for (let j = lo; j < hi && j < samples.length; j++) acc += samples[j];
      re[i] = acc / (hi - lo);
    }
  } else {
    for (let i = 0; i < samples.length; i++) re[i] = samples[i];
  }
  // Hann taper reduces leakage between bands
  for (let i = 0; i < FFT_SIZE; i++) {
    re[i] *= 0.5 - 0.5 * Math.cos((2 * Math.PI * i) / (FFT_SIZE - 1));
  }
  fft(re, im);
  const bins = FFT_SIZE / 2;
  const perBand = bins / BANDS;
  const bands = new Float64Array(BANDS);
  for (let b = 0; b < BANDS; b++) {
    let acc = 0;
    for (let k = b * perBand; k < (b + 1) * perBand; k++) {
      acc += re[k] * re[k] + im[k] * im[k];
    }
    bands[b] = Math.log1p(acc / perBand);
  }
  return bands;
}

export class SpectralProjectionBackend implements EmbeddingBackend {
  private projections = new Map<string, Float64Array>();

  private projection(dim: number, variant: string): Float64Array {
    const key = `${variant}:${dim}`;
    let p = this.projections.get(key);
    if (!p) {
      const rand = mulberry32(fnv1a(`fadkit:${key}`));
      p = new Float64Array(dim * BANDS);
      for (let i = 0; i < p.length; i++) {
        // approximate standard normal from 4 uniforms
        p[i] = (rand() + rand() + rand() + rand() - 2) * Math.sqrt(3);
      }
      this.projections.set(key, p);
    }
    return p;
  }

  embedWindow(samples: Float32Array, model: ModelInfo, variant: string): Float32Array {
    const bands = bandEnergies(samples);
    const proj = this.projection(model.dim, variant);
    const out = new Float32Array(model.dim);
    for (let d = 0; d < model.dim; d++) {
      let acc = 0;
      const row = d * BANDS;
      for (let b = 0; b < BANDS; b++) acc += proj[row + b] * bands[b];
      out[d] = acc / Math.sqrt(BANDS);
    }
    return out;
  }
}

export type BackendFactory = (model: ModelInfo, options: BackendOptions) => EmbeddingBackend;

export interface BackendOptions {
  weightsDir?: string;
}

const backends = new Map<string, BackendFactory>();

export function registerBackend(name: string, factory: BackendFactory): void {
  backends.set(name, factory);
}

registerBackend('dsp', () => new SpectralProjectionBackend());

registerBackend('neural', (model, options) => {
  const dir = options.weightsDir ?? process.env.FADKIT_WEIGHTS_DIR;
  if (!dir) {
    throw new Error(`missing weights for model "${model.name}": no weights directory given (--weights or FADKIT_WEIGHTS_DIR)`);
  }
  const expected = path.join(dir, `${model.key}.onnx`);
  if (!fs.existsSync(expected)) {
    throw new Error(`missing weights for model "${model.name}": expected ${expected}`);
  }
  throw new Error(
    `no runtime registered for "${model.name}" weights; plug one in with registerBackend()`
  );
});

export function resolveBackend(name: string, model: ModelInfo, options: BackendOptions = {}): EmbeddingBackend {
  const factory = backends.get(name);
  if (!factory) {
    throw new Error(`unknown backend "${name}"; registered: ${[...backends.keys()].sort().join(', ')}`);
  }
  return factory(model, options);
}
