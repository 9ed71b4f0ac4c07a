/**
 * Extraction pipeline: audio file -> (optional degradation) -> channel
 * policy -> resample to the model rate -> context/hop windows -> embedding
 * frames -> one frame file per song plus set metadata.
 */
import * as fs from 'fs';
import * as path from 'path';

import { mixToChannels, resampleClip } from './audio';
import { degrade, EffectName, EffectParams } from './effects';
import { BackendOptions, EmbeddingBackend, resolveBackend } from './features';
import { encodeFrameFile, songFilename, writeSetJson, SongEntry } from './frameset';
import { frameWindows } from './framing';
import { getModel, variantName } from './registry';
import { AudioClip, clipLength, decodeWav } from './wav';

export interface ExtractorSpec {
  model: string;
  layer?: number;
  inputs: string[];
  outDir: string;
  effect?: EffectName | string;
  effectParams?: EffectParams;
  backend?: string;
  backendOptions?: BackendOptions;
}

export interface ExtractResult {
  outDir: string;
  variant: string;
  songs: { id: string; file: string; frames: number }[];
}

function monoMix(clip: AudioClip): Float32Array {
  if (clip.channels.length === 1) return clip.channels[0];
  const n = clipLength(clip);
  const mono = new Float32Array(n);
  for (const ch of clip.channels) {
    for (let i = 0; i < n; i++) mono[i] += ch[i] / clip.channels.length;
  }
  return mono;
}

export function extractClip(
  clip: AudioClip,
  modelKey: string,
  backend: EmbeddingBackend,
  variant: string,
  effect?: EffectName | string,
  effectParams?: EffectParams
): Float32Array[] {
  const model = getModel(modelKey);
  if (clipLength(clip) < 1) throw new Error('zero-length audio');
  let audio = clip;
  if (effect) audio = degrade(audio, effect, effectParams);
  audio = mixToChannels(audio, model.inputChannels);
  audio = resampleClip(audio, model.sampleRateHz);
  const samples = monoMix(audio); // features run on the mono mix post-policy
  const frames: Float32Array[] = [];
  for (const win of frameWindows(samples.length, model)) {
    const slice = new Float32Array(win.length);
    const available = Math.min(win.length, samples.length - win.start);
    slice.set(samples.subarray(win.start, win.start + available));
    frames.push(backend.embedWindow(slice, model, variant));
  }
  return frames;
}

export function extract(spec: ExtractorSpec): ExtractResult {
  const model = getModel(spec.model);
  const variant = variantName(model, spec.layer);
  if (spec.inputs.length === 0) throw new Error('no input audio files');
  const backend = resolveBackend(spec.backend ?? 'dsp', model, spec.backendOptions ?? {});

  fs.mkdirSync(spec.outDir, { recursive: true });
  const entries: SongEntry[] = [];
  const songs: ExtractResult['songs'] = [];
  const seen = new Set<string>();
  for (const input of [...spec.inputs].sort()) {
    const songId = path.basename(input).replace(/\.[^.]+$/, '');
    if (seen.has(songId)) throw new Error(`duplicate song id "${songId}" from ${input}`);
    seen.add(songId);
    const clip = decodeWav(fs.readFileSync(input));
    const frames = extractClip(clip, spec.model, backend, variant, spec.effect, spec.effectParams);
    const file = songFilename(songId);
    fs.writeFileSync(path.join(spec.outDir, file), encodeFrameFile(model.dim, frames));
    entries.push({ id: songId, file });
    songs.push({ id: songId, file, frames: frames.length });
  }
  writeSetJson(spec.outDir, model, variant, entries);
  return { outDir: spec.outDir, variant, songs };
}
