/**
 * Context/hop window slicing.
 *
 * Finite-context models emit floor((n - window) / hop) + 1 windows; clips
 * shorter than one context window yield a single zero-padded window (the
 * frame-file format requires at least one frame). Models without a fixed
 * context emit one hop-sized window per hop over the whole clip.
 */
import { ModelInfo } from './registry';

export interface Window {
  start: number;
  length: number; // may extend past the clip; consumers zero-pad
}

export function frameWindows(nSamples: number, model: ModelInfo): Window[] {
  if (nSamples < 1) throw new Error('zero-length audio');
  const hop = Math.max(1, Math.round(model.hopSec * model.sampleRateHz));
  if (model.contextSec === null) {
    const count = Math.max(1, Math.floor(nSamples / hop));
    const out: Window[] = [];
    for (let i = 0; i < count; i++) out.push({ start: i * hop, length: hop });
    return out;
  }
  const window = Math.max(1, Math.round(model.contextSec * model.sampleRateHz));
  if (nSamples < window) {
    return [{ start: 0, length: window }];
  }
  const count = Math.floor((nSamples - window) / hop) + 1;
  const out: Window[] = [];
  for (let i = 0; i < count; i++) out.push({ start: i * hop, length: window });
  return out;
}

/** Frame count predicted from a duration in seconds (test arithmetic). */
export function expectedFrameCount(durationSec: number, model: ModelInfo): number {
  if (model.contextSec === null) {
    return Math.max(1, Math.floor(durationSec / model.hopSec));
  }
  if (durationSec < model.contextSec) return 1;
  return Math.floor((durationSec - model.contextSec) / model.hopSec) + 1;
}
