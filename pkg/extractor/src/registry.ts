/**
 * Embedding model registry: identity and framing geometry per model.
 *
 * `contextSec: null` marks a model without a fixed context window (the
 * encoder sees the whole clip; frames are emitted at the hop rate).
 */

export interface ModelInfo {
  key: string;
  name: string;
  inputChannels: 1 | 2;
  sampleRateHz: number;
  dim: number;
  contextSec: number | null;
  hopSec: number;
}

export const MODEL_REGISTRY: Record<string, ModelInfo> = {
  vggish: { key: 'vggish', name: 'VGGish', inputChannels: 1, sampleRateHz: 16000, dim: 128, contextSec: 0.96, hopSec: 0.96 },
  clap: { key: 'clap', name: 'CLAP', inputChannels: 1, sampleRateHz: 44100, dim: 1024, contextSec: 7.0, hopSec: 1.0 },
  'l-clap': { key: 'l-clap', name: 'L-CLAP', inputChannels: 1, sampleRateHz: 48000, dim: 512, contextSec: 10.0, hopSec: 1.0 },
  mert: { key: 'mert', name: 'MERT', inputChannels: 1, sampleRateHz: 24000, dim: 768, contextSec: 5.0, hopSec: 0.013 },
  cdpam: { key: 'cdpam', name: 'CDPAM', inputChannels: 1, sampleRateHz: 22050, dim: 512, contextSec: 5.0, hopSec: 1.0 },
  encodec: { key: 'encodec', name: 'EnCodec', inputChannels: 1, sampleRateHz: 24000, dim: 128, contextSec: null, hopSec: 0.013 },
  'encodec-48k': { key: 'encodec-48k', name: 'EnCodec 48k', inputChannels: 2, sampleRateHz: 48000, dim: 128, contextSec: 1.0, hopSec: 0.99 },
  dac: { key: 'dac', name: 'DAC', inputChannels: 2, sampleRateHz: 44100, dim: 1024, contextSec: 5.0, hopSec: 0.012 },
};

export function getModel(key: string): ModelInfo {
  const model = MODEL_REGISTRY[key];
  if (!model) {
    throw new Error(`unknown model "${key}"; known: ${Object.keys(MODEL_REGISTRY).sort().join(', ')}`);
  }
  return model;
}

/** Display name with an optional per-layer variant tag (MERT only). */
export function variantName(model: ModelInfo, layer?: number): string {
  if (layer === undefined) return model.name;
  if (model.key !== 'mert') {
    throw new Error(`--layer only applies to mert, not "${model.key}"`);
  }
  if (!Number.isInteger(layer) || layer < 0) {
    throw new Error(`layer must be a non-negative integer, got ${layer}`);
  }
  return `${model.name} L${layer}`;
}
