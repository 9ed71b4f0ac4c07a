import { spawnSync } from 'child_process';
import * as fs from 'fs';
import * as os from 'os';
import * as path from 'path';

import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { EFFECT_NAMES } from '../src/effects';
import { extract } from '../src/extract';
import { decodeFrameFile } from '../src/frameset';
import { expectedFrameCount } from '../src/framing';
import { getModel } from '../src/registry';
import { encodeWav } from '../src/wav';
import { makeClip } from './helpers';

let workDir: string;

function writeClips(dir: string, specs: { name: string; durationSec: number; rate: number; channels?: number }[]): string {
  fs.mkdirSync(dir, { recursive: true });
  for (const spec of specs) {
    const clip = makeClip(spec.durationSec, spec.rate, spec.channels ?? 1, spec.name.length);
    fs.writeFileSync(path.join(dir, `${spec.name}.wav`), encodeWav(clip));
  }
  return dir;
}

beforeAll(() => {
  workDir = fs.mkdtempSync(path.join(os.tmpdir(), 'fadkit-extract-'));
});

afterAll(() => {
  fs.rmSync(workDir, { recursive: true, force: true });
});

describe('extract', () => {
  it('vggish 10s clip yields ~10 frames of dim 128 and valid set metadata', () => {
    const inDir = writeClips(path.join(workDir, 'in-vggish'), [
      { name: 'clip10s', durationSec: 10, rate: 32000 },
    ]);
    const outDir = path.join(workDir, 'out-vggish');
    const result = extract({ model: 'vggish', inputs: [path.join(inDir, 'clip10s.wav')], outDir });
    expect(result.songs.length).toBe(1);
    expect(Math.abs(result.songs[0].frames - 10)).toBeLessThanOrEqual(1);
    const decoded = decodeFrameFile(fs.readFileSync(path.join(outDir, result.songs[0].file)));
    expect(decoded.dim).toBe(128);
    const meta = JSON.parse(fs.readFileSync(path.join(outDir, 'set.json'), 'utf-8'));
    expect(meta.model.name).toBe('VGGish');
    expect(meta.model.hop_sec).toBeCloseTo(0.96);
    expect(meta.songs.length).toBe(1);
  });

  it('frame counts match hop/context arithmetic within one frame across models', () => {
    const durations: Record<string, number> = {
      clap: 8.0,
      mert: 5.5,
      encodec: 2.0,
      'encodec-48k': 3.0,
      dac: 5.2,
    };
    for (const [key, durationSec] of Object.entries(durations)) {
      const model = getModel(key);
      const inDir = writeClips(path.join(workDir, `in-${key}`), [
        { name: 'clip', durationSec, rate: model.sampleRateHz, channels: model.inputChannels },
      ]);
      const outDir = path.join(workDir, `out-${key}`);
      const result = extract({ model: key, inputs: [path.join(inDir, 'clip.wav')], outDir });
      const want = expectedFrameCount(durationSec, model);
      expect(
        Math.abs(result.songs[0].frames - want),
        `${key}: got ${result.songs[0].frames}, want ${want}`
      ).toBeLessThanOrEqual(1);
      const decoded = decodeFrameFile(fs.readFileSync(path.join(outDir, result.songs[0].file)));
      expect(decoded.dim).toBe(model.dim);
    }
  });

  it('unbounded-context metadata round-trips as "unbounded"', () => {
    const inDir = writeClips(path.join(workDir, 'in-unbounded'), [
      { name: 'clip', durationSec: 1.0, rate: 24000 },
    ]);
    const outDir = path.join(workDir, 'out-unbounded');
    extract({ model: 'encodec', inputs: [path.join(inDir, 'clip.wav')], outDir });
    const meta = JSON.parse(fs.readFileSync(path.join(outDir, 'set.json'), 'utf-8'));
    expect(meta.model.context_sec).toBe('unbounded');
  });

  it('zero-length audio is rejected', () => {
    const inDir = path.join(workDir, 'in-empty');
    fs.mkdirSync(inDir, { recursive: true });
    const silent = { sampleRate: 16000, channels: [new Float32Array(0)] };
    fs.writeFileSync(path.join(inDir, 'empty.wav'), encodeWav(silent));
    expect(() =>
      extract({ model: 'vggish', inputs: [path.join(inDir, 'empty.wav')], outDir: path.join(workDir, 'out-empty') })
    ).toThrow(/zero-length/);
  });

  it('same clip twice yields identical frame files', () => {
    const inDir = writeClips(path.join(workDir, 'in-det'), [
      { name: 'clip', durationSec: 2.0, rate: 16000 },
    ]);
    const out1 = path.join(workDir, 'out-det1');
    const out2 = path.join(workDir, 'out-det2');
    extract({ model: 'vggish', inputs: [path.join(inDir, 'clip.wav')], outDir: out1 });
    extract({ model: 'vggish', inputs: [path.join(inDir, 'clip.wav')], outDir: out2 });
    expect(fs.readFileSync(path.join(out1, 'clip.fade')).equals(fs.readFileSync(path.join(out2, 'clip.fade')))).toBe(true);
    expect(fs.readFileSync(path.join(out1, 'set.json'), 'utf-8')).toBe(fs.readFileSync(path.join(out2, 'set.json'), 'utf-8'));
  });

  it('layer variants are recorded in the metadata', () => {
    const inDir = writeClips(path.join(workDir, 'in-mert4'), [
      { name: 'clip', durationSec: 5.2, rate: 24000 },
    ]);
    const outDir = path.join(workDir, 'out-mert4');
    const result = extract({ model: 'mert', layer: 4, inputs: [path.join(inDir, 'clip.wav')], outDir });
    expect(result.variant).toBe('MERT L4');
    const meta = JSON.parse(fs.readFileSync(path.join(outDir, 'set.json'), 'utf-8'));
    expect(meta.model.name).toBe('MERT L4');
    expect(meta.model.dim).toBe(768);
  });

  it('produces the five degraded variants per input clip', () => {
    const inDir = writeClips(path.join(workDir, 'in-fx'), [
      { name: 'clip', durationSec: 2.0, rate: 16000 },
    ]);
    const cleanDir = path.join(workDir, 'out-fx-clean');
    extract({ model: 'vggish', inputs: [path.join(inDir, 'clip.wav')], outDir: cleanDir });
    const cleanBytes = fs.readFileSync(path.join(cleanDir, 'clip.fade'));
    for (const effect of EFFECT_NAMES) {
      const outDir = path.join(workDir, `out-fx-${effect}`);
      const result = extract({
        model: 'vggish',
        inputs: [path.join(inDir, 'clip.wav')],
        outDir,
        effect,
      });
      expect(result.songs.length).toBe(1);
      const bytes = fs.readFileSync(path.join(outDir, 'clip.fade'));
      expect(bytes.equals(cleanBytes), effect).toBe(false);
      const decoded = decodeFrameFile(bytes);
      expect(decoded.dim).toBe(128);
      expect(decoded.frames.length).toBeGreaterThanOrEqual(1);
    }
  });

  it('neural backend reports missing weights', () => {
    const inDir = writeClips(path.join(workDir, 'in-neural'), [
      { name: 'clip', durationSec: 1.0, rate: 16000 },
    ]);
    expect(() =>
      extract({
        model: 'vggish',
        inputs: [path.join(inDir, 'clip.wav')],
        outDir: path.join(workDir, 'out-neural'),
        backend: 'neural',
        backendOptions: { weightsDir: path.join(workDir, 'no-weights-here') },
      })
    ).toThrow(/missing weights/);
  });
});

describe('command line', () => {
  function cli(args: string[]) {
    const entry = path.join(__dirname, '..', 'dist', 'cli.js');
    return spawnSync('node', [entry, ...args], { encoding: 'utf-8' });
  }

  it('extracts a directory end to end', () => {
    const inDir = writeClips(path.join(workDir, 'in-cli'), [
      { name: 'one', durationSec: 3.0, rate: 16000 },
      { name: 'two', durationSec: 2.0, rate: 22050 },
    ]);
    const outDir = path.join(workDir, 'out-cli');
    const proc = cli(['--model', 'vggish', '--in', inDir, '--out', outDir]);
    expect(proc.status, proc.stderr).toBe(0);
    expect(proc.stdout).toContain('2 songs');
    expect(fs.existsSync(path.join(outDir, 'set.json'))).toBe(true);
    expect(fs.existsSync(path.join(outDir, 'one.fade'))).toBe(true);
  });

  it('applies an effect with JSON params', () => {
    const inDir = writeClips(path.join(workDir, 'in-cli-fx'), [
      { name: 'one', durationSec: 2.0, rate: 16000 },
    ]);
    const outDir = path.join(workDir, 'out-cli-fx');
    const proc = cli([
      '--model', 'vggish', '--in', inDir, '--out', outDir,
      '--effect', 'lowpass', '--params', '{"cutoffHz": 1200}',
    ]);
    expect(proc.status, proc.stderr).toBe(0);
  });

  it('reports errors on stderr with a stable prefix and nonzero exit', () => {
    const proc = cli(['--model', 'nope', '--in', workDir, '--out', path.join(workDir, 'x')]);
    expect(proc.status).toBe(1);
    expect(proc.stderr.startsWith('fadkit-extract-error:')).toBe(true);
    const usage = cli(['--model']);
    expect(usage.status).toBe(1);
    expect(usage.stderr).toContain('needs a value');
  });
});

describe('interop with the scoring toolkit', () => {
  function python(args: string[]) {
    return spawnSync('python3', ['-m', 'fadkit', ...args], { encoding: 'utf-8' });
  }

  it('extracted sets pass primary validation and score zero against themselves', () => {
    const probe = spawnSync('python3', ['-c', 'import fadkit'], { encoding: 'utf-8' });
    expect(probe.status, 'python3 with the fadkit package must be installed').toBe(0);

    const inDir = writeClips(path.join(workDir, 'in-interop'), [
      { name: 'alpha', durationSec: 6.0, rate: 32000 },
      { name: 'bravo', durationSec: 4.5, rate: 44100 },
      { name: 'charlie', durationSec: 8.2, rate: 16000 },
    ]);
    const outDir = path.join(workDir, 'out-interop');
    extract({
      model: 'vggish',
      inputs: fs.readdirSync(inDir).map((f) => path.join(inDir, f)),
      outDir,
    });

    const stats = python(['stats', outDir, '-o', path.join(workDir, 'interop.fads')]);
    expect(stats.stderr).toBe('');
    expect(stats.status).toBe(0);

    const score = python(['score', outDir, outDir, '--no-verify', '--format', 'json']);
    expect(score.status, score.stderr).toBe(0);
    const report = JSON.parse(score.stdout);
    expect(Math.abs(report.fad.value)).toBeLessThanOrEqual(1e-9);
  });
});
