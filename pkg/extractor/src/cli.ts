#!/usr/bin/env node
/**
 * fadkit-extract --model NAME [--layer n] --in DIR --out DIR
 *                [--effect NAME --params JSON] [--backend dsp|neural]
 *                [--weights DIR]
 *
 * Reads every .wav under --in (sorted), emits one frame file per clip plus
 * set.json under --out.
 */
import * as fs from 'fs';
import * as path from 'path';

import { EFFECT_NAMES } from './effects';
import { extract } from './extract';
import { MODEL_REGISTRY } from './registry';

const ERROR_PREFIX = 'fadkit-extract-error:';

interface CliArgs {
  model?: string;
  layer?: number;
  inDir?: string;
  outDir?: string;
  effect?: string;
  params?: string;
  backend: string;
  weights?: string;
}

function parseArgs(argv: string[]): CliArgs {
  const args: CliArgs = { backend: 'dsp' };
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    const next = () => {
      if (i + 1 >= argv.length) throw new Error(`${flag} needs a value`);
      return argv[++i];
    };
    switch (flag) {
      case '--model': args.model = next(); break;
      case '--layer': args.layer = Number(next()); break;
      case '--in': args.inDir = next(); break;
      case '--out': args.outDir = next(); break;
      case '--effect': args.effect = next(); break;
      case '--params': args.params = next(); break;
      case '--backend': args.backend = next(); break;
      case '--weights': args.weights = next(); break;
      case '--help':
      case '-h':
        usage();
        process.exit(0);
        break;
      default:
        throw new Error(`unknown flag ${flag}`);
    }
  }
  return args;
}

function usage(): void {
  process.stdout.write(
    'usage: fadkit-extract --model NAME [--layer n] --in DIR --out DIR\n' +
      '                      [--effect NAME --params JSON] [--backend dsp|neural] [--weights DIR]\n' +
      `models: ${Object.keys(MODEL_REGISTRY).sort().join(', ')}\n` +
      `effects: ${EFFECT_NAMES.join(', ')}\n`
  );
}

export function main(argv: string[]): number {
  try {
    const args = parseArgs(argv);
    if (!args.model || !args.inDir || !args.outDir) {
      throw new Error('--model, --in, and --out are required (see --help)');
    }
    if (!fs.existsSync(args.inDir) || !fs.statSync(args.inDir).isDirectory()) {
      throw new Error(`input directory not found: ${args.inDir}`);
    }
    const inputs = fs
      .readdirSync(args.inDir)
      .filter((f) => f.toLowerCase().endsWith('.wav'))
      .sort()
      .map((f) => path.join(args.inDir as string, f));
    if (inputs.length === 0) throw new Error(`no .wav files in ${args.inDir}`);
    let effectParams;
    if (args.params !== undefined) {
      if (!args.effect) throw new Error('--params needs --effect');
      try {
        effectParams = JSON.parse(args.params);
      } catch (exc) {
        throw new Error(`--params is not valid JSON: ${(exc as Error).message}`);
      }
    }
    const result = extract({
      model: args.model,
      layer: args.layer,
      inputs,
      outDir: args.outDir,
      effect: args.effect,
      effectParams,
      backend: args.backend,
      backendOptions: { weightsDir: args.weights },
    });
    const total = result.songs.reduce((acc, s) => acc + s.frames, 0);
    process.stdout.write(
      `fadkit-extract: ${result.songs.length} songs, ${total} frames ` +
        `(${result.variant}) -> ${result.outDir}\n`
    );
    return 0;
  } catch (exc) {
    process.stderr.write(`${ERROR_PREFIX} ${(exc as Error).message}\n`);
    return 1;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
