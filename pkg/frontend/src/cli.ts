#!/usr/bin/env node
import * as fs from 'node:fs';
import * as path from 'node:path';
import { parseArgs, ParseArgsConfig } from 'node:util';
import { readCorpus } from './corpus.js';
import { writePredictions } from './exchange.js';
import {
  DEFAULT_CONFIG, FinetuneConfig, finetune, gridSearch, GRID_EPOCHS,
  GRID_LEARNING_RATES, loadCheckpoint, predictionsFor, saveCheckpoint,
} from './model.js';

const USAGE = `usage: register-harness <command> [options]

commands:
  train     fine-tune on a train corpus, select the best epoch on dev
  grid      learning-rate x epoch grid on dev, keep the best checkpoint
  predict   score a corpus with a saved checkpoint, write an exchange file

Flag names mirror the classifier toolkit where the meaning overlaps
(--train-corpus, --dev-corpus, --lang, --seed, --threshold, --out-dir, ...).
Evaluation of test data is not provided here on purpose; feed the prediction
file to the toolkit's evaluator.`;

type Values = Record<string, string | boolean | undefined>;

function parsed(argv: string[], extra: NonNullable<ParseArgsConfig['options']>): Values {
  const { values } = parseArgs({ args: argv, options: extra, allowPositionals: false });
  return values as Values;
}

function num(values: Values, name: string, fallback: number): number {
  const raw = values[name];
  if (raw === undefined) return fallback;
  const value = Number(raw);
  if (!Number.isFinite(value)) throw new Error(`--${name}: not a number: ${raw}`);
  return value;
}

function need(values: Values, name: string): string {
  const value = values[name];
  if (typeof value !== 'string') throw new Error(`--${name} is required`);
  return value;
}

function numList(raw: string, name: string): number[] {
  return raw.split(',').map((field) => {
    const value = Number(field.trim());
    if (!Number.isFinite(value)) throw new Error(`--${name}: not a number: ${field}`);
    return value;
  });
}

const TRAIN_OPTIONS: ParseArgsConfig['options'] = {
  'model': { type: 'string' },
  'train-corpus': { type: 'string' },
  'dev-corpus': { type: 'string' },
  'lang': { type: 'string' },
  'seed': { type: 'string' },
  'batch-size': { type: 'string' },
  'learning-rate': { type: 'string' },
  'epochs': { type: 'string' },
  'threshold': { type: 'string' },
  'max-len': { type: 'string' },
  'out-dir': { type: 'string' },
};

function configFrom(values: Values): FinetuneConfig {
  return {
    ...DEFAULT_CONFIG,
    model: need(values, 'model'),
    seed: num(values, 'seed', DEFAULT_CONFIG.seed),
    batchSize: num(values, 'batch-size', DEFAULT_CONFIG.batchSize),
    learningRate: num(values, 'learning-rate', DEFAULT_CONFIG.learningRate),
    epochs: num(values, 'epochs', DEFAULT_CONFIG.epochs),
    threshold: num(values, 'threshold', DEFAULT_CONFIG.threshold),
    maxLen: num(values, 'max-len', DEFAULT_CONFIG.maxLen),
  };
}

function loadSplit(values: Values) {
  const lang = need(values, 'lang');
  return {
    train: readCorpus(need(values, 'train-corpus'), lang),
    dev: readCorpus(need(values, 'dev-corpus'), lang),
  };
}

function cmdTrain(argv: string[]): number {
  const values = parsed(argv, TRAIN_OPTIONS!);
  const config = configFrom(values);
  const { train, dev } = loadSplit(values);
  const result = finetune(config, train, dev);
  console.log(`dev micro-F1: ${result.devMicroF1.toFixed(4)} (best epoch ${result.bestEpoch}/${config.epochs})`);
  const outDir = values['out-dir'];
  if (typeof outDir === 'string') {
    fs.mkdirSync(outDir, { recursive: true });
    saveCheckpoint(path.join(outDir, 'checkpoint.json'), result.checkpoint);
    const history = result.devHistory
      .map((f1, i) => `${i + 1}\t${f1.toFixed(6)}`)
      .join('\n');
    fs.writeFileSync(path.join(outDir, 'dev_history.tsv'), `epoch\tdev_f1\n${history}\n`, 'utf-8');
    console.log(`wrote ${outDir}`);
  }
  return 0;
}

function cmdGrid(argv: string[]): number {
  const values = parsed(argv, {
    ...TRAIN_OPTIONS,
    'grid-lrs': { type: 'string' },
    'grid-epochs': { type: 'string' },
  });
  const config = configFrom(values);
  const { train, dev } = loadSplit(values);
  const lrs = typeof values['grid-lrs'] === 'string'
    ? numList(values['grid-lrs'], 'grid-lrs') : [...GRID_LEARNING_RATES];
  const epochGrid = typeof values['grid-epochs'] === 'string'
    ? numList(values['grid-epochs'], 'grid-epochs') : [...GRID_EPOCHS];
  const result = gridSearch(config, train, dev, lrs, epochGrid);
  console.log(`best: lr=${result.best.learningRate} epochs=${result.best.epochs} ` +
    `dev micro-F1: ${result.best.devMicroF1.toFixed(4)}`);
  const outDir = values['out-dir'];
  if (typeof outDir === 'string') {
    fs.mkdirSync(outDir, { recursive: true });
    saveCheckpoint(path.join(outDir, 'checkpoint.json'), result.checkpoint);
    const rows = result.cells
      .map((c) => `${c.learningRate}\t${c.epochs}\t${c.devMicroF1.toFixed(6)}\t${c.bestEpoch}`)
      .join('\n');
    fs.writeFileSync(path.join(outDir, 'grid.tsv'),
      `learning_rate\tepochs\tdev_f1\tbest_epoch\n${rows}\n`, 'utf-8');
    console.log(`wrote ${outDir}`);
  }
  return 0;
}

function cmdPredict(argv: string[]): number {
  const values = parsed(argv, {
    'checkpoint': { type: 'string' },
    'corpus': { type: 'string' },
    'lang': { type: 'string' },
    'ids': { type: 'string' },
    'threshold': { type: 'string' },
    'out': { type: 'string' },
  });
  const ck = loadCheckpoint(need(values, 'checkpoint'));
  const docs = readCorpus(need(values, 'corpus'), need(values, 'lang'),
    typeof values['ids'] === 'string' ? values['ids'] : undefined);
  const threshold = values['threshold'] === undefined
    ? undefined : num(values, 'threshold', ck.threshold);
  const out = need(values, 'out');
  writePredictions(out, predictionsFor(ck, docs, threshold));
  console.log(`wrote ${out} (${docs.length} documents)`);
  return 0;
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  switch (command) {
    case 'train': return cmdTrain(rest);
    case 'grid': return cmdGrid(rest);
    case 'predict': return cmdPredict(rest);
    case undefined:
    case '--help':
    case '-h':
      console.log(USAGE);
      return command === undefined ? 2 : 0;
    default:
      throw new Error(`unknown command ${JSON.stringify(command)}; see --help`);
  }
}

const invokedDirectly = process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${path.resolve(process.argv[1])}`).href;
if (invokedDirectly) {
  try {
    process.exit(main(process.argv.slice(2)));
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    process.exit(2);
  }
}
