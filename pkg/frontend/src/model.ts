import * as fs from 'node:fs';
import * as path from 'node:path';
import { LABEL_ORDER, labelVector, sameLabelOrder } from './labels.js';
import { RegisterDocument, tokenize } from './corpus.js';
import { decide, microF1 } from './metrics.js';
import { mulberry32, normal, Rng, shuffled } from './rng.js';
import { PredictionFile } from './exchange.js';

const N_LABELS = LABEL_ORDER.length;
const EPS = 1e-7; // loss clamp only; the gradient uses the plain sigmoid shortcut

export interface FinetuneConfig {
  model: string; // backbone directory (pretrained weights)
  maxLen: number; // sequence truncation, at the end
  batchSize: number;
  learningRate: number;
  epochs: number;
  seed: number;
  threshold: number;
  labelOrder: readonly string[];
}

export const DEFAULT_CONFIG: Omit<FinetuneConfig, 'model'> = {
  maxLen: 512,
  batchSize: 7,
  learningRate: 2e-5,
  epochs: 5,
  seed: 1,
  threshold: 0.5,
  labelOrder: LABEL_ORDER,
};

// Published hyperparameter ranges, realized as explicit grid points.
export const GRID_LEARNING_RATES = [8e-6, 2e-5, 4e-5, 6e-5] as const;
export const GRID_EPOCHS = [3, 4, 5, 6, 7] as const;

export interface EncoderWeights {
  dim: number;
  buckets: number;
  emb: Float64Array; // buckets x dim
  w1: Float64Array; // dim x dim
  b1: Float64Array; // dim
  w2: Float64Array; // N_LABELS x dim
  b2: Float64Array; // N_LABELS
}

export interface Checkpoint {
  format: 'register-finetune-checkpoint';
  version: 1;
  model: string;
  labelOrder: string[];
  maxLen: number;
  threshold: number;
  config: { learningRate: number; epochs: number; batchSize: number; seed: number; bestEpoch: number };
  weights: { dim: number; buckets: number; emb: number[]; w1: number[]; b1: number[]; w2: number[]; b2: number[] };
}

// --- backbone loading -------------------------------------------------------

interface BackboneSpec {
  name: string;
  dim: number;
  buckets: number;
  seed: number;
  version: number;
}

/**
 * Load pretrained encoder weights from a backbone directory. The directory
 * holds a `model.json` spec; weights are either explicit (`weights.json`) or
 * expanded deterministically from the spec seed for desk-scale backbones.
 * A name that is not such a directory (e.g. a hub checkpoint that was never
 * downloaded) is unavailable and refuses to load.
 */
export function loadBackbone(model: string): { spec: BackboneSpec; weights: EncoderWeights } {
  const specPath = path.join(model, 'model.json');
  if (!fs.existsSync(specPath)) {
    throw new Error(
      `checkpoint unavailable: ${model} (no model.json; pass a backbone directory with pretrained weights)`);
  }
  const spec = JSON.parse(fs.readFileSync(specPath, 'utf-8')) as BackboneSpec;
  if (!Number.isInteger(spec.dim) || spec.dim < 1 || !Number.isInteger(spec.buckets) || spec.buckets < 1) {
    throw new Error(`backbone ${model}: bad dim/buckets in model.json`);
  }
  const weightsPath = path.join(model, 'weights.json');
  let emb: Float64Array;
  let w1: Float64Array;
  let b1: Float64Array;
  if (fs.existsSync(weightsPath)) {
    const data = JSON.parse(fs.readFileSync(weightsPath, 'utf-8'));
    emb = Float64Array.from(data.emb);
    w1 = Float64Array.from(data.w1);
    b1 = Float64Array.from(data.b1);
  } else {
    const rng = mulberry32(spec.seed);
    emb = randomTensor(spec.buckets * spec.dim, 0.3, rng);
    w1 = randomTensor(spec.dim * spec.dim, 1 / Math.sqrt(spec.dim), rng);
    b1 = new Float64Array(spec.dim);
  }
  if (emb.length !== spec.buckets * spec.dim || w1.length !== spec.dim * spec.dim || b1.length !== spec.dim) {
    throw new Error(`backbone ${model}: weight shapes disagree with model.json`);
  }
  return {
    spec,
    weights: {
      dim: spec.dim,
      buckets: spec.buckets,
      emb,
      w1,
      b1,
      w2: new Float64Array(N_LABELS * spec.dim),
      b2: new Float64Array(N_LABELS),
    },
  };
}

function randomTensor(n: number, scale: number, rng: Rng): Float64Array {
  const t = new Float64Array(n);
  for (let i = 0; i < n; i++) t[i] = scale * normal(rng);
  return t;
}

// --- encoding and forward pass ----------------------------------------------

/** FNV-1a over UTF-16 code units, bucketed into the embedding table. */
export function tokenBucket(token: string, buckets: number): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < token.length; i++) {
    h ^= token.charCodeAt(i);
    h = Math.imul(h, 0x01000193);
  }
  return (h >>> 0) % buckets;
}

function encodeDoc(doc: RegisterDocument, maxLen: number, buckets: number): Int32Array {
  const tokens = tokenize(doc.text, maxLen);
  const ids = new Int32Array(tokens.length);
  tokens.forEach((t, i) => { ids[i] = tokenBucket(t, buckets); });
  return ids;
}

interface ForwardState {
  pooled: Float64Array; // dim, mean embedding
  hidden: Float64Array; // dim, tanh activation
  probs: Float64Array; // N_LABELS
}

function forward(w: EncoderWeights, tokenIds: Int32Array): ForwardState {
  const { dim } = w;
  const pooled = new Float64Array(dim);
  if (tokenIds.length > 0) {
    for (const b of tokenIds) {
      const off = b * dim;
      for (let k = 0; k < dim; k++) pooled[k] += w.emb[off + k];
    }
    for (let k = 0; k < dim; k++) pooled[k] /= tokenIds.length;
  }
  const hidden = new Float64Array(dim);
  for (let j = 0; j < dim; j++) {
    let u = w.b1[j];
    const off = j * dim;
    for (let k = 0; k < dim; k++) u += w.w1[off + k] * pooled[k];
    hidden[j] = Math.tanh(u);
  }
  const probs = new Float64Array(N_LABELS);
  for (let l = 0; l < N_LABELS; l++) {
    let z = w.b2[l];
    const off = l * dim;
    for (let j = 0; j < dim; j++) z += w.w2[off + j] * hidden[j];
    probs[l] = 1 / (1 + Math.exp(-z));
  }
  return { pooled, hidden, probs };
}

/** Mean binary cross-entropy over labels, probabilities clamped at EPS. */
export function bceLoss(probs: Float64Array, target: Float64Array): number {
  let loss = 0;
  for (let l = 0; l < probs.length; l++) {
    const p = Math.min(Math.max(probs[l], EPS), 1 - EPS);
    loss -= target[l] * Math.log(p) + (1 - target[l]) * Math.log(1 - p);
  }
  return loss / probs.length;
}

// --- fine-tuning --------------------------------------------------------------

interface Grads {
  emb: Float64Array;
  w1: Float64Array;
  b1: Float64Array;
  w2: Float64Array;
  b2: Float64Array;
}

function zeroGrads(w: EncoderWeights): Grads {
  return {
    emb: new Float64Array(w.emb.length),
    w1: new Float64Array(w.w1.length),
    b1: new Float64Array(w.b1.length),
    w2: new Float64Array(w.w2.length),
    b2: new Float64Array(w.b2.length),
  };
}

function backward(w: EncoderWeights, tokenIds: Int32Array, state: ForwardState,
                  target: Float64Array, scale: number, g: Grads): void {
  const { dim } = w;
  const dz = new Float64Array(N_LABELS);
  for (let l = 0; l < N_LABELS; l++) {
    dz[l] = ((state.probs[l] - target[l]) / N_LABELS) * scale;
  }
  const dh = new Float64Array(dim);
  for (let l = 0; l < N_LABELS; l++) {
    const off = l * dim;
    g.b2[l] += dz[l];
    for (let j = 0; j < dim; j++) {
      g.w2[off + j] += dz[l] * state.hidden[j];
      dh[j] += dz[l] * w.w2[off + j];
    }
  }
  const de = new Float64Array(dim);
  for (let j = 0; j < dim; j++) {
    const du = dh[j] * (1 - state.hidden[j] * state.hidden[j]);
    const off = j * dim;
    g.b1[j] += du;
    for (let k = 0; k < dim; k++) {
      g.w1[off + k] += du * state.pooled[k];
      de[k] += du * w.w1[off + k];
    }
  }
  if (tokenIds.length > 0) {
    for (const b of tokenIds) {
      const off = b * dim;
      for (let k = 0; k < dim; k++) g.emb[off + k] += de[k] / tokenIds.length;
    }
  }
}

class Adam {
  private m: Float64Array;
  private v: Float64Array;
  private t = 0;

  constructor(private size: number, private lr: number) {
    this.m = new Float64Array(size);
    this.v = new Float64Array(size);
  }

  step(param: Float64Array, grad: Float64Array): void {
    this.t += 1;
    const b1c = 1 - Math.pow(0.9, this.t);
    const b2c = 1 - Math.pow(0.999, this.t);
    for (let i = 0; i < this.size; i++) {
      this.m[i] = 0.9 * this.m[i] + 0.1 * grad[i];
      this.v[i] = 0.999 * this.v[i] + 0.001 * grad[i] * grad[i];
      param[i] -= (this.lr * (this.m[i] / b1c)) / (Math.sqrt(this.v[i] / b2c) + 1e-8);
    }
  }
}

export interface FinetuneResult {
  checkpoint: Checkpoint;
  devMicroF1: number;
  bestEpoch: number;
  devHistory: number[]; // dev micro-F1 after each epoch, 1-based epochs
}

const MEMORY_BUDGET_BYTES = 1 << 30;

function estimateBytes(config: FinetuneConfig, dim: number, buckets: number): number {
  const params = buckets * dim + dim * dim + dim + N_LABELS * dim + N_LABELS;
  return 8 * (4 * params + config.batchSize * (config.maxLen + 4 * dim + 64));
}

function copyWeights(w: EncoderWeights): EncoderWeights {
  return { dim: w.dim, buckets: w.buckets, emb: w.emb.slice(), w1: w.w1.slice(),
           b1: w.b1.slice(), w2: w.w2.slice(), b2: w.b2.slice() };
}

/**
 * Fine-tune the encoder end to end with a sigmoid multi-label head and a
 * binary cross-entropy objective. After every epoch the dev set is scored
 * with the shared micro-F1 definition; the weights from the strictly best
 * epoch (earliest on ties) become the checkpoint.
 */
export function finetune(config: FinetuneConfig, train: RegisterDocument[],
                         dev: RegisterDocument[]): FinetuneResult {
  if (!sameLabelOrder(config.labelOrder)) {
    throw new Error(`label order ${config.labelOrder.join(' ')} differs from ${LABEL_ORDER.join(' ')}`);
  }
  if (train.length === 0) throw new Error('training corpus is empty');
  if (dev.length === 0) throw new Error('dev corpus is empty');
  if (config.epochs < 1) throw new Error('epochs must be >= 1');
  if (config.batchSize < 1) throw new Error('batch size must be >= 1');
  const { spec, weights } = loadBackbone(config.model);
  const bytes = estimateBytes(config, weights.dim, weights.buckets);
  if (bytes > MEMORY_BUDGET_BYTES) {
    const suggestion = Math.max(1, Math.floor(config.batchSize / 2));
    throw new Error(
      `out of memory: estimated ${(bytes / 1e6).toFixed(0)} MB exceeds the ` +
      `${(MEMORY_BUDGET_BYTES / 1e6).toFixed(0)} MB budget; reduce --batch-size (try ${suggestion})`);
  }

  const headRng = mulberry32(config.seed);
  const headScale = 1 / Math.sqrt(weights.dim);
  for (let i = 0; i < weights.w2.length; i++) weights.w2[i] = headScale * normal(headRng);
  weights.b2.fill(0);

  const trainIds = train.map((doc) => encodeDoc(doc, config.maxLen, weights.buckets));
  const trainTargets = train.map((doc) => labelVector(doc.labels));
  const devIds = dev.map((doc) => encodeDoc(doc, config.maxLen, weights.buckets));
  const devGold = dev.map((doc) => doc.labels);

  const opt = {
    emb: new Adam(weights.emb.length, config.learningRate),
    w1: new Adam(weights.w1.length, config.learningRate),
    b1: new Adam(weights.b1.length, config.learningRate),
    w2: new Adam(weights.w2.length, config.learningRate),
    b2: new Adam(weights.b2.length, config.learningRate),
  };

  const shuffleRng = mulberry32(config.seed ^ 0x9e3779b9);
  const devHistory: number[] = [];
  let best: { f1: number; epoch: number; weights: EncoderWeights } | undefined;

  for (let epoch = 1; epoch <= config.epochs; epoch++) {
    const order = shuffled(train.length, shuffleRng);
    for (let start = 0; start < order.length; start += config.batchSize) {
      const batch = order.slice(start, start + config.batchSize);
      const g = zeroGrads(weights);
      for (const i of batch) {
        const state = forward(weights, trainIds[i]);
        backward(weights, trainIds[i], state, trainTargets[i], 1 / batch.length, g);
      }
      opt.emb.step(weights.emb, g.emb);
      opt.w1.step(weights.w1, g.w1);
      opt.b1.step(weights.b1, g.b1);
      opt.w2.step(weights.w2, g.w2);
      opt.b2.step(weights.b2, g.b2);
    }
    const devPred = devIds.map((ids) => decide(forward(weights, ids).probs, config.threshold));
    const f1 = microF1(devGold, devPred);
    devHistory.push(f1);
    if (best === undefined || f1 > best.f1) {
      best = { f1, epoch, weights: copyWeights(weights) };
    }
  }

  const chosen = best!;
  return {
    checkpoint: {
      format: 'register-finetune-checkpoint',
      version: 1,
      model: spec.name,
      labelOrder: [...LABEL_ORDER],
      maxLen: config.maxLen,
      threshold: config.threshold,
      config: {
        learningRate: config.learningRate,
        epochs: config.epochs,
        batchSize: config.batchSize,
        seed: config.seed,
        bestEpoch: chosen.epoch,
      },
      weights: {
        dim: chosen.weights.dim,
        buckets: chosen.weights.buckets,
        emb: Array.from(chosen.weights.emb),
        w1: Array.from(chosen.weights.w1),
        b1: Array.from(chosen.weights.b1),
        w2: Array.from(chosen.weights.w2),
        b2: Array.from(chosen.weights.b2),
      },
    },
    devMicroF1: chosen.f1,
    bestEpoch: chosen.epoch,
    devHistory,
  };
}

// --- grid search --------------------------------------------------------------

export interface GridCell {
  learningRate: number;
  epochs: number;
  devMicroF1: number;
  bestEpoch: number;
}

export interface GridResult {
  best: GridCell;
  cells: GridCell[];
  checkpoint: Checkpoint;
}

/**
 * Learning-rate x epoch-count grid on the dev set. A run capped at n epochs
 * is a prefix of the same-seed run capped at max(epochs), so each learning
 * rate trains once and every epoch cell reads the best dev micro-F1 within
 * its prefix. Ties prefer fewer epochs, then the lower learning rate.
 */
export function gridSearch(base: Omit<FinetuneConfig, 'learningRate' | 'epochs'>,
                           train: RegisterDocument[], dev: RegisterDocument[],
                           learningRates: readonly number[] = GRID_LEARNING_RATES,
                           epochGrid: readonly number[] = GRID_EPOCHS): GridResult {
  if (learningRates.length === 0 || epochGrid.length === 0) throw new Error('empty grid');
  const maxEpochs = Math.max(...epochGrid);
  const cells: GridCell[] = [];
  let best: { cell: GridCell; result: FinetuneResult } | undefined;
  for (const lr of [...learningRates].sort((a, b) => a - b)) {
    const result = finetune({ ...base, learningRate: lr, epochs: maxEpochs }, train, dev);
    for (const n of [...epochGrid].sort((a, b) => a - b)) {
      let f1 = -Infinity;
      let bestEpoch = 1;
      for (let e = 1; e <= n; e++) {
        if (result.devHistory[e - 1] > f1) {
          f1 = result.devHistory[e - 1];
          bestEpoch = e;
        }
      }
      const cell: GridCell = { learningRate: lr, epochs: n, devMicroF1: f1, bestEpoch };
      cells.push(cell);
      if (best === undefined || f1 > best.cell.devMicroF1) {
        best = { cell, result };
      }
    }
  }
  const chosen = best!;
  // re-run the winning cell so the checkpoint matches its epoch cap exactly
  const result = chosen.result.checkpoint.config.epochs === chosen.cell.epochs
    ? chosen.result
    : finetune({ ...base, learningRate: chosen.cell.learningRate, epochs: chosen.cell.epochs }, train, dev);
  return { best: chosen.cell, cells, checkpoint: result.checkpoint };
}

// --- checkpoint IO and prediction -------------------------------------------

export function saveCheckpoint(path: string, checkpoint: Checkpoint): void {
  fs.writeFileSync(path, JSON.stringify(checkpoint) + '\n', 'utf-8');
}

export function loadCheckpoint(path: string): Checkpoint {
  let data: unknown;
  try {
    data = JSON.parse(fs.readFileSync(path, 'utf-8'));
  } catch (err) {
    throw new Error(`${path}: not a checkpoint (${(err as Error).message})`);
  }
  const ck = data as Checkpoint;
  if (ck === null || typeof ck !== 'object' || ck.format !== 'register-finetune-checkpoint') {
    throw new Error(`${path}: not a register-finetune-checkpoint`);
  }
  if (ck.version !== 1) throw new Error(`${path}: unsupported checkpoint version ${ck.version}`);
  if (!Array.isArray(ck.labelOrder)) throw new Error(`${path}: checkpoint has no label order`);
  return ck;
}

function checkpointWeights(ck: Checkpoint): EncoderWeights {
  return {
    dim: ck.weights.dim,
    buckets: ck.weights.buckets,
    emb: Float64Array.from(ck.weights.emb),
    w1: Float64Array.from(ck.weights.w1),
    b1: Float64Array.from(ck.weights.b1),
    w2: Float64Array.from(ck.weights.w2),
    b2: Float64Array.from(ck.weights.b2),
  };
}

/** Probability rows for a corpus, in checkpoint label order. */
export function predictProbs(ck: Checkpoint, docs: RegisterDocument[]): Float64Array[] {
  const weights = checkpointWeights(ck);
  return docs.map((doc) => forward(weights, encodeDoc(doc, ck.maxLen, weights.buckets)).probs);
}

/**
 * Score a corpus and build the exchange-format payload. Refuses a checkpoint
 * whose label order differs from the canonical header order; writing such a
 * file would silently permute every probability column.
 */
export function predictionsFor(ck: Checkpoint, docs: RegisterDocument[],
                               threshold?: number): PredictionFile {
  if (!sameLabelOrder(ck.labelOrder)) {
    throw new Error(
      `refusing to write predictions: checkpoint label order ${ck.labelOrder.join(' ')} ` +
      `differs from ${LABEL_ORDER.join(' ')}`);
  }
  return {
    threshold: threshold ?? ck.threshold,
    ids: docs.map((doc) => doc.id),
    rows: predictProbs(ck, docs),
  };
}
