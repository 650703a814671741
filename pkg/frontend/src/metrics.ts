import { LABEL_ORDER } from './labels.js';

/**
 * Micro-averaged F1 over per-document label sets, computed with the same
 * arithmetic as the classifier toolkit's evaluator: 2*tp / (pred + gold),
 * and 1.0 when both sides are empty. Used only for dev-set model selection;
 * test numbers always come from the toolkit's evaluator.
 */
export function microF1(gold: ReadonlySet<string>[], pred: ReadonlySet<string>[]): number {
  if (gold.length !== pred.length) {
    throw new Error(`gold has ${gold.length} documents, predictions ${pred.length}`);
  }
  let tp = 0;
  let nPred = 0;
  let nGold = 0;
  for (let i = 0; i < gold.length; i++) {
    nGold += gold[i].size;
    nPred += pred[i].size;
    for (const label of pred[i]) {
      if (gold[i].has(label)) tp += 1;
    }
  }
  const denom = nPred + nGold;
  return denom === 0 ? 1.0 : (2 * tp) / denom;
}

/** Decision rule shared with the toolkit: predict label when p >= threshold. */
export function decide(row: Float64Array, threshold: number): Set<string> {
  const labels = new Set<string>();
  LABEL_ORDER.forEach((label, i) => {
    if (row[i] >= threshold) labels.add(label);
  });
  return labels;
}
