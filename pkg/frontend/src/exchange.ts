import * as fs from 'node:fs';
import { LABEL_ORDER, sameLabelOrder } from './labels.js';

export interface PredictionFile {
  threshold: number;
  ids: string[];
  // one row of 8 probabilities per id, canonical label order
  rows: Float64Array[];
}

/**
 * Serialize predictions in the exchange format shared with the classifier
 * toolkit: `#labels ...` and `#threshold ...` headers, then one
 * `id<TAB>p1 .. p8` row per document. Numbers use the shortest decimal that
 * round-trips the exact double, so a reader recovers identical bits.
 */
export function formatPredictions(preds: PredictionFile): string {
  const out: string[] = [];
  out.push(`#labels ${LABEL_ORDER.join(' ')}`);
  out.push(`#threshold ${String(preds.threshold)}`);
  preds.ids.forEach((id, i) => {
    const row = preds.rows[i];
    if (row.length !== LABEL_ORDER.length) {
      throw new Error(`row for ${id}: expected ${LABEL_ORDER.length} probabilities, got ${row.length}`);
    }
    for (const p of row) {
      if (!(p >= 0 && p <= 1)) throw new Error(`row for ${id}: probability ${p} outside [0, 1]`);
    }
    out.push(`${id}\t${Array.from(row, String).join(' ')}`);
  });
  return out.join('\n') + '\n';
}

export function writePredictions(path: string, preds: PredictionFile): void {
  fs.writeFileSync(path, formatPredictions(preds), 'utf-8');
}

export function parsePredictions(text: string): PredictionFile {
  const lines = text.split('\n');
  let labelsSeen = false;
  let threshold: number | undefined;
  const ids: string[] = [];
  const rows: Float64Array[] = [];
  const seen = new Set<string>();
  lines.forEach((raw, index) => {
    const lineno = index + 1;
    const line = raw.replace(/\r$/, '');
    if (line === '') return;
    if (line.startsWith('#labels ')) {
      if (!sameLabelOrder(line.slice(8).trim().split(/\s+/))) {
        throw new Error(`line ${lineno}: label order differs from ${LABEL_ORDER.join(' ')}`);
      }
      labelsSeen = true;
      return;
    }
    if (line.startsWith('#threshold ')) {
      threshold = Number(line.slice(11).trim());
      if (!Number.isFinite(threshold) || threshold < 0 || threshold > 1) {
        throw new Error(`line ${lineno}: bad threshold ${JSON.stringify(line.slice(11).trim())}`);
      }
      return;
    }
    if (line.startsWith('#')) return; // comment
    const tab = line.indexOf('\t');
    if (tab < 0) throw new Error(`line ${lineno}: expected id<TAB>probabilities`);
    const id = line.slice(0, tab);
    if (seen.has(id)) throw new Error(`line ${lineno}: duplicate id ${JSON.stringify(id)}`);
    seen.add(id);
    const fields = line.slice(tab + 1).split(' ');
    if (fields.length !== LABEL_ORDER.length) {
      throw new Error(`line ${lineno}: expected ${LABEL_ORDER.length} probabilities, found ${fields.length}`);
    }
    const row = new Float64Array(fields.length);
    fields.forEach((field, j) => {
      const p = Number(field);
      if (field === '' || !Number.isFinite(p)) throw new Error(`line ${lineno}: bad probability ${JSON.stringify(field)}`);
      if (p < 0 || p > 1) throw new Error(`line ${lineno}: probability ${p} outside [0, 1]`);
      row[j] = p;
    });
    ids.push(id);
    rows.push(row);
  });
  if (!labelsSeen) throw new Error('missing #labels header');
  if (threshold === undefined) throw new Error('missing #threshold header');
  return { threshold, ids, rows };
}

export function readPredictions(path: string): PredictionFile {
  return parsePredictions(fs.readFileSync(path, 'utf-8'));
}
