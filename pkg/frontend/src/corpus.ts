import * as fs from 'node:fs';
import { MainLabel, parseLabelField } from './labels.js';

export interface RegisterDocument {
  id: string;
  text: string;
  labels: Set<MainLabel>;
}

/**
 * Read a register corpus TSV: one document per line, a space-separated label
 * field, a tab, then the text. Ids come from an optional sidecar file (one
 * per line) or are synthesized as `<lang>-<lineno>`, matching how the
 * classifier toolkit names documents, so prediction files line up with gold.
 */
export function readCorpus(path: string, lang: string, idsPath?: string): RegisterDocument[] {
  const lines = fs.readFileSync(path, 'utf-8').split('\n');
  if (lines.at(-1) === '') lines.pop();
  let ids: string[] | undefined;
  if (idsPath !== undefined) {
    ids = fs.readFileSync(idsPath, 'utf-8').split('\n').filter((line) => line !== '');
    if (ids.length !== lines.length) {
      throw new Error(`id sidecar has ${ids.length} entries for ${lines.length} documents`);
    }
  }
  const docs: RegisterDocument[] = [];
  const seen = new Set<string>();
  lines.forEach((raw, index) => {
    const lineno = index + 1;
    const line = raw.replace(/\r$/, '');
    const tab = line.indexOf('\t');
    if (tab < 0 || line.indexOf('\t', tab + 1) >= 0) {
      throw new Error(`${path}:${lineno}: expected 2 tab-separated fields`);
    }
    const id = ids ? ids[index] : `${lang}-${lineno}`;
    if (seen.has(id)) throw new Error(`duplicate document id ${JSON.stringify(id)}`);
    seen.add(id);
    docs.push({ id, text: line.slice(tab + 1), labels: parseLabelField(line.slice(0, tab)) });
  });
  return docs;
}

/** Whitespace tokens, truncated at the end to `maxLen`. */
export function tokenize(text: string, maxLen: number): string[] {
  const tokens = text.split(/\s+/).filter((t) => t !== '');
  return tokens.length > maxLen ? tokens.slice(0, maxLen) : tokens;
}
