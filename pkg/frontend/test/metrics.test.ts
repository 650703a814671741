import { describe, expect, it } from 'vitest';
import { decide, microF1 } from '../src/metrics.js';

describe('micro-F1', () => {
  it('matches the worked two-document example exactly', () => {
    const gold = [new Set(['NA']), new Set(['IN', 'OP'])];
    const pred = [new Set(['NA', 'IP']), new Set(['IN'])];
    // tp=2, pred=3, gold=3 -> 2*2/(3+3)
    expect(Math.abs(microF1(gold, pred) - 2 / 3)).toBeLessThan(1e-9);
    expect(microF1(gold, pred)).toBe((2 * 2) / (3 + 3));
  });

  it('is 1.0 when both sides are empty and 0.0 on disjoint sets', () => {
    expect(microF1([new Set()], [new Set()])).toBe(1.0);
    expect(microF1([new Set(['NA'])], [new Set(['SP'])])).toBe(0.0);
  });

  it('rejects mismatched document counts', () => {
    expect(() => microF1([new Set()], [])).toThrow(/documents/);
  });

  it('decides labels with an inclusive threshold', () => {
    const row = Float64Array.from([0.5, 0.49999999, 0.9, 0, 0, 0, 0, 0.5]);
    expect(decide(row, 0.5)).toEqual(new Set(['NA', 'OP', 'SP']));
    expect(decide(row, 0.0)).toEqual(new Set(['NA', 'IN', 'OP', 'ID', 'HI', 'IP', 'LY', 'SP']));
  });
});
