// Canonical main-register order. Must match the classifier toolkit exactly;
// every exchange file header and every checkpoint carries this order.
export const LABEL_ORDER = ['NA', 'IN', 'OP', 'ID', 'HI', 'IP', 'LY', 'SP'] as const;

export type MainLabel = (typeof LABEL_ORDER)[number];

const MAINS = new Set<string>(LABEL_ORDER);

export function sameLabelOrder(order: readonly string[]): boolean {
  return order.length === LABEL_ORDER.length &&
    order.every((label, i) => label === LABEL_ORDER[i]);
}

/**
 * Collapse a raw label code onto its main register. Sub-register codes are
 * written `MAIN.sub_name`, so the main is the part before the dot.
 */
export function collapseLabel(code: string): MainLabel {
  const main = code.split('.', 1)[0];
  if (!MAINS.has(main)) {
    throw new Error(`unknown register label ${JSON.stringify(code)}`);
  }
  return main as MainLabel;
}

/** Parse a space-separated label field into a deduplicated main-label set. */
export function parseLabelField(field: string): Set<MainLabel> {
  const labels = new Set<MainLabel>();
  for (const code of field.split(' ')) {
    if (code === '') continue; // empty field = empty label set
    labels.add(collapseLabel(code));
  }
  return labels;
}

/** Label set as a 0/1 target vector in canonical order. */
export function labelVector(labels: ReadonlySet<string>): Float64Array {
  const row = new Float64Array(LABEL_ORDER.length);
  LABEL_ORDER.forEach((label, i) => {
    if (labels.has(label)) row[i] = 1.0;
  });
  return row;
}
