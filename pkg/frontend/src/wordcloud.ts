// Word cloud over the (term, weight) feed from the topic model. Weights
// are c-TF-IDF scores with a heavy tail, so the font ramp is log-scaled:
// a linear map would render everything after the first few terms at the
// minimum size.

export interface CloudEntry {
  term: string;
  weight: number;
  fontSize: number;
}

export interface CloudOptions {
  minFont?: number;
  maxFont?: number;
}

const DEFAULTS: Required<CloudOptions> = { minFont: 12, maxFont: 42 };

export function cloudEntries(
  terms: [string, number][],
  opts: CloudOptions = {}
): CloudEntry[] {
  const { minFont, maxFont } = { ...DEFAULTS, ...opts };
  if (!terms.length) return [];
  const weights = terms.map(([, w]) => Math.max(0, w));
  const lo = Math.log1p(Math.min(...weights));
  const hi = Math.log1p(Math.max(...weights));
  const span = hi - lo;
  return terms.map(([term, weight]) => {
    const w = Math.max(0, weight);
    const t = span > 0 ? (Math.log1p(w) - lo) / span : 0.5;
    return { term, weight, fontSize: minFont + t * (maxFont - minFont) };
  });
}

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Simple flowed layout; weights decide size, not position. */
export function renderWordCloud(
  terms: [string, number][],
  opts: CloudOptions = {}
): string {
  const entries = cloudEntries(terms, opts);
  if (!entries.length) {
    return `<div class="wordcloud empty-state">No terms to show.</div>`;
  }
  const spans = entries
    .map(
      (e) =>
        `<span class="cloud-term" style="font-size:${e.fontSize.toFixed(1)}px"` +
        ` data-term="${esc(e.term)}" data-weight="${e.weight}">${esc(e.term)}</span>`
    )
    .join(" ");
  return `<div class="wordcloud">${spans}</div>`;
}
