// Six-bar level-distribution chart, ordered Remember -> Create, with gap
// levels highlighted. Values come straight from the server report.

import { BLOOM_LEVELS, type BloomLabel } from "./types.js";
import { esc } from "./html.js";

export function renderDistributionChart(
  distribution: Record<BloomLabel, number>,
  gaps: BloomLabel[],
): string {
  const max = Math.max(...BLOOM_LEVELS.map((level) => distribution[level] ?? 0), 1);
  const gapSet = new Set(gaps);
  const bars = BLOOM_LEVELS.map((level) => {
    const count = distribution[level] ?? 0;
    const height = Math.max(3, (count / max) * 100);
    const gapClass = gapSet.has(level) ? " gap" : "";
    return `
      <div class="bar-slot" title="${esc(level)}: ${count}">
        <span class="bar-count">${count}</span>
        <div class="bar${gapClass}" style="height: ${height}%" data-level="${esc(level)}" data-count="${count}"></div>
        <span class="bar-label">${esc(level)}</span>
      </div>`;
  }).join("");
  return `<div class="bar-chart" role="img" aria-label="level distribution">${bars}</div>`;
}
