/**
 * HTML rendering. Pure string-producing functions so the markup can be
 * audited in tests without a DOM; main.ts binds the strings to the page.
 *
 * The voting area labels the two outputs "Option A" / "Option B" and
 * carries no hint of how either was produced.
 */

import type { StatsResponse } from "./api.js";
import { AppState, canChoose, canRequest } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

function button(action: string, label: string, enabled: boolean): string {
  const disabled = enabled ? "" : " disabled";
  return `<button type="button" data-action="${action}"${disabled}>${escapeHtml(label)}</button>`;
}

export function renderComparison(state: AppState): string {
  const parts: string[] = [];
  parts.push('<section class="prompt-box">');
  parts.push('<label for="prompt-input">Enter a creative request</label>');
  parts.push(
    `<textarea id="prompt-input" rows="2" placeholder="e.g. a slogan for a bakery on the moon"` +
      `${state.phase === "entering" ? "" : " disabled"}>${escapeHtml(state.prompt)}</textarea>`,
  );
  parts.push(button("generate", "Generate two options", canRequest(state)));
  parts.push("</section>");

  if (state.error) {
    parts.push(
      `<div class="banner error" role="alert">${escapeHtml(state.error)} ` +
        "You can try again.</div>",
    );
  }

  if (state.phase === "awaiting-generation") {
    parts.push('<div class="banner info" role="status">Generating two options…</div>');
  }

  if (state.comparison) {
    parts.push('<section class="options">');
    parts.push(
      `<article class="option"><h2>Option A</h2><pre>${escapeHtml(state.comparison.first)}</pre></article>`,
    );
    parts.push(
      `<article class="option"><h2>Option B</h2><pre>${escapeHtml(state.comparison.second)}</pre></article>`,
    );
    parts.push("</section>");
    parts.push('<section class="choices">');
    parts.push('<p id="choice-label">Which is the most creative, in your opinion?</p>');
    const enabled = canChoose(state);
    parts.push(button("choose-first", "Option A is more creative", enabled));
    parts.push(button("choose-second", "Option B is more creative", enabled));
    parts.push(button("choose-same", "Too similar to decide", enabled));
    parts.push("</section>");
  }

  if (state.phase === "submitted") {
    parts.push(
      `<div class="banner success" role="status">${escapeHtml(state.submittedNote ?? "Recorded.")}</div>`,
    );
    parts.push(button("next", "Next prompt", true));
  }

  return `<main id="comparison">${parts.join("\n")}</main>`;
}

export function renderStats(stats: StatsResponse | null): string {
  if (stats === null) {
    return '<aside id="stats"><h2>Session stats</h2><p>Stats unavailable.</p></aside>';
  }
  if (stats.n === 0 || stats.table === null) {
    return '<aside id="stats"><h2>Session stats</h2><p>No answered comparisons yet.</p></aside>';
  }
  const table = stats.table;
  const header = ["Preference", ...table.columns, "Total"]
    .map((cell) => `<th>${escapeHtml(cell)}</th>`)
    .join("");
  const body = table.rows
    .map((row, i) => {
      const cells = table.cells[i].map((value) => `<td>${value.toFixed(2)}</td>`).join("");
      return `<tr><td>${escapeHtml(row)}</td>${cells}<td>${table.row_totals[i].toFixed(2)}</td></tr>`;
    })
    .join("");
  return (
    '<aside id="stats"><h2>Session stats</h2>' +
    `<table><thead><tr>${header}</tr></thead><tbody>${body}</tbody></table>` +
    `<p>${table.n} answered comparison${table.n === 1 ? "" : "s"}.</p></aside>`
  );
}

export function render(state: AppState, stats: StatsResponse | null): string {
  return `${renderComparison(state)}\n${renderStats(stats)}`;
}
