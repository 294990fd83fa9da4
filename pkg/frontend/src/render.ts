// Pure HTML rendering of a SessionView. No state lives in the DOM.

import { canSendAnswer, canSendQuery, tokensOf, type Bubble, type SessionView } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Expanded query with tokens added by the expansion step wrapped in <mark>. */
export function highlightExpansion(expanded: string, added: string[]): string {
  const addedSet = new Set(added);
  return expanded
    .split(/(\s+)/)
    .map((part) => {
      if (/^\s+$/.test(part) || part === "") return part;
      const token = tokensOf(part)[0];
      const safe = escapeHtml(part);
      return token !== undefined && addedSet.has(token) ? `<mark>${safe}</mark>` : safe;
    })
    .join("");
}

function renderBubble(bubble: Bubble): string {
  if (bubble.kind === "passages") {
    const cards = (bubble.passages ?? [])
      .map(
        (card) => `
      <div class="card" data-passage="${escapeHtml(card.id)}">
        <span class="card-id">${escapeHtml(card.id)}</span>
        <span class="card-score">${card.score.toFixed(4)}</span>
        <p class="card-snippet">${escapeHtml(card.snippet)}</p>
      </div>`,
      )
      .join("");
    return `<div class="bubble system passages">${cards || "<p>no passages</p>"}</div>`;
  }
  const role = bubble.speaker === "user" ? "user" : "system";
  return `<div class="bubble ${role} ${bubble.kind}">${escapeHtml(bubble.text)}</div>`;
}

export function renderStateBadge(view: SessionView): string {
  return `<span class="badge state-badge" data-state="${view.state}">${view.state.replace("_", " ")}</span>`;
}

export function renderDecisionBadge(view: SessionView): string {
  if (view.decision === null) {
    return "";
  }
  const decision = view.decision;
  const label =
    decision.labelName === null
      ? ""
      : `<span class="badge label-badge" data-label="${escapeHtml(decision.labelName)}">${escapeHtml(decision.labelName)}</span>`;
  const identical = decision.expandedQuery === decision.resolvedQuery;
  const expansionNote = identical
    ? '<span class="expansion-note">expanded query equals resolved query</span>'
    : "";
  return `
  <div class="decision">
    <span class="badge mode-badge">${decision.mode}</span>
    ${label}
    <div class="queries">
      <div class="resolved">resolved: <code>${escapeHtml(decision.resolvedQuery)}</code></div>
      <div class="expanded">expanded: <code>${highlightExpansion(decision.expandedQuery, decision.addedTokens)}</code></div>
      ${expansionNote}
    </div>
  </div>`;
}

export function renderView(view: SessionView): string {
  const transcript = view.transcript.map(renderBubble).join("\n");
  const error = view.error
    ? `<div class="error" role="alert">${escapeHtml(view.error)} <button data-action="retry">retry</button></div>`
    : "";
  const queryDisabled = canSendQuery(view) ? "" : "disabled";
  const answerDisabled = canSendAnswer(view) ? "" : "disabled";
  return `
  <header>
    <span class="session-id">${view.sessionId ? escapeHtml(view.sessionId) : "not connected"}</span>
    <span class="badge mode-badge">${view.mode}</span>
    ${renderStateBadge(view)}
  </header>
  ${error}
  <section class="transcript">${transcript}</section>
  ${renderDecisionBadge(view)}
  <footer>
    <input id="query-input" placeholder="your query" ${queryDisabled} />
    <button id="send-query" data-action="query" ${queryDisabled}>search</button>
    <input id="answer-input" placeholder="answer the question" ${answerDisabled} />
    <button id="send-answer" data-action="answer" ${answerDisabled}>answer</button>
  </footer>`;
}
