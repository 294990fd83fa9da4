// Session view-model: a pure rendering of the last server responses.
// Every field is derived from what the server said; the UI invents nothing.

import { ApiError, SessionApi } from "./api.js";
import {
  isQuestionResponse,
  LABEL_BADGES,
  type Mode,
  type PassageCard,
  type ResultResponse,
  type ServerState,
} from "./types.js";

export interface Bubble {
  speaker: "user" | "system";
  kind: "query" | "answer" | "question" | "passages";
  text: string;
  passages?: PassageCard[];
}

export interface DecisionBadge {
  mode: Mode;
  labelName: string | null;
  resolvedQuery: string;
  expandedQuery: string;
  addedTokens: string[];
}

export interface SessionView {
  sessionId: string | null;
  mode: Mode;
  state: ServerState | "disconnected";
  transcript: Bubble[];
  decision: DecisionBadge | null;
  passages: PassageCard[];
  error: string | null;
  busy: boolean;
}

export function emptyView(mode: Mode): SessionView {
  return {
    sessionId: null,
    mode,
    state: "disconnected",
    transcript: [],
    decision: null,
    passages: [],
    error: null,
    busy: false,
  };
}

export function tokensOf(text: string): string[] {
  return (text.toLowerCase().match(/[\p{L}\p{N}]+/gu) ?? []) as string[];
}

/** Tokens of the expanded query that the expansion step introduced. */
export function addedTokens(resolved: string, expanded: string): string[] {
  const base = new Set(tokensOf(resolved));
  return tokensOf(expanded).filter((token) => !base.has(token));
}

export function canSendQuery(view: SessionView): boolean {
  return view.sessionId !== null && view.state === "awaiting_query" && !view.busy;
}

export function canSendAnswer(view: SessionView): boolean {
  return view.sessionId !== null && view.state === "awaiting_answer" && !view.busy;
}

function decisionFrom(mode: Mode, response: ResultResponse): DecisionBadge {
  const labelName =
    response.label === null || response.label === undefined
      ? mode === "mi_all"
        ? "always expanded"
        : null
      : (LABEL_BADGES[response.label] ?? `label ${response.label}`);
  return {
    mode,
    labelName,
    resolvedQuery: response.resolved_query,
    expandedQuery: response.expanded_query,
    addedTokens: addedTokens(response.resolved_query, response.expanded_query),
  };
}

/**
 * Drives one session against the API and exposes an always-consistent
 * SessionView. One in-flight request at a time; the mode is fixed for the
 * controller's lifetime.
 */
export class SessionController {
  view: SessionView;

  constructor(
    private readonly api: SessionApi,
    mode: Mode,
    private readonly onChange: (view: SessionView) => void = () => {},
  ) {
    this.view = emptyView(mode);
  }

  private emit(): void {
    this.onChange(this.view);
  }

  async start(): Promise<void> {
    this.view = { ...emptyView(this.view.mode), busy: true };
    this.emit();
    try {
      const created = await this.api.createSession(this.view.mode);
      this.view = {
        ...this.view,
        sessionId: created.session_id,
        state: created.state,
        busy: false,
        error: null,
      };
    } catch (error) {
      this.view = {
        ...this.view,
        sessionId: null,
        state: "disconnected",
        busy: false,
        error: describe(error),
      };
    }
    this.emit();
  }

  async sendQuery(text: string): Promise<void> {
    if (!canSendQuery(this.view) || !text.trim()) return;
    this.view = {
      ...this.view,
      busy: true,
      error: null,
      transcript: [...this.view.transcript, { speaker: "user", kind: "query", text }],
    };
    this.emit();
    try {
      const response = await this.api.sendQuery(this.view.sessionId!, text);
      if (isQuestionResponse(response)) {
        this.view = {
          ...this.view,
          state: response.state,
          busy: false,
          transcript: [
            ...this.view.transcript,
            { speaker: "system", kind: "question", text: response.clarifying_question.text },
          ],
        };
      } else {
        this.view = {
          ...this.view,
          state: response.state,
          busy: false,
          passages: response.passages,
          decision: decisionFrom(this.view.mode, response),
          transcript: [
            ...this.view.transcript,
            {
              speaker: "system",
              kind: "passages",
              text: `${response.passages.length} passages`,
              passages: response.passages,
            },
          ],
        };
      }
    } catch (error) {
      this.view = this.rolledBack(error);
    }
    this.emit();
  }

  async sendAnswer(text: string): Promise<void> {
    if (!canSendAnswer(this.view) || !text.trim()) return;
    this.view = {
      ...this.view,
      busy: true,
      error: null,
      transcript: [...this.view.transcript, { speaker: "user", kind: "answer", text }],
    };
    this.emit();
    try {
      const response = await this.api.sendAnswer(this.view.sessionId!, text);
      this.view = {
        ...this.view,
        state: response.state,
        busy: false,
        passages: response.passages,
        decision: decisionFrom(this.view.mode, response),
        transcript: [
          ...this.view.transcript,
          {
            speaker: "system",
            kind: "passages",
            text: `${response.passages.length} passages`,
            passages: response.passages,
          },
        ],
      };
    } catch (error) {
      this.view = this.rolledBack(error);
    }
    this.emit();
  }

  /** Drop the optimistic user bubble and surface the error (e.g. a raced 409). */
  private rolledBack(error: unknown): SessionView {
    return {
      ...this.view,
      busy: false,
      transcript: this.view.transcript.slice(0, -1),
      error: describe(error),
    };
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiError) {
    return error.status === 409 ? `out-of-order request: ${error.message}` : error.message;
  }
  return error instanceof Error ? error.message : String(error);
}
