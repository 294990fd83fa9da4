// Payload shapes of the session API, mirrored verbatim.

export type Mode = "no_mi" | "mi_all" | "mi_clf";

export type ServerState = "awaiting_query" | "awaiting_answer";

export interface PassageCard {
  id: string;
  score: number;
  snippet: string;
}

export interface CreateSessionResponse {
  session_id: string;
  mode: Mode;
  state: ServerState;
}

export interface ClarifyingQuestionPayload {
  id: string;
  text: string;
}

export interface QuestionResponse {
  state: ServerState;
  clarifying_question: ClarifyingQuestionPayload;
}

export interface ResultResponse {
  state: ServerState;
  resolved_query: string;
  expanded_query: string;
  label: number | null;
  label_name?: string | null;
  question?: string | null;
  passages: PassageCard[];
}

export type QueryResponse = QuestionResponse | ResultResponse;

export function isQuestionResponse(response: QueryResponse): response is QuestionResponse {
  return (response as QuestionResponse).clarifying_question !== undefined;
}

export const LABEL_BADGES: Record<number, string> = {
  0: "none useful",
  1: "question useful",
  2: "answer useful",
  3: "both useful",
};
