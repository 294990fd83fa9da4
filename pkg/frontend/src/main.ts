// DOM bootstrap: one SessionController per started session, re-rendered on
// every view change. The mode selector locks once a session starts.

import { SessionApi } from "./api.js";
import { renderView } from "./render.js";
import { SessionController } from "./state.js";
import type { Mode } from "./types.js";

const API_BASE = (window as { CLARISEARCH_API?: string }).CLARISEARCH_API ?? "http://127.0.0.1:8080";

function mount(): void {
  const root = document.getElementById("app");
  const modeSelect = document.getElementById("mode-select") as HTMLSelectElement | null;
  const startButton = document.getElementById("start-session") as HTMLButtonElement | null;
  if (!root || !modeSelect || !startButton) {
    return;
  }

  const api = new SessionApi(API_BASE);
  let controller: SessionController | null = null;

  function redraw(): void {
    if (!controller) return;
    root!.innerHTML = renderView(controller.view);
    bindInputs();
  }

  function bindInputs(): void {
    const queryInput = document.getElementById("query-input") as HTMLInputElement | null;
    const answerInput = document.getElementById("answer-input") as HTMLInputElement | null;
    document.getElementById("send-query")?.addEventListener("click", () => {
      if (controller && queryInput) void controller.sendQuery(queryInput.value);
    });
    document.getElementById("send-answer")?.addEventListener("click", () => {
      if (controller && answerInput) void controller.sendAnswer(answerInput.value);
    });
    document.querySelector('[data-action="retry"]')?.addEventListener("click", () => {
      if (controller) void controller.start();
    });
    queryInput?.addEventListener("keydown", (event) => {
      if (event.key === "Enter" && controller) void controller.sendQuery(queryInput.value);
    });
    answerInput?.addEventListener("keydown", (event) => {
      if (event.key === "Enter" && controller) void controller.sendAnswer(answerInput.value);
    });
  }

  startButton.addEventListener("click", () => {
    const mode = modeSelect.value as Mode;
    controller = new SessionController(api, mode, redraw);
    modeSelect.disabled = true; // mode is fixed for the session's lifetime
    void controller.start();
  });
}

document.addEventListener("DOMContentLoaded", mount);
