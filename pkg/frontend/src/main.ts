/**
 * DOM glue: owns the state, re-renders on every transition, delegates
 * button clicks, and polls the stats endpoint every five seconds.
 * At most one generation request and one vote are in flight at a time.
 */

import { ConflictError, StatsResponse, StudyClient } from "./api.js";
import {
  AppState,
  editPrompt,
  generationFailed,
  generationSucceeded,
  initialState,
  nextPrompt,
  startGeneration,
  submissionConflicted,
  submissionFailed,
  submissionRecorded,
} from "./state.js";
import { render } from "./view.js";

const STATS_POLL_MS = 5000;

export function mount(root: HTMLElement, client: StudyClient = new StudyClient()): void {
  let state: AppState = initialState;
  let stats: StatsResponse | null = null;
  let requestInFlight = false;
  let voteInFlight = false;

  function setState(next: AppState): void {
    state = next;
    paint();
  }

  function paint(): void {
    const focused = document.activeElement?.id;
    root.innerHTML = render(state, stats);
    if (focused === "prompt-input") {
      const input = root.querySelector<HTMLTextAreaElement>("#prompt-input");
      input?.focus();
      input?.setSelectionRange(input.value.length, input.value.length);
    }
  }

  async function generate(): Promise<void> {
    if (requestInFlight) {
      return;
    }
    const next = startGeneration(state);
    if (next === state) {
      return;
    }
    requestInFlight = true;
    setState(next);
    try {
      const comparison = await client.createComparison(state.prompt.trim());
      setState(generationSucceeded(state, comparison));
    } catch (error) {
      setState(generationFailed(state, message(error)));
    } finally {
      requestInFlight = false;
    }
  }

  async function choose(choice: "first" | "second" | "same"): Promise<void> {
    if (voteInFlight || state.phase !== "choosing" || state.comparison === null) {
      return;
    }
    voteInFlight = true;
    try {
      await client.submitPreference(state.comparison.id, choice);
      setState(submissionRecorded(state));
    } catch (error) {
      if (error instanceof ConflictError) {
        setState(submissionConflicted(state));
      } else {
        setState(submissionFailed(state, message(error)));
      }
    } finally {
      voteInFlight = false;
    }
  }

  async function refreshStats(): Promise<void> {
    try {
      stats = await client.fetchStats();
    } catch {
      stats = null;
    }
    paint();
  }

  root.addEventListener("click", (event) => {
    const target = (event.target as HTMLElement).closest<HTMLButtonElement>("button[data-action]");
    if (!target || target.disabled) {
      return;
    }
    switch (target.dataset.action) {
      case "generate":
        void generate();
        break;
      case "choose-first":
        void choose("first");
        break;
      case "choose-second":
        void choose("second");
        break;
      case "choose-same":
        void choose("same");
        break;
      case "next":
        setState(nextPrompt(state));
        break;
    }
  });

  root.addEventListener("input", (event) => {
    const target = event.target as HTMLElement;
    if (target.id === "prompt-input") {
      state = editPrompt(state, (target as HTMLTextAreaElement).value);
      // Re-render only the submit button's enablement, without stealing
      // keystrokes: cheapest correct thing is a full repaint.
      paint();
    }
  });

  paint();
  void refreshStats();
  window.setInterval(() => void refreshStats(), STATS_POLL_MS);
}

function message(error: unknown): string {
  return error instanceof Error ? error.message : String(error);
}

const root = document.getElementById("app");
if (root) {
  mount(root);
}
