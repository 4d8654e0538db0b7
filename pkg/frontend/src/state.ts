/**
 * Page state machine.
 *
 * entering -> awaiting-generation -> choosing -> submitted -> entering ...
 *
 * Client state never holds which arm produced which option: only the
 * comparison id and the two texts as the server chose to order them.
 */

export type Phase = "entering" | "awaiting-generation" | "choosing" | "submitted";

export interface ComparisonView {
  id: string;
  first: string;
  second: string;
}

export interface AppState {
  phase: Phase;
  prompt: string;
  comparison: ComparisonView | null;
  error: string | null;
  submittedNote: string | null;
}

export const initialState: AppState = {
  phase: "entering",
  prompt: "",
  comparison: null,
  error: null,
  submittedNote: null,
};

export function editPrompt(state: AppState, prompt: string): AppState {
  if (state.phase !== "entering") {
    return state;
  }
  return { ...state, prompt };
}

export function canRequest(state: AppState): boolean {
  return state.phase === "entering" && state.prompt.trim().length > 0;
}

export function canChoose(state: AppState): boolean {
  return state.phase === "choosing";
}

export function startGeneration(state: AppState): AppState {
  if (!canRequest(state)) {
    return state;
  }
  return { ...state, phase: "awaiting-generation", error: null };
}

export function generationSucceeded(state: AppState, comparison: ComparisonView): AppState {
  if (state.phase !== "awaiting-generation") {
    return state;
  }
  return { ...state, phase: "choosing", comparison, error: null, submittedNote: null };
}

/** Back to entering with the prompt preserved so the user can retry. */
export function generationFailed(state: AppState, message: string): AppState {
  if (state.phase !== "awaiting-generation") {
    return state;
  }
  return { ...state, phase: "entering", comparison: null, error: message };
}

export function submissionRecorded(state: AppState): AppState {
  if (state.phase !== "choosing") {
    return state;
  }
  return { ...state, phase: "submitted", submittedNote: "Choice recorded. Thank you!" };
}

/** The service already holds a vote for this comparison. */
export function submissionConflicted(state: AppState): AppState {
  if (state.phase !== "choosing") {
    return state;
  }
  return {
    ...state,
    phase: "submitted",
    submittedNote: "A choice was already recorded for this comparison.",
  };
}

/** Transient submit failure: stay in choosing so the user can retry. */
export function submissionFailed(state: AppState, message: string): AppState {
  if (state.phase !== "choosing") {
    return state;
  }
  return { ...state, error: message };
}

export function nextPrompt(state: AppState): AppState {
  if (state.phase !== "submitted") {
    return state;
  }
  return { ...initialState, prompt: "" };
}
