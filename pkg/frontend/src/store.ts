// Client-side view state. The server session is the source of truth; this
// only tracks which panel is active, whether a mutating request is in
// flight, and transient error/download bookkeeping.

import type { SessionView } from "./types.js";

export type Panel = 1 | 2 | 3;

export interface UiState {
  session: SessionView | null;
  activePanel: Panel;
  busy: boolean; // at most one mutating request in flight per session
  error: string | null;
  conflict: boolean; // optimistic-concurrency conflict: prompt a reload
  lastDownload: { format: string; content: string; contentType: string } | null;
}

export type Listener = (state: UiState) => void;

export class Store {
  state: UiState = {
    session: null,
    activePanel: 1,
    busy: false,
    error: null,
    conflict: false,
    lastDownload: null,
  };

  private listeners: Listener[] = [];

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  set(partial: Partial<UiState>): void {
    this.state = { ...this.state, ...partial };
    for (const listener of this.listeners) listener(this.state);
  }
}
