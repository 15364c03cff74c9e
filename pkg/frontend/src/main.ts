// Entry point. The API base URL is configurable at build time (edit
// index.html to set window.__ARCHED_API__) and at mount time (tests pass it
// explicitly); it defaults to same-origin.

import { ArchedApi } from "./api.js";
import { App } from "./app.js";
import { mountView } from "./render.js";
import { Store } from "./store.js";

export interface MountOptions {
  apiBase?: string;
  sessionId?: string;
  saveDownloads?: boolean;
}

export function mount(root: HTMLElement, options: MountOptions = {}): App {
  const globals = globalThis as { __ARCHED_API__?: string };
  const api = new ArchedApi(options.apiBase ?? globals.__ARCHED_API__ ?? "");
  const store = new Store();
  const app = new App(api, store, { saveDownloads: options.saveDownloads });

  store.subscribe((state) => {
    // keep the session id in the fragment so a page reload can resume
    if (state.session && typeof location !== "undefined") {
      const fragment = `#${state.session.id}`;
      if (location.hash !== fragment) location.hash = fragment;
    }
  });

  mountView(root, store, app);

  const resume =
    options.sessionId ??
    (typeof location !== "undefined" && location.hash.startsWith("#ses-")
      ? location.hash.slice(1)
      : undefined);
  if (resume) void app.loadSession(resume);
  return app;
}
