// Controller: every user intent maps onto exactly one API call, refreshing
// the session from the server response. Nothing is computed client-side.

import { ApiError, ArchedApi } from "./api.js";
import { Store } from "./store.js";
import { allCandidates, type SessionView, type SpecView } from "./types.js";

export interface AppOptions {
  /** Trigger a browser file save on report download (embedders and DOM
   * emulations without real downloads can turn this off; the bytes are
   * always kept on store.lastDownload). */
  saveDownloads?: boolean;
}

export class App {
  constructor(
    public api: ArchedApi,
    public store: Store,
    private options: AppOptions = {},
  ) {}

  private async mutate(work: () => Promise<SessionView>): Promise<void> {
    if (this.store.state.busy) return; // one mutating request at a time
    this.store.set({ busy: true, error: null });
    try {
      const session = await work();
      this.store.set({ session, busy: false });
    } catch (error) {
      if (error instanceof ApiError) {
        this.store.set({
          busy: false,
          error: `${error.code}: ${error.message}`,
          conflict: error.code === "conflict",
        });
      } else {
        this.store.set({ busy: false, error: String(error) });
      }
    }
  }

  async loadSession(id: string): Promise<void> {
    try {
      const session = await this.api.getSession(id);
      this.store.set({ session, error: null, conflict: false });
    } catch (error) {
      this.store.set({ error: error instanceof ApiError ? error.message : String(error) });
    }
  }

  async createSession(title: string, spec: SpecView): Promise<void> {
    await this.mutate(() => this.api.createSession(title, spec));
    const session = this.store.state.session;
    if (session) this.store.set({ activePanel: 2 });
  }

  async generate(): Promise<void> {
    const session = this.requireSession();
    await this.mutate(() => this.api.generate(session.id));
    this.store.set({ activePanel: 2 });
  }

  /** Curation is explicit two-state toggling; each decision goes straight to
   * the server so it survives a page reload. */
  async decide(objectiveId: string, decision: "selected" | "rejected"): Promise<void> {
    const session = this.requireSession();
    await this.mutate(() => this.api.curate(session.id, { [objectiveId]: decision }));
  }

  async regenerate(feedback: string): Promise<void> {
    const session = this.requireSession();
    const keep = allCandidates(session)
      .filter((o) => o.curation === "selected")
      .map((o) => o.id);
    await this.mutate(() => this.api.regenerate(session.id, feedback, keep));
  }

  async analyze(): Promise<void> {
    const session = this.requireSession();
    await this.mutate(() => this.api.analyze(session.id));
    if (!this.store.state.error) this.store.set({ activePanel: 3 });
  }

  async draftAssessments(perObjective: number): Promise<void> {
    const session = this.requireSession();
    await this.mutate(() => this.api.draftAssessments(session.id, perObjective));
  }

  async finalize(): Promise<void> {
    const session = this.requireSession();
    await this.mutate(() => this.api.finalize(session.id));
  }

  async downloadReport(format: "json" | "markdown"): Promise<void> {
    const session = this.requireSession();
    try {
      const download = await this.api.downloadReport(session.id, format);
      this.store.set({
        lastDownload: { format, content: download.content, contentType: download.contentType },
        error: null,
      });
      this.saveToDisk(download.content, download.contentType, `report.${format === "json" ? "json" : "md"}`);
    } catch (error) {
      this.store.set({ error: error instanceof ApiError ? error.message : String(error) });
    }
  }

  private saveToDisk(content: string, contentType: string, filename: string): void {
    if (this.options.saveDownloads === false) return;
    if (typeof URL.createObjectURL !== "function") return; // non-browser host
    const url = URL.createObjectURL(new Blob([content], { type: contentType }));
    const anchor = document.createElement("a");
    anchor.href = url;
    anchor.download = filename;
    anchor.click();
    URL.revokeObjectURL(url);
  }

  setPanel(panel: 1 | 2 | 3): void {
    this.store.set({ activePanel: panel });
  }

  private requireSession(): SessionView {
    const session = this.store.state.session;
    if (!session) throw new Error("no active session");
    return session;
  }
}
