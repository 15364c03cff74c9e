// Thin typed client for the session API. The UI performs no action that
// lacks a route here, and renders only server-computed results.

import type { ObjectiveSetView, SessionView, SpecView } from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

export interface HealthView {
  status: string;
  backend: string;
  model: string;
  api: number;
}

export interface ReportDownload {
  content: string;
  contentType: string;
}

export class ArchedApi {
  constructor(private baseUrl: string = "") {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      method,
      headers: body !== undefined ? { "Content-Type": "application/json" } : {},
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    if (!response.ok) {
      let code = "internal";
      let message = `request failed with status ${response.status}`;
      try {
        const parsed = (await response.json()) as { code?: string; message?: string };
        code = parsed.code ?? code;
        message = parsed.message ?? message;
      } catch {
        // non-JSON error body; keep the defaults
      }
      throw new ApiError(response.status, code, message);
    }
    return (await response.json()) as T;
  }

  health(): Promise<HealthView> {
    return this.request("GET", "/api/health");
  }

  createSession(title: string, spec: SpecView): Promise<SessionView> {
    return this.request("POST", "/api/sessions", { title, spec });
  }

  getSession(id: string): Promise<SessionView> {
    return this.request("GET", `/api/sessions/${id}`);
  }

  updateSpec(id: string, spec: SpecView): Promise<SessionView> {
    return this.request("PATCH", `/api/sessions/${id}/spec`, spec);
  }

  generate(id: string): Promise<SessionView> {
    return this.request("POST", `/api/sessions/${id}/generate`);
  }

  regenerate(id: string, feedback: string, keep: string[]): Promise<SessionView> {
    return this.request("POST", `/api/sessions/${id}/regenerate`, { feedback, keep });
  }

  curate(id: string, decisions: Record<string, "selected" | "rejected">): Promise<SessionView> {
    return this.request("POST", `/api/sessions/${id}/curate`, { decisions });
  }

  analyze(id: string): Promise<SessionView> {
    return this.request("POST", `/api/sessions/${id}/analyze`);
  }

  draftAssessments(id: string, perObjective: number): Promise<SessionView> {
    return this.request("POST", `/api/sessions/${id}/assessments`, {
      per_objective: perObjective,
    });
  }

  finalize(id: string): Promise<SessionView> {
    return this.request("POST", `/api/sessions/${id}/finalize`);
  }

  importObjectives(format: "csv" | "json", content: string, sessionId?: string): Promise<SessionView | ObjectiveSetView> {
    return this.request("POST", "/api/import", {
      format,
      content,
      session_id: sessionId ?? null,
    });
  }

  async downloadReport(id: string, format: "json" | "markdown"): Promise<ReportDownload> {
    const response = await fetch(`${this.baseUrl}/api/sessions/${id}/report?format=${format}`);
    if (!response.ok) {
      throw new ApiError(response.status, "not-found", "report is not available yet");
    }
    return {
      content: await response.text(),
      contentType: response.headers.get("Content-Type") ?? "application/octet-stream",
    };
  }
}
