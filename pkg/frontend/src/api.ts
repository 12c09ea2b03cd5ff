import type {
  FairnessResponse,
  Snapshot,
  TaskView,
  TaxonomyTree,
  VerdictAck,
  VerdictPayload,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function raiseForStatus(response: Response): Promise<Response> {
  if (response.ok || response.status === 204) return response;
  let code = `http_${response.status}`;
  let message = response.statusText;
  try {
    const body = await response.json();
    if (body && typeof body === "object") {
      code = body.code ?? code;
      message = body.message ?? message;
    }
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(response.status, code, message);
}

/** Thin typed client for the review API; fetch is injectable for tests. */
export class Client {
  constructor(
    private baseUrl = "",
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const response = await raiseForStatus(await this.fetchFn(this.baseUrl + path));
    return (await response.json()) as T;
  }

  async taxonomy(): Promise<TaxonomyTree> {
    return this.getJson("/api/taxonomy");
  }

  /** Returns null when the queue is idle (204). */
  async nextTask(annotator: string): Promise<TaskView | null> {
    const response = await raiseForStatus(
      await this.fetchFn(
        `${this.baseUrl}/api/tasks/next?annotator=${encodeURIComponent(annotator)}`,
      ),
    );
    if (response.status === 204) return null;
    return (await response.json()) as TaskView;
  }

  async submitVerdict(taskId: string, payload: VerdictPayload): Promise<VerdictAck> {
    const response = await raiseForStatus(
      await this.fetchFn(`${this.baseUrl}/api/tasks/${taskId}/verdict`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(payload),
      }),
    );
    return (await response.json()) as VerdictAck;
  }

  async retrain(): Promise<{ version: number }> {
    const response = await raiseForStatus(
      await this.fetchFn(`${this.baseUrl}/api/retrain`, { method: "POST" }),
    );
    return (await response.json()) as { version: number };
  }

  async metrics(version: number, batch: string): Promise<Snapshot> {
    return this.getJson(`/api/metrics/${version}/${encodeURIComponent(batch)}`);
  }

  async fairness(
    version: number,
    batch: string,
    groupA: string,
    groupB: string,
  ): Promise<FairnessResponse> {
    return this.getJson(
      `/api/fairness/${version}/${encodeURIComponent(batch)}` +
        `?a=${encodeURIComponent(groupA)}&b=${encodeURIComponent(groupB)}`,
    );
  }
}
