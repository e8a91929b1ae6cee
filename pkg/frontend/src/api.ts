import type { QudBundle, Schema, StoredAnnotation, SubmitReceipt, Task } from "./types";

export class ApiRequestError extends Error {
  constructor(
    public status: number,
    public errorType: string,
    public detail: string,
  ) {
    super(`${errorType}: ${detail}`);
  }
}

type FetchFn = typeof fetch;

export class AnnotationApi {
  constructor(
    private baseUrl: string,
    private token: string,
    private fetchFn: FetchFn = globalThis.fetch.bind(globalThis),
  ) {}

  private async request<T>(path: string, init: RequestInit = {}): Promise<T> {
    const headers: Record<string, string> = {
      Authorization: `Bearer ${this.token}`,
      ...(init.body ? { "Content-Type": "application/json" } : {}),
    };
    const response = await this.fetchFn(`${this.baseUrl}${path}`, { ...init, headers });
    const text = await response.text();
    const payload = text ? JSON.parse(text) : {};
    if (!response.ok) {
      throw new ApiRequestError(
        response.status,
        payload.error ?? "HttpError",
        payload.detail ?? response.statusText,
      );
    }
    return payload as T;
  }

  schema(): Promise<Schema> {
    return this.request<Schema>("/schema");
  }

  async nextTask(): Promise<Task | null> {
    const payload = await this.request<{ task: Task | null }>("/task/next");
    return payload.task;
  }

  qud(qudId: string): Promise<QudBundle> {
    return this.request<QudBundle>(`/qud/${qudId}`);
  }

  submit(taskId: string, body: Record<string, string>): Promise<SubmitReceipt> {
    return this.request<SubmitReceipt>(`/task/${taskId}/submit`, {
      method: "POST",
      body: JSON.stringify(body),
    });
  }

  skip(taskId: string): Promise<{ skipped: boolean }> {
    return this.request(`/task/${taskId}/skip`, { method: "POST" });
  }

  async myAnnotations(): Promise<StoredAnnotation[]> {
    const payload = await this.request<{ annotations: StoredAnnotation[] }>(
      "/annotations/mine",
    );
    return payload.annotations;
  }

  assetUrl(imageUrl: string): string {
    return `${this.baseUrl}${imageUrl}`;
  }
}
