// Thin typed client over the documented workbench HTTP API.
// No privileged backdoor: everything the UI knows arrives through here.

import type {
  ItemDetail,
  ItemSummary,
  MetricsDocument,
  RunCreate,
  RunSummary,
} from './types.js';

export class ApiRequestError extends Error {
  readonly status: number;
  readonly errorCode: string;

  constructor(status: number, errorCode: string, message: string) {
    super(message);
    this.status = status;
    this.errorCode = errorCode;
  }
}

async function parseError(response: Response): Promise<ApiRequestError> {
  let code = 'unknown_error';
  let message = `${response.status}`;
  try {
    const body = (await response.json()) as { error_code?: string; message?: string };
    code = body.error_code ?? code;
    message = body.message ?? message;
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiRequestError(response.status, code, message);
}

export class ApiClient {
  constructor(private readonly baseUrl: string) {}

  private url(path: string): string {
    return `${this.baseUrl.replace(/\/$/, '')}${path}`;
  }

  private async getJson<T>(path: string): Promise<T> {
    const response = await fetch(this.url(path));
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const response = await fetch(this.url(path), {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(body),
    });
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  createRun(body: RunCreate): Promise<RunSummary> {
    return this.postJson('/runs', body);
  }

  getRun(runId: string): Promise<RunSummary> {
    return this.getJson(`/runs/${runId}`);
  }

  listItems(runId: string, status?: 'pending' | 'judged', category?: string): Promise<ItemSummary[]> {
    const params = new URLSearchParams();
    if (status) params.set('status', status);
    if (category) params.set('category', category);
    const suffix = params.size > 0 ? `?${params.toString()}` : '';
    return this.getJson<{ items: ItemSummary[] }>(`/runs/${runId}/items${suffix}`).then(
      (body) => body.items,
    );
  }

  getItem(itemId: string): Promise<ItemDetail> {
    return this.getJson(`/items/${itemId}`);
  }

  submitJudgment(
    itemId: string,
    answerCorrect: boolean,
    entityExists: boolean,
    reviewer: string,
  ): Promise<{ item_id: string; version: number }> {
    return this.postJson(`/items/${itemId}/judgment`, {
      answer_correct: answerCorrect,
      entity_exists: entityExists,
      reviewer,
    });
  }

  getMetrics(runId: string): Promise<MetricsDocument> {
    return this.getJson(`/runs/${runId}/metrics`);
  }

  /** Raw body bytes of the metrics document, for contract checks. */
  async getMetricsRaw(runId: string): Promise<string> {
    const response = await fetch(this.url(`/runs/${runId}/metrics`));
    if (!response.ok) throw await parseError(response);
    return response.text();
  }
}
