/**
 * Typed client for the study service HTTP API.
 *
 * Deliberately thin: the four endpoints, JSON in and out, and typed
 * errors for the two outcomes the page has to handle specially
 * (service failures and the already-voted conflict).
 */

export interface ComparisonCreated {
  id: string;
  first: string;
  second: string;
}

export type ChoiceWire = "first" | "second" | "same";

export interface StatsTableWire {
  rows: string[];
  columns: string[];
  cells: number[][];
  row_totals: number[];
  col_totals: number[];
  n: number;
}

export interface StatsResponse {
  n: number;
  table: StatsTableWire | null;
  random_retention_baseline: number;
}

export class ServiceError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = "ServiceError";
  }
}

/** The vote was already recorded for this comparison (HTTP 409). */
export class ConflictError extends ServiceError {
  constructor(message: string) {
    super(409, message);
    this.name = "ConflictError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

const defaultFetch: FetchLike = (input, init) => fetch(input, init);

export class StudyClient {
  constructor(
    private readonly fetchFn: FetchLike = defaultFetch,
    private readonly baseUrl: string = "",
  ) {}

  async createComparison(prompt: string): Promise<ComparisonCreated> {
    const response = await this.fetchFn(`${this.baseUrl}/api/comparisons`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ prompt }),
    });
    if (!response.ok) {
      throw new ServiceError(response.status, await safeDetail(response));
    }
    return (await response.json()) as ComparisonCreated;
  }

  async submitPreference(id: string, choice: ChoiceWire): Promise<void> {
    const response = await this.fetchFn(
      `${this.baseUrl}/api/comparisons/${encodeURIComponent(id)}/preference`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ choice }),
      },
    );
    if (response.status === 409) {
      throw new ConflictError(await safeDetail(response));
    }
    if (!response.ok) {
      throw new ServiceError(response.status, await safeDetail(response));
    }
  }

  async fetchStats(): Promise<StatsResponse> {
    const response = await this.fetchFn(`${this.baseUrl}/api/stats`);
    if (!response.ok) {
      throw new ServiceError(response.status, await safeDetail(response));
    }
    return (await response.json()) as StatsResponse;
  }
}

async function safeDetail(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: string };
    return body.detail ?? `HTTP ${response.status}`;
  } catch {
    return `HTTP ${response.status}`;
  }
}
