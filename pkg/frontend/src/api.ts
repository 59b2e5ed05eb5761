/** Typed client for the reshaping service's REST schema. */

export type Waypoint = [number, number, number, number];

export interface TrajectoryDto {
  waypoints: Waypoint[];
}

export interface SceneObjectDto {
  name: string;
  position: [number, number, number];
}

export interface SceneDto {
  objects: SceneObjectDto[];
}

export interface AttentionDto {
  encoder: number[][][];
  decoder_self: number[][][];
  decoder_cross: number[][][];
}

export interface ReshapeResponse {
  text: string;
  lf: number;
  original: TrajectoryDto;
  modified: TrajectoryDto;
  clipped: TrajectoryDto;
  similarity: number[];
  attention: AttentionDto | null;
  accepted: boolean;
}

export interface SessionState {
  id: string;
  engine: string;
  scene: SceneDto;
  current: TrajectoryDto;
  history: { text: string; lf: number }[];
  history_depth: number;
  pending: unknown;
}

export interface Health {
  status: string;
  engine: string;
  checkpoint: string | null;
  lf_enabled: boolean;
}

export interface CreateSessionRequest {
  scene: SceneDto;
  trajectory?: TrajectoryDto;
  seed?: number;
  engine?: string;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public field?: string,
  ) {
    super(message);
  }
}

/** What the UI needs from the server; tests substitute a scripted fake. */
export interface Api {
  healthz(): Promise<Health>;
  createSession(req: CreateSessionRequest): Promise<SessionState>;
  getSession(id: string): Promise<SessionState>;
  reshape(
    id: string,
    text: string,
    lf: number | null,
    wantAttention: boolean,
  ): Promise<ReshapeResponse>;
  accept(id: string): Promise<SessionState>;
  undo(id: string): Promise<SessionState>;
}

async function parseError(resp: Response): Promise<never> {
  let code = "http_error";
  let message = `request failed with status ${resp.status}`;
  let field: string | undefined;
  try {
    const body = await resp.json();
    if (body && body.error) {
      code = body.error.code ?? code;
      message = body.error.message ?? message;
      field = body.error.field;
    }
  } catch {
    // non-JSON error body: keep the generic message
  }
  throw new ApiError(resp.status, code, message, field);
}

export class HttpApi implements Api {
  constructor(private base: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await fetch(this.base + path, {
      headers: { "Content-Type": "application/json" },
      ...init,
    });
    if (!resp.ok) await parseError(resp);
    return (await resp.json()) as T;
  }

  healthz(): Promise<Health> {
    return this.request("/healthz");
  }

  async createSession(req: CreateSessionRequest): Promise<SessionState> {
    const out = await this.request<{ id: string; state: SessionState }>(
      "/sessions",
      { method: "POST", body: JSON.stringify(req) },
    );
    return out.state;
  }

  getSession(id: string): Promise<SessionState> {
    return this.request(`/sessions/${id}`);
  }

  reshape(
    id: string,
    text: string,
    lf: number | null,
    wantAttention: boolean,
  ): Promise<ReshapeResponse> {
    const query = wantAttention ? "?attn=1" : "";
    const body: Record<string, unknown> = { text };
    if (lf !== null) body.lf = lf;
    return this.request(`/sessions/${id}/reshape${query}`, {
      method: "POST",
      body: JSON.stringify(body),
    });
  }

  accept(id: string): Promise<SessionState> {
    return this.request(`/sessions/${id}/accept`, { method: "POST" });
  }

  undo(id: string): Promise<SessionState> {
    return this.request(`/sessions/${id}/undo`, { method: "POST" });
  }
}
