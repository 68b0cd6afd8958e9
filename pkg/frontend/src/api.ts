/** Typed client for the scene service. Every pixel and every fact shown in
 * the editor comes through here; the client holds no scene math. */

export interface SceneSummary {
  id: string;
  root_version: string;
  frames: number;
  width?: number;
  height?: number;
  span?: [number, number];
  keyframes?: number[];
}

export interface InstanceRow {
  instance_id: number;
  total_count: number;
  dynamic: boolean;
  inserted: boolean;
  bbox_min: [number, number, number];
  bbox_max: [number, number, number];
}

export interface VersionRow {
  id: string;
  parent: string | null;
  label: string | null;
}

export interface CameraOverride {
  fx: number;
  fy: number;
  cx: number;
  cy: number;
  rotation: [number, number, number, number];
  translation: [number, number, number];
}

export interface RenderRequest {
  time: number;
  version?: string;
  camera?: "interpolated" | CameraOverride;
  width?: number;
  height?: number;
}

export interface RenderResult {
  png: Uint8Array;
  version: string;
  millis: number;
}

export interface EditRequest {
  script: string;
  base_version?: string;
  label?: string;
}

export interface EditResponse {
  version: string;
  created: boolean;
}

/** One entry of a 422 validation detail. */
export interface FieldError {
  loc: string[];
  msg: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
    readonly fields: FieldError[] = [],
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function raiseForStatus(res: Response): Promise<never> {
  let detail: unknown = null;
  try {
    detail = (await res.json()).detail;
  } catch {
    // non-JSON error body; fall through with the status line only
  }
  if (Array.isArray(detail)) {
    const fields = detail.map((d) => ({
      loc: (d.loc ?? []).map(String),
      msg: String(d.msg ?? ""),
    }));
    const msg = fields.map((f) => `${f.loc.join(".")}: ${f.msg}`).join("; ");
    throw new ApiError(res.status, msg || `request failed (${res.status})`, fields);
  }
  const msg = typeof detail === "string" ? detail : `request failed (${res.status})`;
  throw new ApiError(res.status, msg);
}

export class SceneServiceClient {
  private readonly fetchFn: FetchLike;

  constructor(
    private readonly baseUrl: string = "",
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  private async getJson<T>(path: string): Promise<T> {
    const res = await this.fetchFn(this.baseUrl + path);
    if (!res.ok) await raiseForStatus(res);
    return (await res.json()) as T;
  }

  async health(): Promise<boolean> {
    try {
      const res = await this.fetchFn(this.baseUrl + "/healthz");
      return res.ok;
    } catch {
      return false;
    }
  }

  async scenes(): Promise<SceneSummary[]> {
    const body = await this.getJson<{ scenes: SceneSummary[] }>("/scenes");
    return body.scenes;
  }

  async instances(sceneId: string, version?: string): Promise<InstanceRow[]> {
    const q = version ? `?version=${encodeURIComponent(version)}` : "";
    const body = await this.getJson<{ instances: InstanceRow[] }>(
      `/scenes/${encodeURIComponent(sceneId)}/instances${q}`,
    );
    return body.instances;
  }

  async versions(sceneId: string): Promise<VersionRow[]> {
    const body = await this.getJson<{ versions: VersionRow[] }>(
      `/scenes/${encodeURIComponent(sceneId)}/versions`,
    );
    return body.versions;
  }

  async render(sceneId: string, req: RenderRequest): Promise<RenderResult> {
    const res = await this.fetchFn(
      `${this.baseUrl}/scenes/${encodeURIComponent(sceneId)}/render`,
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(req),
      },
    );
    if (!res.ok) await raiseForStatus(res);
    const png = new Uint8Array(await res.arrayBuffer());
    return {
      png,
      version: res.headers.get("x-scene-version") ?? "",
      millis: Number(res.headers.get("x-render-millis") ?? "0"),
    };
  }

  async applyEdit(sceneId: string, req: EditRequest): Promise<EditResponse> {
    const res = await this.fetchFn(
      `${this.baseUrl}/scenes/${encodeURIComponent(sceneId)}/edits`,
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(req),
      },
    );
    if (!res.ok) await raiseForStatus(res);
    return (await res.json()) as EditResponse;
  }
}
