import { describe, expect, it } from "vitest";
import { ApiError, SceneServiceClient } from "../src/api";

interface Call {
  url: string;
  init?: RequestInit;
}

function stubFetch(
  responder: (url: string, init?: RequestInit) => {
    status?: number;
    json?: unknown;
    bytes?: Uint8Array;
    headers?: Record<string, string>;
  },
): { fetchFn: (url: string, init?: RequestInit) => Promise<Response>; calls: Call[] } {
  const calls: Call[] = [];
  const fetchFn = async (url: string, init?: RequestInit): Promise<Response> => {
    calls.push({ url, init });
    const spec = responder(url, init);
    const status = spec.status ?? 200;
    return {
      ok: status >= 200 && status < 300,
      status,
      headers: new Headers(spec.headers ?? {}),
      json: async () => spec.json,
      arrayBuffer: async () => (spec.bytes ?? new Uint8Array(0)).buffer,
    } as unknown as Response;
  };
  return { fetchFn, calls };
}

describe("SceneServiceClient", () => {
  it("lists scenes from the base url", async () => {
    const { fetchFn, calls } = stubFetch(() => ({
      json: { scenes: [{ id: "a", root_version: "v1", frames: 2 }] },
    }));
    const client = new SceneServiceClient("http://host", fetchFn);
    const scenes = await client.scenes();
    expect(scenes).toHaveLength(1);
    expect(scenes[0].id).toBe("a");
    expect(calls[0].url).toBe("http://host/scenes");
  });

  it("sends render requests as JSON and returns bytes with headers", async () => {
    const png = new Uint8Array([137, 80, 78, 71]);
    const { fetchFn, calls } = stubFetch(() => ({
      bytes: png,
      headers: { "x-scene-version": "v9", "x-render-millis": "12.5" },
    }));
    const client = new SceneServiceClient("", fetchFn);
    const result = await client.render("lot", { time: 0.25, version: "v9" });
    expect(result.png).toEqual(png);
    expect(result.version).toBe("v9");
    expect(result.millis).toBeCloseTo(12.5);
    expect(calls[0].url).toBe("/scenes/lot/render");
    expect(calls[0].init?.method).toBe("POST");
    expect(JSON.parse(String(calls[0].init?.body))).toEqual({ time: 0.25, version: "v9" });
  });

  it("maps string details to plain errors", async () => {
    const { fetchFn } = stubFetch(() => ({
      status: 404,
      json: { detail: "unknown scene 'x'" },
    }));
    const client = new SceneServiceClient("", fetchFn);
    await expect(client.versions("x")).rejects.toThrow("unknown scene 'x'");
  });

  it("maps 422 field lists onto ApiError.fields", async () => {
    const { fetchFn } = stubFetch(() => ({
      status: 422,
      json: {
        detail: [{ loc: ["body", "time"], msg: "outside the span", type: "value_error" }],
      },
    }));
    const client = new SceneServiceClient("", fetchFn);
    const err = await client
      .render("a", { time: 99 })
      .then(() => null)
      .catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    const api = err as ApiError;
    expect(api.status).toBe(422);
    expect(api.fields).toEqual([{ loc: ["body", "time"], msg: "outside the span" }]);
    expect(api.message).toContain("time");
    expect(api.message).toContain("outside the span");
  });

  it("escapes scene ids in paths", async () => {
    const { fetchFn, calls } = stubFetch(() => ({ json: { instances: [] } }));
    const client = new SceneServiceClient("", fetchFn);
    await client.instances("week 3", "v1");
    expect(calls[0].url).toBe("/scenes/week%203/instances?version=v1");
  });

  it("reports health as a boolean, even on connection failure", async () => {
    const down = new SceneServiceClient("", () => Promise.reject(new TypeError("refused")));
    expect(await down.health()).toBe(false);
    const { fetchFn } = stubFetch(() => ({}));
    const up = new SceneServiceClient("", fetchFn);
    expect(await up.health()).toBe(true);
  });
});
