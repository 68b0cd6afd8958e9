/** Node-side plumbing for tests: a fetch over node:http (the happy-dom
 * global fetch is a browser emulation; tests talk to a real local server),
 * a zlib inflate for the PNG reader, and a harness that synthesizes a
 * scene directory and runs the engine's HTTP service on a free port. */

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { request } from "node:http";
import { createServer } from "node:net";
import { mkdirSync, mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { inflateSync } from "node:zlib";

export const inflate = (data: Uint8Array): Uint8Array =>
  new Uint8Array(inflateSync(data));

/** Minimal fetch adapter for absolute http:// URLs. */
export function httpFetch(url: string, init?: RequestInit): Promise<Response> {
  return new Promise((resolve, reject) => {
    const req = request(
      url,
      {
        method: init?.method ?? "GET",
        headers: (init?.headers as Record<string, string>) ?? {},
      },
      (res) => {
        const chunks: Buffer[] = [];
        res.on("data", (c: Buffer) => chunks.push(c));
        res.on("end", () => {
          const body = Buffer.concat(chunks);
          const status = res.statusCode ?? 0;
          const headers = new Headers();
          for (const [k, v] of Object.entries(res.headers)) {
            if (typeof v === "string") headers.set(k, v);
          }
          resolve({
            ok: status >= 200 && status < 300,
            status,
            headers,
            json: async () => JSON.parse(body.toString("utf8")),
            arrayBuffer: async () =>
              body.buffer.slice(body.byteOffset, body.byteOffset + body.byteLength),
            text: async () => body.toString("utf8"),
          } as unknown as Response);
        });
      },
    );
    req.on("error", reject);
    if (init?.body) req.write(init.body);
    req.end();
  });
}

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.once("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const addr = probe.address();
      if (addr === null || typeof addr === "string") {
        reject(new Error("no port assigned"));
        return;
      }
      probe.close(() => resolve(addr.port));
    });
  });
}

export interface EngineHarness {
  baseUrl: string;
  sceneDir: string;
  stop(): void;
}

/** Synthesize the given scene descriptions into a fresh directory and
 * serve them with the real engine process. */
export async function startEngine(scenes: Record<string, string>): Promise<EngineHarness> {
  const root = mkdtempSync(join(tmpdir(), "splat4d-editor-"));
  const sceneDir = join(root, "scenes");
  mkdirSync(sceneDir);
  for (const [id, description] of Object.entries(scenes)) {
    const specPath = join(root, `${id}.txt`);
    writeFileSync(specPath, description);
    execFileSync("splat4d", ["synth", "--spec", specPath, "--out", join(sceneDir, `${id}.dggt`)]);
  }

  const port = await freePort();
  const child: ChildProcess = spawn(
    "splat4d",
    ["serve", "--scenes", sceneDir, "--host", "127.0.0.1", "--port", String(port)],
    { stdio: "ignore" },
  );
  const baseUrl = `http://127.0.0.1:${port}`;

  const deadline = Date.now() + 30_000;
  for (;;) {
    try {
      const res = await httpFetch(`${baseUrl}/healthz`);
      if (res.ok) break;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) {
      child.kill();
      throw new Error("engine did not come up within 30s");
    }
    await new Promise((r) => setTimeout(r, 150));
  }

  return {
    baseUrl,
    sceneDir,
    stop() {
      child.kill();
      rmSync(root, { recursive: true, force: true });
    },
  };
}
