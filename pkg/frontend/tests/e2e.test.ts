/** Scripted session against the real engine: synthesize a street scene,
 * serve it, drive the editor DOM end to end, and check the pixels that
 * come back. The removed car must change only its own footprint; every
 * background pixel must survive byte-for-byte. */

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { SceneServiceClient } from "../src/api";
import { decodePng, changedPixels } from "../src/png";
import { buildEditor, type EditorShell } from "../src/ui";
import { httpFetch, inflate, startEngine, type EngineHarness } from "./helpers";

const WIDTH = 64;
const HEIGHT = 48;

// Two well-separated objects: the car (instance 7) drives on the left of
// the frame, a static box sits on the right. At t=0.75 the car's splats,
// including their truncated tails, stay inside this pixel band; everything
// outside is background for the removal check.
const CAR_COLS: [number, number] = [8, 34];
const CAR_ROWS: [number, number] = [17, 38];

const STREET = `scene width=${WIDTH} height=${HEIGHT} frames=3 dt=0.5
camera fx=60 fy=60 cx=31.5 cy=23.5
sky radius=100 count=128 seed=5
ground axis=y offset=1.5 color=0.4,0.4,0.38
box center=-2,0.5,8 size=1.6,1,1.2 color=0.9,0.15,0.1 velocity=0.8,0,0 instance=7
box center=2.2,0.5,9 size=1.6,1,1.2 color=0.1,0.2,0.9 instance=3
`;

let engine: EngineHarness;
let shell: EditorShell;

function click(selector: string): void {
  const node = document.querySelector<HTMLElement>(selector);
  if (!node) throw new Error(`missing element ${selector}`);
  node.click();
}

function frameBytes(): Uint8Array {
  const frame = shell.session?.displayedFrame;
  if (!frame) throw new Error("no frame displayed");
  return frame.png;
}

async function scrubTo(time: number): Promise<void> {
  const slider = document.querySelector<HTMLInputElement>("#timeline");
  if (!slider) throw new Error("missing timeline");
  const session = shell.session;
  if (!session) throw new Error("no session");
  const [lo, hi] = session.span;
  slider.value = String(Math.round(((time - lo) / (hi - lo)) * 400));
  slider.dispatchEvent(new Event("input"));
  await shell.idle();
}

beforeAll(async () => {
  engine = await startEngine({ street: STREET });
  document.body.innerHTML = '<div id="app"></div>';
  const root = document.getElementById("app");
  if (!root) throw new Error("no mount point");
  shell = buildEditor(root, new SceneServiceClient(engine.baseUrl, httpFetch));
  await shell.idle();
}, 120_000);

afterAll(() => {
  engine?.stop();
});

describe("editor end to end", () => {
  let parentAt075: Uint8Array;
  let childAt075: Uint8Array;
  let parentVersion: string;
  let childVersion: string;

  it("loads the synthetic scene with its catalog and keyframe ticks", async () => {
    const session = shell.session;
    expect(session).not.toBeNull();
    expect(session?.sceneId).toBe("street");
    expect(session?.span).toEqual([0, 1]);
    expect(session?.width).toBe(WIDTH);

    const ids = session!.catalog.map((r) => r.instance_id).sort();
    expect(ids).toEqual([3, 7]);
    expect(session!.catalog.find((r) => r.instance_id === 7)?.dynamic).toBe(true);
    expect(session!.catalog.find((r) => r.instance_id === 3)?.dynamic).toBe(false);

    const ticks = document.querySelectorAll(".keyframe-tick");
    expect([...ticks].map((t) => t.getAttribute("data-time"))).toEqual(["0", "0.5", "1"]);
  }, 60_000);

  it("scrubs to a non-keyframe time and gets an interpolated frame", async () => {
    await scrubTo(0.5);
    const atKeyframe = frameBytes();

    await scrubTo(0.75);
    expect(shell.session?.time).toBeCloseTo(0.75, 12);
    expect(shell.session?.scrubClamped).toBe(false);
    const midway = frameBytes();
    parentAt075 = midway;
    parentVersion = shell.session!.version;

    await scrubTo(1.0);
    const atEnd = frameBytes();

    // the car moves, so the interpolated frame matches neither keyframe
    expect(Buffer.compare(Buffer.from(midway), Buffer.from(atKeyframe))).not.toBe(0);
    expect(Buffer.compare(Buffer.from(midway), Buffer.from(atEnd))).not.toBe(0);

    const image = decodePng(midway, inflate);
    expect(image.width).toBe(WIDTH);
    expect(image.height).toBe(HEIGHT);

    await scrubTo(0.75);
  }, 60_000);

  it("removes the car through the UI and re-renders on the new version", async () => {
    click('#instance-list li[data-id="7"]');
    await shell.idle();
    expect(shell.session?.selectedInstance).toBe(7);

    const kind = document.querySelector<HTMLSelectElement>("#edit-kind");
    kind!.value = "remove";
    click("#btn-stage");
    await shell.idle();
    expect(document.querySelectorAll("#draft-problems li")).toHaveLength(0);

    const submit = document.querySelector<HTMLButtonElement>("#btn-submit");
    expect(submit?.disabled).toBe(false);
    click("#btn-submit");
    await shell.idle();

    const session = shell.session!;
    expect(session.error).toBeNull();
    childVersion = session.version;
    expect(childVersion).not.toBe(parentVersion);
    expect(session.parent).toBe(parentVersion);
    expect(session.catalog.map((r) => r.instance_id)).toEqual([3]);
    expect(session.time).toBeCloseTo(0.75, 12);

    childAt075 = frameBytes();
    expect(Buffer.compare(Buffer.from(childAt075), Buffer.from(parentAt075))).not.toBe(0);
  }, 60_000);

  it("changed the car's footprint and nothing else, byte for byte", () => {
    const before = decodePng(parentAt075, inflate);
    const after = decodePng(childAt075, inflate);
    const changed = changedPixels(before, after);

    expect(changed.length).toBeGreaterThan(20);
    for (const i of changed) {
      const col = i % WIDTH;
      const row = Math.floor(i / WIDTH);
      expect(col).toBeGreaterThanOrEqual(CAR_COLS[0]);
      expect(col).toBeLessThanOrEqual(CAR_COLS[1]);
      expect(row).toBeGreaterThanOrEqual(CAR_ROWS[0]);
      expect(row).toBeLessThanOrEqual(CAR_ROWS[1]);
    }

    // the background: every pixel outside the car band, compared directly
    let checked = 0;
    for (let row = 0; row < HEIGHT; row++) {
      for (let col = 0; col < WIDTH; col++) {
        const inBand =
          col >= CAR_COLS[0] && col <= CAR_COLS[1] && row >= CAR_ROWS[0] && row <= CAR_ROWS[1];
        if (inBand) continue;
        const at = (row * WIDTH + col) * 3;
        expect(before.pixels[at]).toBe(after.pixels[at]);
        expect(before.pixels[at + 1]).toBe(after.pixels[at + 1]);
        expect(before.pixels[at + 2]).toBe(after.pixels[at + 2]);
        checked += 1;
      }
    }
    expect(checked).toBeGreaterThan((WIDTH * HEIGHT) / 2);
  });

  it("flips before/after between the parent and child versions", async () => {
    click("#toggle-before");
    await shell.idle();
    expect(shell.session?.displayedVersion).toBe(parentVersion);
    expect(shell.session?.displayedFrame?.version).toBe(parentVersion);
    expect(Buffer.compare(Buffer.from(frameBytes()), Buffer.from(parentAt075))).toBe(0);

    click("#toggle-after");
    await shell.idle();
    expect(shell.session?.displayedVersion).toBe(childVersion);
    expect(Buffer.compare(Buffer.from(frameBytes()), Buffer.from(childAt075))).toBe(0);
  }, 60_000);

  it("shows both versions in the tree and returns to the parent without mutation", async () => {
    const rows = shell.session!.versionTree;
    expect(rows.map((v) => v.id)).toContain(parentVersion);
    expect(rows.map((v) => v.id)).toContain(childVersion);
    expect(rows.find((v) => v.id === childVersion)?.parent).toBe(parentVersion);

    click(`#version-list li[data-version="${parentVersion}"]`);
    await shell.idle();
    expect(shell.session?.version).toBe(parentVersion);
    expect(shell.session?.catalog.map((r) => r.instance_id).sort()).toEqual([3, 7]);
    expect(Buffer.compare(Buffer.from(frameBytes()), Buffer.from(parentAt075))).toBe(0);
  }, 60_000);

  it("keeps free-look renders on the service's camera override path", async () => {
    click(`#version-list li[data-version="${childVersion}"]`);
    await shell.idle();
    click("#cam-free");
    await shell.idle();
    expect(shell.session?.camera).not.toBe("interpolated");
    expect(shell.session?.error).toBeNull();
    const freeLook = frameBytes();
    expect(decodePng(freeLook, inflate).width).toBe(WIDTH);
    expect(Buffer.compare(Buffer.from(freeLook), Buffer.from(childAt075))).not.toBe(0);

    click("#orbit-left");
    await shell.idle();
    expect(shell.session?.error).toBeNull();
    expect(Buffer.compare(Buffer.from(frameBytes()), Buffer.from(freeLook))).not.toBe(0);

    click("#cam-interp");
    await shell.idle();
    expect(Buffer.compare(Buffer.from(frameBytes()), Buffer.from(childAt075))).toBe(0);
  }, 60_000);
});
