/** DOM shell around an EditorSession. Everything here is session state,
 * validation, and display; the pixels always come from the service. */

import type { SceneServiceClient, SceneSummary } from "./api";
import { EditorSession, type EditDraft, type Vec3 } from "./session";
import { defaultIntrinsics, OrbitCamera } from "./orbit";

export interface EditorShell {
  readonly root: HTMLElement;
  readonly client: SceneServiceClient;
  session: EditorSession | null;
  openScene(id: string): Promise<void>;
  /** Resolves when every operation started so far has settled. */
  idle(): Promise<void>;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text !== undefined) node.textContent = text;
  return node;
}

const TIMELINE_STEPS = 400;

export function buildEditor(root: HTMLElement, client: SceneServiceClient): EditorShell {
  const pending = new Set<Promise<unknown>>();
  const track = <T>(p: Promise<T>): Promise<T> => {
    pending.add(p);
    p.finally(() => pending.delete(p));
    return p;
  };

  // --- static skeleton ---------------------------------------------------
  const sceneSelect = el("select", { id: "scene-select" });
  const banner = el("div", { id: "error-banner", hidden: "" });
  const img = el("img", { id: "viewport-img", alt: "rendered frame" });
  const statusLine = el("div", { id: "status-line" });

  const timeline = el("input", {
    id: "timeline",
    type: "range",
    min: "0",
    max: String(TIMELINE_STEPS),
    step: "1",
  });
  const timeLabel = el("span", { id: "time-label" }, "t=0");
  const tickRow = el("div", { id: "tick-row" });

  const compareBefore = el("button", { id: "toggle-before", disabled: "" }, "before");
  const compareAfter = el("button", { id: "toggle-after", class: "active" }, "after");
  const camInterp = el("button", { id: "cam-interp", class: "active" }, "drive cam");
  const camFree = el("button", { id: "cam-free" }, "free look");
  const orbitButtons: Record<string, HTMLButtonElement> = {
    left: el("button", { id: "orbit-left" }, "←"),
    right: el("button", { id: "orbit-right" }, "→"),
    up: el("button", { id: "orbit-up" }, "↑"),
    down: el("button", { id: "orbit-down" }, "↓"),
    in: el("button", { id: "orbit-in" }, "+"),
    out: el("button", { id: "orbit-out" }, "−"),
  };

  const instanceList = el("ul", { id: "instance-list" });
  const versionList = el("ul", { id: "version-list" });

  const editKind = el("select", { id: "edit-kind" });
  for (const kind of ["remove", "translate", "insert"]) {
    editKind.append(el("option", { value: kind }, kind));
  }
  const editId = el("input", { id: "edit-id", type: "number", placeholder: "instance id" });
  const dx = el("input", { id: "edit-dx", type: "number", value: "0", step: "any" });
  const dy = el("input", { id: "edit-dy", type: "number", value: "0", step: "any" });
  const dz = el("input", { id: "edit-dz", type: "number", value: "0", step: "any" });
  const fromInput = el("input", { id: "edit-from", type: "number", step: "any", placeholder: "from" });
  const toInput = el("input", { id: "edit-to", type: "number", step: "any", placeholder: "to" });
  const insertSource = el("select", { id: "insert-source" });
  const insertId = el("input", { id: "insert-id", type: "number", placeholder: "source instance" });
  const insertAs = el("input", { id: "insert-as", type: "number", placeholder: "new id (optional)" });
  const labelInput = el("input", { id: "edit-label", type: "text", placeholder: "label (optional)" });
  const stageButton = el("button", { id: "btn-stage" }, "stage");
  const submitButton = el("button", { id: "btn-submit", disabled: "" }, "apply edit");
  const problemsBox = el("ul", { id: "draft-problems" });

  const header = el("header");
  header.append(el("span", { class: "brand" }, "splat4d editor"), sceneSelect);

  const viewport = el("div", { id: "viewport" });
  viewport.append(img, statusLine);

  const compareRow = el("div", { id: "compare-row" });
  compareRow.append(compareBefore, compareAfter, camInterp, camFree);
  for (const b of Object.values(orbitButtons)) compareRow.append(b);

  const timelineRow = el("div", { id: "timeline-row" });
  timelineRow.append(timeline, timeLabel);

  const editForm = el("div", { id: "edit-form" });
  editForm.append(
    editKind, editId, dx, dy, dz, fromInput, toInput,
    insertSource, insertId, insertAs, labelInput,
    stageButton, submitButton, problemsBox,
  );

  const sidebar = el("aside", { id: "sidebar" });
  sidebar.append(
    el("h2", {}, "instances"), instanceList,
    el("h2", {}, "versions"), versionList,
    el("h2", {}, "edit"), editForm,
  );

  const main = el("main");
  main.append(viewport, compareRow, tickRow, timelineRow);
  root.append(header, banner, main, sidebar);

  // --- state -------------------------------------------------------------
  let session: EditorSession | null = null;
  let summaries: SceneSummary[] = [];
  let orbit: OrbitCamera | null = null;
  let objectUrl: string | null = null;
  let unsubscribe: (() => void) | null = null;

  const shell: EditorShell = {
    root,
    client,
    get session() {
      return session;
    },
    set session(_s) {
      throw new Error("session is managed by the shell");
    },
    openScene,
    async idle() {
      while (pending.size > 0) {
        await Promise.allSettled([...pending]);
      }
    },
  };

  function sliderToTime(raw: string): number {
    if (!session) return 0;
    const [lo, hi] = session.span;
    return lo + (Number(raw) / TIMELINE_STEPS) * (hi - lo);
  }

  function timeToSlider(t: number): string {
    if (!session) return "0";
    const [lo, hi] = session.span;
    if (hi <= lo) return "0";
    return String(Math.round(((t - lo) / (hi - lo)) * TIMELINE_STEPS));
  }

  function showFrame(): void {
    if (!session?.displayedFrame) return;
    const frame = session.displayedFrame;
    try {
      const url = URL.createObjectURL(new Blob([frame.png.buffer as ArrayBuffer], { type: "image/png" }));
      if (objectUrl) URL.revokeObjectURL(objectUrl);
      objectUrl = url;
      img.src = url;
    } catch {
      // environments without object URLs (tests) still track the bytes
    }
    statusLine.textContent =
      `${frame.version} @ t=${frame.time.toFixed(3)}s (${frame.millis.toFixed(1)} ms)`;
  }

  function renderState(): void {
    if (!session) return;
    banner.hidden = session.error === null;
    banner.textContent = session.error ?? "";

    timeLabel.textContent = `t=${session.time.toFixed(3)}`;
    timeLabel.classList.toggle("clamped", session.scrubClamped);
    timeline.value = timeToSlider(session.time);

    compareBefore.disabled = session.parent === null;
    compareBefore.classList.toggle("active", session.compare === "before");
    compareAfter.classList.toggle("active", session.compare === "after");
    camInterp.classList.toggle("active", session.camera === "interpolated");
    camFree.classList.toggle("active", session.camera !== "interpolated");

    instanceList.replaceChildren();
    for (const row of session.catalog) {
      const badge = row.inserted ? "inserted" : row.dynamic ? "dynamic" : "static";
      const item = el(
        "li",
        { "data-id": String(row.instance_id) },
        `#${row.instance_id} (${row.total_count} splats, ${badge})`,
      );
      item.classList.toggle("selected", session.selectedInstance === row.instance_id);
      item.addEventListener("click", () => {
        session?.select(row.instance_id);
        editId.value = String(row.instance_id);
      });
      instanceList.append(item);
    }

    versionList.replaceChildren();
    for (const row of session.versionTree) {
      const name = row.label ? `${row.id} [${row.label}]` : row.id;
      const item = el("li", { "data-version": row.id }, name);
      item.classList.toggle("selected", row.id === session.version);
      item.addEventListener("click", () => {
        if (session) track(session.switchToVersion(row.id));
      });
      versionList.append(item);
    }

    const problems = session.draft ? session.draftProblems() : [];
    problemsBox.replaceChildren(...problems.map((p) => el("li", {}, p)));
    submitButton.disabled = session.draft === null || problems.length > 0;

    showFrame();
  }

  function renderTicks(): void {
    tickRow.replaceChildren();
    if (!session) return;
    const [lo, hi] = session.span;
    for (const k of session.keyframes) {
      const tick = el("div", { class: "keyframe-tick", "data-time": String(k) });
      const frac = hi > lo ? (k - lo) / (hi - lo) : 0;
      tick.style.left = `${(frac * 100).toFixed(2)}%`;
      tick.title = `keyframe t=${k}`;
      tickRow.append(tick);
    }
  }

  async function openScene(id: string): Promise<void> {
    unsubscribe?.();
    session = await EditorSession.open(client, id);
    unsubscribe = session.subscribe(renderState);
    orbit = null;
    sceneSelect.value = id;
    insertSource.replaceChildren(
      ...summaries.map((s) => el("option", { value: s.id }, s.id)),
    );
    insertSource.value = id;
    renderTicks();
    renderState();
  }

  async function loadSceneList(): Promise<void> {
    summaries = await client.scenes();
    sceneSelect.replaceChildren(
      ...summaries.map((s) => el("option", { value: s.id }, s.id)),
    );
    if (summaries.length > 0) await openScene(summaries[0].id);
  }

  // --- wiring ------------------------------------------------------------
  sceneSelect.addEventListener("change", () => track(openScene(sceneSelect.value)));

  timeline.addEventListener("input", () => {
    if (session) track(session.scrub(sliderToTime(timeline.value)));
  });

  compareBefore.addEventListener("click", () => {
    if (session) track(session.setCompare("before"));
  });
  compareAfter.addEventListener("click", () => {
    if (session) track(session.setCompare("after"));
  });

  camInterp.addEventListener("click", () => {
    if (session) track(session.setInterpolated());
  });
  camFree.addEventListener("click", () => {
    if (!session) return;
    if (!orbit) {
      orbit = OrbitCamera.aroundInstances(
        session.catalog,
        defaultIntrinsics(session.width, session.height),
      );
    }
    track(session.setFreeLook(orbit.pose()));
  });
  const nudge = (dYaw: number, dPitch: number, zoom = 1) => () => {
    if (!session || !orbit) return;
    orbit.rotate(dYaw, dPitch);
    if (zoom !== 1) orbit.zoom(zoom);
    track(session.setFreeLook(orbit.pose()));
  };
  orbitButtons.left.addEventListener("click", nudge(-0.15, 0));
  orbitButtons.right.addEventListener("click", nudge(0.15, 0));
  orbitButtons.up.addEventListener("click", nudge(0, -0.1));
  orbitButtons.down.addEventListener("click", nudge(0, 0.1));
  orbitButtons.in.addEventListener("click", nudge(0, 0, 0.8));
  orbitButtons.out.addEventListener("click", nudge(0, 0, 1.25));

  insertSource.addEventListener("change", () => {
    if (session) track(session.loadInsertSource(insertSource.value));
  });

  stageButton.addEventListener("click", () => {
    if (!session) return;
    const kind = editKind.value as EditDraft["kind"];
    const span: { from?: number; to?: number } = {};
    if (fromInput.value !== "") span.from = Number(fromInput.value);
    if (toInput.value !== "") span.to = Number(toInput.value);
    let draft: EditDraft;
    if (kind === "remove") {
      draft = { kind, instanceId: Number(editId.value) };
    } else if (kind === "translate") {
      const delta: Vec3 = [Number(dx.value), Number(dy.value), Number(dz.value)];
      draft = { kind, instanceId: Number(editId.value), delta, ...span };
    } else {
      draft = {
        kind,
        source: insertSource.value,
        sourceInstance: Number(insertId.value),
        ...(insertAs.value !== "" ? { asId: Number(insertAs.value) } : {}),
        ...span,
      };
      if (session.insertSource !== insertSource.value) {
        track(session.loadInsertSource(insertSource.value).then(() => renderState()));
      }
    }
    session.setDraft(draft);
  });

  submitButton.addEventListener("click", () => {
    if (session) {
      track(session.submitDraft(labelInput.value || undefined));
    }
  });

  track(loadSceneList());
  return shell;
}
