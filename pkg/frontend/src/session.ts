import {
  ApiError,
  type CameraOverride,
  type InstanceRow,
  type RenderResult,
  type SceneServiceClient,
  type SceneSummary,
  type VersionRow,
} from "./api";

export type Vec3 = [number, number, number];

export type CameraMode = "interpolated" | { kind: "free"; pose: CameraOverride };

export type EditDraft =
  | { kind: "remove"; instanceId: number }
  | { kind: "translate"; instanceId: number; delta: Vec3; from?: number; to?: number }
  | { kind: "insert"; source: string; sourceInstance: number; asId?: number; from?: number; to?: number };

export type CompareSide = "before" | "after";

export interface DisplayedFrame {
  png: Uint8Array;
  version: string;
  time: number;
  millis: number;
}

type Listener = () => void;

function formatNumber(v: number): string {
  if (!Number.isFinite(v)) throw new Error(`non-finite number in edit: ${v}`);
  return String(v);
}

/** Render an edit draft as one line of the service's script grammar. */
export function draftToScript(draft: EditDraft): string {
  const span = (d: { from?: number; to?: number }) =>
    (d.from !== undefined ? ` from=${formatNumber(d.from)}` : "") +
    (d.to !== undefined ? ` to=${formatNumber(d.to)}` : "");
  switch (draft.kind) {
    case "remove":
      return `remove id=${draft.instanceId}\n`;
    case "translate":
      return (
        `translate id=${draft.instanceId}` +
        ` delta=${draft.delta.map(formatNumber).join(",")}` +
        span(draft) +
        "\n"
      );
    case "insert":
      return (
        `insert source=${draft.source} id=${draft.sourceInstance}` +
        (draft.asId !== undefined ? ` as=${draft.asId}` : "") +
        span(draft) +
        "\n"
      );
  }
}

/** Client-side draft validation against the instance catalogs. Returns
 * human-readable problems; empty means submittable. */
export function validateDraft(
  draft: EditDraft,
  catalog: InstanceRow[],
  insertCatalog: InstanceRow[] | null,
): string[] {
  const problems: string[] = [];
  const byId = new Map(catalog.map((r) => [r.instance_id, r]));
  const spanned = draft.kind !== "remove" ? draft : null;
  if (spanned && spanned.from !== undefined && spanned.to !== undefined && spanned.from > spanned.to) {
    problems.push(`empty time span: from=${spanned.from} > to=${spanned.to}`);
  }

  if (draft.kind === "remove" || draft.kind === "translate") {
    const row = byId.get(draft.instanceId);
    if (!row) {
      problems.push(`instance ${draft.instanceId} is not in the catalog`);
    } else if (!row.dynamic) {
      problems.push(`instance ${draft.instanceId} is static; edits only reach dynamic content`);
    }
  }
  if (draft.kind === "translate" && draft.delta.some((v) => !Number.isFinite(v))) {
    problems.push("translation delta must be finite");
  }
  if (draft.kind === "insert") {
    if (!draft.source) {
      problems.push("insert needs a source scene");
    } else if (insertCatalog === null) {
      problems.push("source scene's catalog not loaded yet");
    } else if (!insertCatalog.some((r) => r.instance_id === draft.sourceInstance)) {
      problems.push(`instance ${draft.sourceInstance} is not in the source catalog`);
    }
    if (draft.asId !== undefined && byId.has(draft.asId)) {
      problems.push(`target id ${draft.asId} is already taken in this scene`);
    }
  }
  return problems;
}

/** One browser tab's view of one scene: current version, timeline position,
 * selection, pending draft, camera mode, and the before/after toggle.
 * Every displayed pixel is fetched from the service; nothing is rendered
 * or cached client-side. */
export class EditorSession {
  readonly sceneId: string;
  readonly span: [number, number];
  readonly keyframes: number[];
  readonly width: number;
  readonly height: number;

  private currentVersion: string;
  private parentVersion: string | null = null;
  private currentTime: number;
  private clampedCue = false;

  selectedInstance: number | null = null;
  draft: EditDraft | null = null;
  camera: CameraMode = "interpolated";
  compare: CompareSide = "after";

  private catalogRows: InstanceRow[] = [];
  private versionRows: VersionRow[] = [];
  private insertSourceId: string | null = null;
  private insertRows: InstanceRow[] | null = null;

  private frame: DisplayedFrame | null = null;
  private lastError: string | null = null;
  private readonly listeners = new Set<Listener>();

  private constructor(
    private readonly client: SceneServiceClient,
    summary: SceneSummary,
  ) {
    this.sceneId = summary.id;
    this.currentVersion = summary.root_version;
    this.span = summary.span ?? [0, 0];
    this.keyframes = summary.keyframes ?? [];
    this.width = summary.width ?? 0;
    this.height = summary.height ?? 0;
    this.currentTime = this.span[0];
  }

  /** Connect to a scene: summary, catalog, and version tree up front,
   * then the first frame at the start of the span. */
  static async open(client: SceneServiceClient, sceneId: string): Promise<EditorSession> {
    const summary = (await client.scenes()).find((s) => s.id === sceneId);
    if (!summary) throw new ApiError(404, `unknown scene ${sceneId}`);
    const session = new EditorSession(client, summary);
    await session.reloadCatalog();
    await session.reloadVersions();
    await session.refresh();
    return session;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.add(listener);
    return () => this.listeners.delete(listener);
  }

  private notify(): void {
    for (const l of this.listeners) l();
  }

  get version(): string {
    return this.currentVersion;
  }

  get parent(): string | null {
    return this.parentVersion;
  }

  get time(): number {
    return this.currentTime;
  }

  /** True when the last scrub had to be pulled back into the span. */
  get scrubClamped(): boolean {
    return this.clampedCue;
  }

  get catalog(): InstanceRow[] {
    return this.catalogRows;
  }

  get versionTree(): VersionRow[] {
    return this.versionRows;
  }

  get insertSource(): string | null {
    return this.insertSourceId;
  }

  get insertCatalog(): InstanceRow[] | null {
    return this.insertRows;
  }

  get displayedFrame(): DisplayedFrame | null {
    return this.frame;
  }

  get error(): string | null {
    return this.lastError;
  }

  /** The version whose pixels are on screen: the parent when the
   * comparison toggle is on "before", else the current version. */
  get displayedVersion(): string {
    if (this.compare === "before" && this.parentVersion) return this.parentVersion;
    return this.currentVersion;
  }

  clampTime(t: number): number {
    return Math.min(this.span[1], Math.max(this.span[0], t));
  }

  private renderCamera(): "interpolated" | CameraOverride {
    return this.camera === "interpolated" ? "interpolated" : this.camera.pose;
  }

  /** Fetch the frame for the current (time, camera, displayed version). */
  async refresh(): Promise<void> {
    try {
      const result: RenderResult = await this.client.render(this.sceneId, {
        time: this.currentTime,
        version: this.displayedVersion,
        camera: this.renderCamera(),
      });
      this.frame = {
        png: result.png,
        version: result.version,
        time: this.currentTime,
        millis: result.millis,
      };
      this.lastError = null;
    } catch (e) {
      // keep the session (and the stale frame) intact; just show the banner
      this.lastError = e instanceof Error ? e.message : String(e);
    }
    this.notify();
  }

  async reloadCatalog(): Promise<void> {
    this.catalogRows = await this.client.instances(this.sceneId, this.currentVersion);
  }

  async reloadVersions(): Promise<void> {
    this.versionRows = await this.client.versions(this.sceneId);
  }

  /** Move the timeline and fetch that frame. Out-of-span targets are
   * clamped and flagged so the UI can show the cue. */
  async scrub(t: number): Promise<void> {
    const clamped = this.clampTime(t);
    this.clampedCue = clamped !== t;
    this.currentTime = clamped;
    await this.refresh();
  }

  select(instanceId: number | null): void {
    this.selectedInstance = instanceId;
    this.notify();
  }

  setCompare(side: CompareSide): Promise<void> {
    this.compare = side;
    return this.refresh();
  }

  setFreeLook(pose: CameraOverride): Promise<void> {
    this.camera = { kind: "free", pose };
    return this.refresh();
  }

  setInterpolated(): Promise<void> {
    this.camera = "interpolated";
    return this.refresh();
  }

  /** Load a donor scene's catalog for insert drafts. */
  async loadInsertSource(sceneId: string): Promise<void> {
    this.insertSourceId = sceneId;
    this.insertRows = await this.client.instances(sceneId);
    this.notify();
  }

  setDraft(draft: EditDraft | null): void {
    this.draft = draft;
    this.notify();
  }

  draftProblems(): string[] {
    if (!this.draft) return ["no pending edit"];
    return validateDraft(this.draft, this.catalogRows, this.insertRows);
  }

  /** Submit the pending draft. On success the session moves onto the new
   * version (its base becomes the "before" side) and re-renders at the
   * same time and camera. Validation or server rejections land in the
   * error banner; the draft stays for correction. */
  async submitDraft(label?: string): Promise<boolean> {
    if (!this.draft) return false;
    const problems = this.draftProblems();
    if (problems.length > 0) {
      this.lastError = problems.join("; ");
      this.notify();
      return false;
    }
    const script = draftToScript(this.draft);
    try {
      const response = await this.client.applyEdit(this.sceneId, {
        script,
        base_version: this.currentVersion,
        label,
      });
      this.parentVersion = this.currentVersion;
      this.currentVersion = response.version;
      if (this.draft.kind === "remove" && this.selectedInstance === this.draft.instanceId) {
        this.selectedInstance = null;
      }
      this.draft = null;
      this.compare = "after";
      await this.reloadCatalog();
      await this.reloadVersions();
      await this.refresh();
      return true;
    } catch (e) {
      this.lastError = e instanceof Error ? e.message : String(e);
      this.notify();
      return false;
    }
  }

  /** Jump to any version in the tree. History is immutable; this only
   * changes which node the session points at. */
  async switchToVersion(versionId: string): Promise<void> {
    const row = this.versionRows.find((v) => v.id === versionId);
    if (!row) {
      this.lastError = `unknown version ${versionId}`;
      this.notify();
      return;
    }
    this.currentVersion = row.id;
    this.parentVersion = row.parent;
    this.compare = "after";
    await this.reloadCatalog();
    await this.refresh();
  }
}
