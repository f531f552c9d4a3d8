/**
 * Operator console: camera grid with live MJPEG tiles and per-tile
 * plug-flow controls, media panel with bind controls, About dialog.
 *
 * The console mutates server state only through the documented
 * POST/PUT/DELETE endpoints and keeps at most one in-flight mutation
 * per tile (the button is disabled while a request is pending). Phase
 * badges update from /events polling at 1 Hz.
 */

import { ApiClient, ApiError } from "./api.js";
import type { CameraInfo, DeviceInfo, LayoutInfo } from "./api.js";
import {
  buildTiles,
  gridContentHeight,
  tilePosition,
  TileViewModel,
} from "./viewmodel.js";

type Section = "cameras" | "media" | "about";

const POLL_INTERVAL_MS = 1000;

export class ConsoleApp {
  private drafts = new Map<number, string>();
  private pending = new Set<number>();
  private inlineErrors = new Map<number, string>();
  private section: Section = "cameras";
  private eventCursor = 0;
  private pollTimer: ReturnType<typeof setInterval> | null = null;
  private layout: LayoutInfo | null = null;
  private cameras: CameraInfo[] = [];
  private devices: DeviceInfo[] = [];

  constructor(
    private root: HTMLElement,
    private client: ApiClient,
    private screenWidth: () => number = () => window.innerWidth,
  ) {}

  async init(): Promise<void> {
    this.root.innerHTML = "";
    this.root.appendChild(this.buildShell());
    await this.refreshAll();
    const page = await this.client.getEvents(0);
    this.eventCursor = page.now;
    this.pollTimer = setInterval(() => void this.pollEvents(), POLL_INTERVAL_MS);
  }

  dispose(): void {
    if (this.pollTimer !== null) clearInterval(this.pollTimer);
  }

  // -- data -----------------------------------------------------------

  async refreshAll(): Promise<void> {
    [this.layout, this.cameras] = await Promise.all([
      this.client.getLayout(this.screenWidth()),
      this.client.getCameras(),
    ]);
    this.renderSection();
  }

  private async pollEvents(): Promise<void> {
    try {
      const page = await this.client.getEvents(this.eventCursor);
      this.eventCursor = page.now;
      if (page.events.length > 0) {
        await this.refreshAll();
      }
    } catch {
      // transient polling failures are retried on the next tick
    }
  }

  // -- shell ----------------------------------------------------------

  private buildShell(): HTMLElement {
    const shell = el("div", "shell");
    const sidebar = el("nav", "sidebar");
    for (const section of ["cameras", "media", "about"] as Section[]) {
      const button = el("button", `nav-${section}`);
      button.textContent = section[0].toUpperCase() + section.slice(1);
      button.addEventListener("click", () => {
        this.section = section;
        this.renderSection();
      });
      sidebar.appendChild(button);
    }
    shell.appendChild(sidebar);
    shell.appendChild(el("main", "content"));
    return shell;
  }

  private content(): HTMLElement {
    return this.root.querySelector(".content") as HTMLElement;
  }

  renderSection(): void {
    const content = this.content();
    content.innerHTML = "";
    if (this.section === "cameras") {
      content.appendChild(this.buildCamerasView());
    } else if (this.section === "media") {
      content.appendChild(this.buildMediaView());
    } else {
      content.appendChild(this.buildAboutView());
    }
  }

  // -- cameras view -----------------------------------------------------

  private buildCamerasView(): HTMLElement {
    const view = el("div", "cameras-view");
    const actions = el("div", "actions");
    actions.appendChild(this.actionButton("show-all", "Show All",
      () => this.client.showAll()));
    actions.appendChild(this.actionButton("close-all", "Close All",
      () => this.client.closeAll()));
    view.appendChild(actions);

    if (!this.layout || this.layout.placements.length === 0) {
      const empty = el("p", "empty-state");
      empty.textContent = "No cameras bound. Bind one from the Media panel.";
      view.appendChild(empty);
      return view;
    }
    const grid = el("div", "grid");
    grid.style.position = "relative";
    grid.style.height = `${gridContentHeight(this.layout)}px`;
    const tiles = buildTiles(this.layout, this.cameras, this.drafts);
    for (const tile of tiles) {
      grid.appendChild(this.buildTile(tile));
    }
    view.appendChild(grid);
    return view;
  }

  private actionButton(cls: string, label: string,
                       action: () => Promise<unknown>): HTMLElement {
    const button = el("button", `action ${cls}`) as HTMLButtonElement;
    button.textContent = label;
    button.addEventListener("click", async () => {
      button.disabled = true;
      try {
        await action();
        await this.refreshAll();
      } finally {
        button.disabled = false;
      }
    });
    return button;
  }

  private buildTile(tile: TileViewModel): HTMLElement {
    const node = el("div", `tile phase-${tile.phase}`);
    node.dataset.cameraId = String(tile.cameraId);
    const position = tilePosition(tile);
    node.style.position = "absolute";
    node.style.left = `${position.left}px`;
    node.style.top = `${position.top}px`;
    node.style.width = `${tile.tileWidth}px`;

    const header = el("div", "tile-header");
    const label = el("span", "tile-label");
    label.textContent = `video ${tile.cameraId}`;
    const badge = el("span", `tile-badge badge-${tile.phase}`);
    badge.textContent = tile.phase + (tile.stale ? " (stale)" : "");
    header.appendChild(label);
    header.appendChild(badge);
    node.appendChild(header);

    const image = el("img", "tile-image") as HTMLImageElement;
    image.width = tile.tileWidth;
    image.height = tile.tileHeight;
    image.style.width = `${tile.tileWidth}px`;
    image.style.height = `${tile.tileHeight}px`;
    if (tile.phase === "previewing" || tile.phase === "streaming") {
      image.src = this.client.previewUrl(tile.cameraId);
    }
    if (tile.phase === "streaming") {
      image.classList.add("frozen");
    }
    node.appendChild(image);

    const controls = el("div", "tile-controls");
    const input = el("input", "tile-url") as HTMLInputElement;
    input.placeholder = "udp://host:port";
    input.value = tile.urlDraft;
    input.addEventListener("input", () => {
      this.drafts.set(tile.cameraId, input.value);
    });
    controls.appendChild(input);

    const button = el("button", "tile-plugflow") as HTMLButtonElement;
    if (tile.phase === "streaming") {
      button.textContent = `stop flow ${tile.cameraId}`;
      button.addEventListener("click",
        () => void this.submitStopFlow(tile.cameraId, button));
    } else {
      button.textContent = `plug flow ${tile.cameraId} ->`;
      button.addEventListener("click",
        () => void this.submitPlugflow(tile.cameraId, input, button));
    }
    button.disabled = this.pending.has(tile.cameraId);
    controls.appendChild(button);
    node.appendChild(controls);

    const message = tile.lastError ?? this.inlineErrors.get(tile.cameraId);
    const errorLine = el("div", "tile-error");
    errorLine.textContent = message ?? "";
    node.appendChild(errorLine);
    return node;
  }

  async submitPlugflow(cameraId: number, input: HTMLInputElement,
                       button: HTMLButtonElement): Promise<void> {
    if (this.pending.has(cameraId)) return;
    this.pending.add(cameraId);
    button.disabled = true;
    try {
      await this.client.plugFlow(cameraId, input.value);
      this.inlineErrors.delete(cameraId);
      await this.refreshAll();
    } catch (error) {
      // Caller faults show inline without clearing the draft.
      const message = error instanceof ApiError ? error.message : String(error);
      this.inlineErrors.set(cameraId, message);
      this.renderSection();
    } finally {
      this.pending.delete(cameraId);
      button.disabled = false;
    }
  }

  async submitStopFlow(cameraId: number,
                       button: HTMLButtonElement): Promise<void> {
    if (this.pending.has(cameraId)) return;
    this.pending.add(cameraId);
    button.disabled = true;
    try {
      await this.client.stopFlow(cameraId);
      this.inlineErrors.delete(cameraId);
      await this.refreshAll();
    } catch (error) {
      const message = error instanceof ApiError ? error.message : String(error);
      this.inlineErrors.set(cameraId, message);
      this.renderSection();
    } finally {
      this.pending.delete(cameraId);
      button.disabled = false;
    }
  }

  // -- media view --------------------------------------------------------

  private buildMediaView(): HTMLElement {
    const view = el("div", "media-view");
    const refresh = el("button", "media-refresh") as HTMLButtonElement;
    refresh.textContent = "List Media";
    refresh.addEventListener("click", async () => {
      refresh.disabled = true;
      try {
        this.devices = await this.client.refreshDevices();
        this.renderSection();
      } finally {
        refresh.disabled = false;
      }
    });
    view.appendChild(refresh);

    const table = el("div", "media-table");
    if (this.devices.length === 0) {
      const empty = el("p", "media-empty");
      empty.textContent = "No devices listed. Click List Media to refresh.";
      table.appendChild(empty);
    }
    for (const device of this.devices) {
      const row = el("div", `media-row kind-${device.kind}`);
      const kind = el("span", "media-kind");
      kind.textContent = device.kind;
      const name = el("span", "media-name");
      name.textContent = device.name;
      row.appendChild(kind);
      row.appendChild(name);
      if (device.kind === "video") {
        const idInput = el("input", "bind-id") as HTMLInputElement;
        idInput.type = "number";
        idInput.min = "0";
        idInput.value = "0";
        const bind = el("button", "bind-button") as HTMLButtonElement;
        bind.textContent = "Select";
        bind.addEventListener("click", async () => {
          bind.disabled = true;
          try {
            await this.client.bindCamera(Number(idInput.value), device.name);
            await this.refreshAll();
          } finally {
            bind.disabled = false;
          }
        });
        row.appendChild(idInput);
        row.appendChild(bind);
      }
      table.appendChild(row);
    }
    view.appendChild(table);
    return view;
  }

  // -- about view ----------------------------------------------------------

  private buildAboutView(): HTMLElement {
    const view = el("div", "about-view");
    const heading = el("h2", "about-name");
    const version = el("p", "about-version");
    const protocols = el("p", "about-protocols");
    view.appendChild(heading);
    view.appendChild(version);
    view.appendChild(protocols);
    void this.client.getAbout().then((about) => {
      heading.textContent = about.name;
      version.textContent = `version ${about.version}`;
      protocols.textContent = `streams over ${about.protocols.join(", ")}`;
    });
    return view;
  }

  async loadDevices(): Promise<void> {
    this.devices = await this.client.getDevices();
  }
}

function el(tag: string, className: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  return node;
}
