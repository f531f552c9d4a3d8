/**
 * Typed client for the camgrid HTTP API.
 *
 * All state mutation goes through the documented POST/PUT/DELETE
 * endpoints; reads are plain GETs. A custom fetch implementation can be
 * injected for tests or request logging.
 */

export type Phase = "idle" | "previewing" | "streaming" | "error";

export interface DeviceInfo {
  name: string;
  kind: "video" | "audio";
  platform_hint: string;
}

export interface CameraInfo {
  camera_id: number;
  device_name: string;
  stale: boolean;
  saved_url: string | null;
  phase?: Phase;
  publish_url?: string | null;
  last_error?: string | null;
}

export interface Placement {
  camera_id: number;
  row: number;
  col: number;
}

export interface LayoutInfo {
  tile_width: number;
  tile_height: number;
  rows: number;
  max_columns: number;
  placements: Placement[];
}

export interface CameraStateInfo {
  camera_id: number;
  phase: Phase;
  publish_url: string | null;
  last_error: string | null;
}

export interface EventInfo {
  kind: string;
  camera_id: number;
  detail: string;
  timestamp: number;
}

export interface EventsPage {
  now: number;
  events: EventInfo[];
}

export interface AboutInfo {
  name: string;
  version: string;
  protocols: string[];
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public cameraId: number | null = null,
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private fetchImpl: FetchLike;

  constructor(private base: string = "", fetchImpl?: FetchLike) {
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(this.base + path, init);
    const payload = await response.json().catch(() => ({}));
    if (!response.ok) {
      const err = (payload as any)?.error ?? {};
      throw new ApiError(
        response.status,
        err.code ?? "internal",
        err.message ?? `HTTP ${response.status}`,
        err.camera_id ?? null,
      );
    }
    return payload as T;
  }

  getAbout(): Promise<AboutInfo> {
    return this.request("GET", "/about");
  }

  async getDevices(): Promise<DeviceInfo[]> {
    const page = await this.request<{ devices: DeviceInfo[] }>("GET", "/devices");
    return page.devices;
  }

  async refreshDevices(): Promise<DeviceInfo[]> {
    const page = await this.request<{ devices: DeviceInfo[] }>(
      "POST", "/devices/refresh");
    return page.devices;
  }

  async getCameras(): Promise<CameraInfo[]> {
    const page = await this.request<{ cameras: CameraInfo[] }>("GET", "/cameras");
    return page.cameras;
  }

  bindCamera(cameraId: number, deviceName: string): Promise<unknown> {
    return this.request("PUT", `/cameras/${cameraId}`, { device_name: deviceName });
  }

  getLayout(width?: number): Promise<LayoutInfo> {
    const query = width ? `?width=${width}` : "";
    return this.request("GET", `/layout${query}`);
  }

  showAll(): Promise<unknown> {
    return this.request("POST", "/actions/show-all");
  }

  showOne(cameraId: number): Promise<CameraStateInfo> {
    return this.request("POST", `/actions/show-one/${cameraId}`);
  }

  closeAll(): Promise<unknown> {
    return this.request("POST", "/actions/close-all");
  }

  plugFlow(cameraId: number, url: string): Promise<CameraStateInfo> {
    return this.request("POST", `/cameras/${cameraId}/plugflow`, { url });
  }

  stopFlow(cameraId: number): Promise<CameraStateInfo> {
    return this.request("DELETE", `/cameras/${cameraId}/plugflow`);
  }

  getEvents(since: number): Promise<EventsPage> {
    return this.request("GET", `/events?since=${since}`);
  }

  previewUrl(cameraId: number): string {
    return `${this.base}/cameras/${cameraId}/preview.mjpeg`;
  }
}
