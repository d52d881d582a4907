/**
 * Thin client for the hub's HTTP facade.
 *
 * JSON endpoints authenticate with a bearer header. The two streaming
 * endpoints (`/events`, `/stream/{camera}`) get the token as a query
 * parameter instead, because EventSource cannot set request headers.
 */

export class ApiError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export interface DeviceRow {
  id: string;
  kind: string;
  room: string;
  label: string;
  state: string;
}

export interface DeviceListing {
  devices: DeviceRow[];
  security?: string;
}

export interface DesktopIcon {
  name: string;
  x: number;
  y: number;
  w: number;
  h: number;
}

export interface DesktopModel {
  width: number;
  height: number;
  icons: DesktopIcon[];
  running: string[];
}

export interface ClickResult {
  hit: string | null;
  outcome?: string;
}

type FetchFn = typeof fetch;

export class PanelApi {
  token = "";
  principal = "";

  constructor(
    private readonly base: string = "",
    private readonly fetchFn: FetchFn = fetch,
  ) {}

  async auth(token: string): Promise<string> {
    const out = await this.post<{ principal: string }>("/auth", { token });
    this.token = token;
    this.principal = out.principal;
    return out.principal;
  }

  devices(): Promise<DeviceListing> {
    return this.get<DeviceListing>("/devices");
  }

  /**
   * Send either grammar text ("turn on kitchen tube") or a raw wire line
   * (SETNUM / ARM / PAIR / MOP / ...). The facade routes both through the
   * same endpoint and answers with the wire reply fields.
   */
  async command(text: string, channel = "panel"): Promise<string[]> {
    const out = await this.post<{ fields: string[] }>("/command", {
      text,
      channel,
    });
    return out.fields;
  }

  desktop(): Promise<DesktopModel> {
    return this.get<DesktopModel>("/desktop");
  }

  async click(x: number, y: number, w: number, h: number): Promise<ClickResult> {
    return this.post<ClickResult>("/click", { x, y, w, h });
  }

  async intrusion(name: string): Promise<Uint8Array> {
    const res = await this.fetchFn(this.base + "/intrusions/" + encodeURIComponent(name), {
      headers: this.headers(),
    });
    if (!res.ok) throw await this.unwrap(res);
    return new Uint8Array(await res.arrayBuffer());
  }

  eventsUrl(opts?: { topics?: string; replay?: number }): string {
    const params = new URLSearchParams({ token: this.token });
    if (opts?.topics) params.set("topics", opts.topics);
    if (opts?.replay) params.set("replay", String(opts.replay));
    return `${this.base}/events?${params}`;
  }

  streamUrl(cameraId: string, frames?: number): string {
    const params = new URLSearchParams({ token: this.token });
    if (frames !== undefined) params.set("frames", String(frames));
    return `${this.base}/stream/${encodeURIComponent(cameraId)}?${params}`;
  }

  private headers(): Record<string, string> {
    return this.token ? { authorization: `Bearer ${this.token}` } : {};
  }

  private async get<T>(path: string): Promise<T> {
    const res = await this.fetchFn(this.base + path, { headers: this.headers() });
    if (!res.ok) throw await this.unwrap(res);
    return (await res.json()) as T;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const res = await this.fetchFn(this.base + path, {
      method: "POST",
      headers: { "content-type": "application/json", ...this.headers() },
      body: JSON.stringify(body),
    });
    if (!res.ok) throw await this.unwrap(res);
    return (await res.json()) as T;
  }

  private async unwrap(res: Response): Promise<ApiError> {
    // hub errors arrive as {"error": code, "message": text}; anything else
    // (proxy pages, validation bodies) degrades to the status line
    try {
      const body = (await res.json()) as { error?: string; message?: string };
      if (body && typeof body.error === "string") {
        return new ApiError(body.error, body.message ?? "", res.status);
      }
      return new ApiError("EHTTP", JSON.stringify(body), res.status);
    } catch {
      return new ApiError("EHTTP", `${res.status} ${res.statusText}`, res.status);
    }
  }
}
