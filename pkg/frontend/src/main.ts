/**
 * Panel entry point. One token prompt, then four live cards: devices,
 * security + alert feed, a camera view, and the remote desktop, plus a
 * small console for the paired phone. Everything talks to the HTTP
 * facade; the TCP wire never reaches the browser.
 */

import { ApiError, PanelApi, DesktopModel } from "./api.js";
import { HubStore, parseEventLine } from "./events.js";
import { FrameParser, decodeStamp } from "./frames.js";
import { parsePgm, pgmToRgba } from "./pgm.js";
import { optimistic } from "./optimistic.js";
import { scaleRect } from "./scale.js";

const api = new PanelApi("..");
const store = new HubStore();

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) {
    if (k === "class") node.className = v;
    else node.setAttribute(k, v);
  }
  node.append(...children);
  return node;
}

function byId<T extends HTMLElement>(id: string): T {
  return document.getElementById(id) as T;
}

function describeError(err: unknown): string {
  if (err instanceof ApiError) return `${err.code}: ${err.message}`;
  return err instanceof Error ? err.message : String(err);
}

// ---------------------------------------------------------------- login

async function login(): Promise<void> {
  const input = byId<HTMLInputElement>("token");
  const status = byId<HTMLElement>("login-status");
  try {
    const principal = await api.auth(input.value.trim());
    byId("login").hidden = true;
    byId("app").hidden = false;
    byId("who").textContent = `${principal}`;
    await refreshDevices();
    openEvents();
    void loadDesktop();
  } catch (err) {
    status.textContent = describeError(err);
  }
}

async function refreshDevices(): Promise<void> {
  store.loadDevices(await api.devices());
  const cams = byId<HTMLSelectElement>("camera-pick");
  cams.replaceChildren();
  for (const d of store.devices.values()) {
    if (d.kind === "camera") {
      cams.append(el("option", { value: d.id }, `${d.room}/${d.label}`));
    }
  }
}

// ----------------------------------------------------------- event feed

let source: EventSource | null = null;

function openEvents(): void {
  source?.close();
  source = new EventSource(api.eventsUrl({ topics: "state,alert,stream-meta", replay: 20 }));
  for (const topic of ["state", "alert", "stream-meta"]) {
    source.addEventListener(topic, (ev) => {
      store.apply(parseEventLine((ev as MessageEvent<string>).data));
    });
  }
  source.onopen = () => {
    byId("link-state").textContent = "live";
  };
  source.onerror = () => {
    byId("link-state").textContent = "reconnecting";
  };
}

// -------------------------------------------------------------- devices

function sendCommand(text: string, note?: HTMLElement): Promise<string[]> {
  const out = api.command(text);
  if (note) {
    out.then(
      (fields) => (note.textContent = fields.join(" ") || "ok"),
      (err) => (note.textContent = describeError(err)),
    );
  }
  return out;
}

function toggleText(state: string): { verb: string; next: string } {
  if (state === "on") return { verb: "off", next: "off" };
  if (state === "off") return { verb: "on", next: "on" };
  if (state.startsWith("level=")) {
    return state === "level=0"
      ? { verb: "on", next: "level=100" }
      : { verb: "off", next: "level=0" };
  }
  return { verb: "on", next: state };
}

function renderDevices(): void {
  const grid = byId("devices");
  grid.replaceChildren();
  for (const d of store.devices.values()) {
    const row = el("div", { class: "device" });
    row.append(
      el("span", { class: "ref" }, `${d.room}/${d.label}`),
      el("span", { class: "kind" }, d.kind),
      el("span", { class: "state" }, d.state),
    );
    if (["light", "tv", "pump", "fan", "ac"].includes(d.kind)) {
      const { verb, next } = toggleText(d.state);
      const btn = el("button", {}, verb === "on" ? "turn on" : "turn off");
      btn.onclick = () => {
        let revert = () => {};
        void optimistic({
          apply: () => {
            revert = store.setLocal(d.id, next);
          },
          rollback: () => revert(),
          mutate: () => api.command(`turn ${verb} ${d.room} ${d.label}`),
          onError: (err) => void (byId("device-note").textContent = describeError(err)),
        });
      };
      row.append(btn);
    }
    if (["fan", "ac"].includes(d.kind)) {
      const lvl = el("input", { type: "number", min: "0", max: "100", value: "50" });
      const set = el("button", {}, "set");
      set.onclick = () => {
        let revert = () => {};
        void optimistic({
          apply: () => {
            revert = store.setLocal(d.id, `level=${lvl.value}`);
          },
          rollback: () => revert(),
          mutate: () => api.command(`set ${d.room} ${d.label} to ${lvl.value}`),
          onError: (err) => void (byId("device-note").textContent = describeError(err)),
        });
      };
      row.append(lvl, set);
    }
    if (d.kind === "gate") {
      for (const verb of ["open", "close"]) {
        const btn = el("button", {}, verb);
        btn.onclick = () => void sendCommand(`${verb} ${d.room} ${d.label}`, byId("device-note"));
        row.append(btn);
      }
    }
    if (d.kind === "camera") {
      const btn = el("button", {}, "watch");
      btn.onclick = () => {
        byId<HTMLSelectElement>("camera-pick").value = d.id;
        startStream();
      };
      row.append(btn);
    }
    grid.append(row);
  }
  for (const [room, count] of store.occupancy) {
    byId("devices").append(el("div", { class: "device" }, `${room} occupancy: ${count}`));
  }
}

// ------------------------------------------------------------- security

function renderSecurity(): void {
  byId("sec-phase").textContent = store.securityPhase ?? "n/a";
  const list = byId("feed");
  list.replaceChildren();
  for (const ev of [...store.feed].reverse().slice(0, 30)) {
    const bits = Object.entries(ev.fields)
      .map(([k, v]) => `${k}=${v}`)
      .join(" ");
    const row = el("li", {}, `${ev.at} ${ev.kind} ${ev.subject} ${bits}`);
    const path = ev.fields["path"];
    if (ev.kind === "image-stored" && path) {
      const name = path.split("/").pop() ?? path;
      const view = el("button", {}, "view");
      view.onclick = () => void showIntrusion(name);
      row.append(" ", view);
    }
    list.append(row);
  }
}

function wireSecurity(): void {
  byId("set-number").onclick = () => {
    const number = byId<HTMLInputElement>("owner-number").value.trim();
    void sendCommand(`SETNUM ${number}`, byId("sec-note"));
  };
  byId("arm").onclick = () => void sendCommand("ARM", byId("sec-note"));
  byId("disarm").onclick = () => void sendCommand("DISARM", byId("sec-note"));
}

async function showIntrusion(name: string): Promise<void> {
  const note = byId("intrusion-note");
  try {
    const img = parsePgm(await api.intrusion(name));
    const canvas = byId<HTMLCanvasElement>("intrusion-canvas");
    canvas.width = img.width;
    canvas.height = img.height;
    const ctx = canvas.getContext("2d")!;
    ctx.putImageData(new ImageData(pgmToRgba(img), img.width, img.height), 0, 0);
    note.textContent = name;
  } catch (err) {
    note.textContent = describeError(err);
  }
}

// --------------------------------------------------------------- camera

let streamAbort: AbortController | null = null;

function startStream(): void {
  stopStream();
  const cameraId = byId<HTMLSelectElement>("camera-pick").value;
  if (!cameraId) return;
  const abort = new AbortController();
  streamAbort = abort;
  const canvas = byId<HTMLCanvasElement>("camera-canvas");
  const note = byId("camera-note");
  const parser = new FrameParser();
  let shown = 0;
  let fps = 0;
  let windowStart = performance.now();

  void (async () => {
    try {
      const res = await fetch(api.streamUrl(cameraId), { signal: abort.signal });
      if (!res.ok || !res.body) throw new Error(`stream failed: ${res.status}`);
      const reader = res.body.getReader();
      for (;;) {
        const { done, value } = await reader.read();
        if (done) break;
        for (const frame of parser.push(value)) {
          canvas.width = parser.width;
          canvas.height = parser.height;
          const rgba = new Uint8ClampedArray(parser.width * parser.height * 4);
          for (let i = 0; i < frame.pixels.length; i++) {
            rgba.set([frame.pixels[i], frame.pixels[i], frame.pixels[i], 255], i * 4);
          }
          const ctx = canvas.getContext("2d")!;
          ctx.putImageData(new ImageData(rgba, parser.width, parser.height), 0, 0);
          shown += 1;
          const now = performance.now();
          if (now - windowStart >= 1000) {
            fps = shown;
            shown = 0;
            windowStart = now;
          }
          const stamp = decodeStamp(frame.pixels);
          note.textContent =
            `seq ${stamp.seq} at ${stamp.atMs}ms | ${fps} fps | ` +
            `ok ${parser.accepted} stale ${parser.stale} missed ${parser.missed}`;
        }
      }
    } catch (err) {
      if (!abort.signal.aborted) note.textContent = describeError(err);
    }
  })();
}

function stopStream(): void {
  streamAbort?.abort();
  streamAbort = null;
}

// -------------------------------------------------------------- desktop

let desktopModel: DesktopModel | null = null;

async function loadDesktop(): Promise<void> {
  const note = byId("desktop-note");
  try {
    desktopModel = await api.desktop();
    drawDesktop();
    note.textContent = `running: ${desktopModel.running.join(", ") || "nothing"}`;
  } catch (err) {
    desktopModel = null;
    note.textContent = describeError(err);
  }
}

function drawDesktop(): void {
  const canvas = byId<HTMLCanvasElement>("desktop-canvas");
  const ctx = canvas.getContext("2d")!;
  ctx.fillStyle = "#1b2838";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  if (!desktopModel) return;
  for (const icon of desktopModel.icons) {
    const r = scaleRect(icon, desktopModel.width, desktopModel.height, canvas.width, canvas.height);
    ctx.fillStyle = desktopModel.running.includes(icon.name) ? "#4a8f5c" : "#3a506b";
    ctx.fillRect(r.x, r.y, r.w, r.h);
    ctx.fillStyle = "#e8e8e8";
    ctx.font = "10px sans-serif";
    ctx.fillText(icon.name, r.x + 2, r.y + r.h - 4);
  }
}

function wireDesktop(): void {
  const canvas = byId<HTMLCanvasElement>("desktop-canvas");
  canvas.onclick = (ev) => {
    // css pixels -> canvas pixels here; viewport -> desktop stays hub-side
    const box = canvas.getBoundingClientRect();
    const x = Math.floor(((ev.clientX - box.left) * canvas.width) / box.width);
    const y = Math.floor(((ev.clientY - box.top) * canvas.height) / box.height);
    void (async () => {
      const note = byId("desktop-note");
      try {
        const hit = await api.click(x, y, canvas.width, canvas.height);
        note.textContent = hit.hit ? `${hit.hit} ${hit.outcome}` : "no icon there";
        await loadDesktop();
      } catch (err) {
        note.textContent = describeError(err);
      }
    })();
  };
  byId("desktop-reload").onclick = () => void loadDesktop();
}

// ---------------------------------------------------------------- phone

function wirePhone(): void {
  const log = byId("phone-log");
  const print = (text: string) => {
    log.append(el("li", {}, text));
    while (log.childElementCount > 20) log.firstElementChild?.remove();
  };
  const reply = (line: string) =>
    api.command(line).then(
      (fields) => print(`> ${line}\n< ${fields.join(" ") || "ok"}`),
      (err) => print(`> ${line}\n! ${describeError(err)}`),
    );
  byId("phone-pair").onclick = () => {
    const id = byId<HTMLInputElement>("phone-id").value.trim();
    void reply(`PAIR ${id}`);
  };
  byId("phone-sever").onclick = () => {
    const id = byId<HTMLInputElement>("phone-id").value.trim();
    void reply(`SEVER ${id}`);
  };
  byId("phone-send").onclick = () => {
    const op = byId<HTMLInputElement>("phone-op").value.trim();
    if (op) void reply(`MOP ${op}`);
  };
}

// ----------------------------------------------------------------- init

store.onChange = () => {
  renderDevices();
  renderSecurity();
};

window.addEventListener("DOMContentLoaded", () => {
  byId("login-go").onclick = () => void login();
  byId<HTMLInputElement>("token").onkeydown = (ev) => {
    if (ev.key === "Enter") void login();
  };
  wireSecurity();
  wireDesktop();
  wirePhone();
  byId("camera-start").onclick = () => startStream();
  byId("camera-stop").onclick = () => stopStream();
  byId("intrusion-load").onclick = () => {
    const name = byId<HTMLInputElement>("intrusion-name").value.trim();
    if (name) void showIntrusion(name);
  };
});
