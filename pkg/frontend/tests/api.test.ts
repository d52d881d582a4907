import { describe, expect, it } from "vitest";

import { ApiError, PanelApi } from "../src/api";

interface Call {
  url: string;
  init?: RequestInit;
}

function fakeFetch(
  handler: (url: string, init?: RequestInit) => Response,
): { calls: Call[]; fn: typeof fetch } {
  const calls: Call[] = [];
  const fn = (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    calls.push({ url, init });
    return handler(url, init);
  }) as typeof fetch;
  return { calls, fn };
}

function json(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

describe("PanelApi", () => {
  it("authenticates and then sends the bearer header everywhere", async () => {
    const { calls, fn } = fakeFetch((url) =>
      url.endsWith("/auth")
        ? json({ principal: "owner" })
        : json({ devices: [], security: "ready" }),
    );
    const api = new PanelApi("", fn);
    expect(await api.auth("hunter2")).toBe("owner");
    expect(api.principal).toBe("owner");

    await api.devices();
    const headers = calls[1].init?.headers as Record<string, string>;
    expect(headers["authorization"]).toBe("Bearer hunter2");
  });

  it("posts command text and unwraps the reply fields", async () => {
    const { calls, fn } = fakeFetch(() => json({ fields: ["kitchen", "tube", "on"] }));
    const api = new PanelApi("", fn);
    const fields = await api.command("turn on kitchen tube");
    expect(fields).toEqual(["kitchen", "tube", "on"]);
    expect(JSON.parse(String(calls[0].init?.body))).toEqual({
      text: "turn on kitchen tube",
      channel: "panel",
    });
  });

  it("lifts hub error envelopes into ApiError", async () => {
    const { fn } = fakeFetch(() =>
      json({ error: "ETARGET", message: "no device named sauna" }, 404),
    );
    const api = new PanelApi("", fn);
    const err = await api.command("turn on sauna").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.code).toBe("ETARGET");
    expect(err.status).toBe(404);
    expect(err.message).toBe("no device named sauna");
  });

  it("degrades non-hub error bodies to the status", async () => {
    const { fn } = fakeFetch(() => new Response("<html>bad gateway</html>", { status: 502 }));
    const api = new PanelApi("", fn);
    const err = await api.devices().catch((e) => e);
    expect(err.code).toBe("EHTTP");
    expect(err.status).toBe(502);
  });

  it("builds streaming urls with the token in the query", async () => {
    const { fn } = fakeFetch(() => json({ principal: "owner" }));
    const api = new PanelApi("", fn);
    await api.auth("tok");
    expect(api.eventsUrl({ topics: "state,alert", replay: 5 })).toBe(
      "/events?token=tok&topics=state%2Calert&replay=5",
    );
    expect(api.streamUrl("d8", 10)).toBe("/stream/d8?token=tok&frames=10");
  });

  it("fetches intrusion images as raw bytes", async () => {
    const { calls, fn } = fakeFetch(
      () => new Response(new Uint8Array([80, 53, 10]).buffer, { status: 200 }),
    );
    const api = new PanelApi("", fn);
    const bytes = await api.intrusion("2026-01-01T00:00:07.500Z-d8.pgm");
    expect([...bytes]).toEqual([80, 53, 10]);
    expect(calls[0].url).toBe("/intrusions/2026-01-01T00%3A00%3A07.500Z-d8.pgm");
  });
});
