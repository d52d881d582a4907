/**
 * Event-line parsing and the panel's view of hub state.
 *
 * The SSE endpoint relays log records verbatim:
 *
 *     <seq>\t<iso-8601>\t<kind>\t<subject>\t<key>=<value>...
 *
 * seq is strictly increasing, but a reconnect with replay can hand us
 * records we already consumed, and an optimistic local write can race the
 * authoritative record. The store resolves both the same way: per target,
 * the highest seq wins and anything at or below it is ignored.
 */

export interface HubEvent {
  seq: number;
  at: string;
  kind: string;
  subject: string;
  fields: Record<string, string>;
}

export function unescapeValue(value: string): string {
  let out = "";
  let i = 0;
  while (i < value.length) {
    const ch = value[i];
    if (ch === "\\" && i + 1 < value.length) {
      const nxt = value[i + 1];
      out += nxt === "t" ? "\t" : nxt === "n" ? "\n" : nxt === "r" ? "\r" : nxt;
      i += 2;
    } else {
      out += ch;
      i += 1;
    }
  }
  return out;
}

export function parseEventLine(line: string): HubEvent {
  const parts = line.replace(/\n$/, "").split("\t");
  if (parts.length < 4) throw new Error(`short event record: ${line}`);
  const seq = Number(parts[0]);
  if (!Number.isInteger(seq) || seq < 1) {
    throw new Error(`bad event seq: ${parts[0]}`);
  }
  const fields: Record<string, string> = {};
  for (const part of parts.slice(4)) {
    const eq = part.indexOf("=");
    if (eq < 1) throw new Error(`bad event field: ${part}`);
    fields[part.slice(0, eq)] = unescapeValue(part.slice(eq + 1));
  }
  return { seq, at: parts[1], kind: parts[2], subject: parts[3], fields };
}

export interface DeviceView {
  id: string;
  kind: string;
  room: string;
  label: string;
  state: string;
  seq: number; // seq of the record that last set `state`; 0 = snapshot
}

const FEED_KINDS = new Set([
  "alert",
  "sms-dispatch",
  "image-stored",
  "geofence-alert",
  "anomaly",
  "armed",
  "disarmed",
  "number-set",
  "stream-open",
  "stream-close",
]);

export class HubStore {
  devices = new Map<string, DeviceView>();
  securityPhase: string | null = null;
  occupancy = new Map<string, number>();
  feed: HubEvent[] = [];
  feedLimit = 100;
  onChange: (() => void) | null = null;

  private securitySeq = 0;

  /** Seed from GET /devices. Keeps newer per-device seqs if already known. */
  loadDevices(listing: { devices: DeviceView[] | Omit<DeviceView, "seq">[]; security?: string }): void {
    for (const row of listing.devices) {
      const known = this.devices.get(row.id);
      if (known && known.seq > 0) {
        known.kind = row.kind;
        known.room = row.room;
        known.label = row.label;
      } else {
        this.devices.set(row.id, { ...row, seq: 0 });
      }
    }
    if (listing.security !== undefined) this.securityPhase = listing.security;
    this.onChange?.();
  }

  /** Returns false when the record was stale for its target. */
  apply(ev: HubEvent): boolean {
    let accepted = true;
    switch (ev.kind) {
      case "state-changed": {
        const dev = this.devices.get(ev.subject);
        if (!dev) break; // device added after our snapshot; refetch covers it
        if (ev.seq <= dev.seq) {
          accepted = false;
          break;
        }
        dev.state = ev.fields["new"] ?? dev.state;
        dev.seq = ev.seq;
        break;
      }
      case "occupancy":
        this.occupancy.set(ev.subject, Number(ev.fields["count"] ?? "0"));
        break;
      case "armed":
      case "disarmed":
      case "number-set": {
        if (ev.seq <= this.securitySeq) {
          accepted = false;
          break;
        }
        this.securitySeq = ev.seq;
        if (ev.kind === "armed") this.securityPhase = "scanning";
        else if (ev.kind === "disarmed") this.securityPhase = "ready";
        else if (this.securityPhase === "need-number") this.securityPhase = "ready";
        break;
      }
      default:
        break;
    }
    if (accepted && FEED_KINDS.has(ev.kind)) {
      this.feed.push(ev);
      if (this.feed.length > this.feedLimit) {
        this.feed.splice(0, this.feed.length - this.feedLimit);
      }
    }
    if (accepted) this.onChange?.();
    return accepted;
  }

  /**
   * Optimistically set a device state without touching its seq. The
   * returned revert only undoes the write if no authoritative record
   * arrived in between, so a confirmed state never gets clobbered.
   */
  setLocal(id: string, state: string): () => void {
    const dev = this.devices.get(id);
    if (!dev) return () => {};
    const prior = dev.state;
    const seqAtWrite = dev.seq;
    dev.state = state;
    this.onChange?.();
    return () => {
      const now = this.devices.get(id);
      if (now && now.seq === seqAtWrite) {
        now.state = prior;
        this.onChange?.();
      }
    };
  }
}
