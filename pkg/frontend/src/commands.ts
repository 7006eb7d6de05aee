// Optimistic command tracking: a toggle shows as pending immediately, is
// confirmed by an ack, and reverts on error or after the 2 s timeout.
// Nothing is ever rendered as *applied* without an ack: pending state is
// visually distinct and evaporates unless the server's own state confirms it.

import type { ControlCommand } from "./types.js";

export interface Pending {
  command: ControlCommand;
  sentAtMs: number;
}

export interface Settled {
  command: ControlCommand;
  ok: boolean;
  detail: string;
}

export class CommandTracker {
  private pending = new Map<string, Pending>();
  private counter = 0;

  constructor(private timeoutMs = 2000) {}

  nextId(): string {
    this.counter += 1;
    return `ui-${this.counter}`;
  }

  track(command: ControlCommand, nowMs: number): void {
    this.pending.set(command.command_id, { command, sentAtMs: nowMs });
  }

  /** Resolve an ack/error for a command we sent; unknown ids are ignored. */
  settle(commandId: string, ok: boolean, detail: string): Settled | null {
    const entry = this.pending.get(commandId);
    if (!entry) {
      return null;
    }
    this.pending.delete(commandId);
    return { command: entry.command, ok, detail };
  }

  /** Commands past the timeout: removed and returned so the UI can revert. */
  expire(nowMs: number): Pending[] {
    const dead: Pending[] = [];
    for (const [id, entry] of this.pending) {
      if (nowMs - entry.sentAtMs >= this.timeoutMs) {
        this.pending.delete(id);
        dead.push(entry);
      }
    }
    return dead;
  }

  pendingCount(): number {
    return this.pending.size;
  }

  /** The newest pending route change per group, for the optimistic overlay. */
  pendingRouting(): Map<string, string[]> {
    const out = new Map<string, string[]>();
    for (const { command } of this.pending.values()) {
      if (command.kind === "set_group_links") {
        out.set(command.group, command.links);
      }
    }
    return out;
  }
}

/** Server routing with pending toggles layered on top (marked by the caller). */
export function effectiveRouting(
  server: Record<string, string[]>,
  pending: Map<string, string[]>,
): Map<string, { links: string[]; pending: boolean }> {
  const out = new Map<string, { links: string[]; pending: boolean }>();
  for (const group of Object.keys(server).sort()) {
    const optimistic = pending.get(group);
    out.set(group, optimistic ? { links: optimistic, pending: true } : { links: server[group], pending: false });
  }
  return out;
}
