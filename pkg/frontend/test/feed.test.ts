import { describe, expect, it, vi } from "vitest";

import { FeedClient, type FeedSocket } from "../src/feed.js";
import type { FeedMessage } from "../src/types.js";

class FakeSocket implements FeedSocket {
  sent: string[] = [];
  closed = false;
  onopen: (() => void) | null = null;
  onclose: (() => void) | null = null;
  onerror: (() => void) | null = null;
  onmessage: ((event: { data: string }) => void) | null = null;

  send(text: string): void {
    this.sent.push(text);
  }

  close(): void {
    this.closed = true;
  }
}

function harness() {
  const sockets: FakeSocket[] = [];
  const messages: FeedMessage[] = [];
  let opens = 0;
  let closes = 0;
  const client = new FeedClient(
    "ws://test/feed",
    {
      onMessage: (msg) => messages.push(msg),
      onOpen: () => (opens += 1),
      onClose: () => (closes += 1),
    },
    () => {
      const socket = new FakeSocket();
      sockets.push(socket);
      return socket;
    },
  );
  return { client, sockets, messages, opens: () => opens, closes: () => closes };
}

describe("feed client", () => {
  it("parses frames and forwards them", () => {
    const h = harness();
    h.client.connect();
    h.sockets[0].onopen?.();
    h.sockets[0].onmessage?.({ data: '{"kind":"overview","seq":1,"server_time_ns":0,"payload":{}}' });
    h.sockets[0].onmessage?.({ data: "not json at all" });
    expect(h.messages.length).toBe(1);
    expect(h.messages[0].kind).toBe("overview");
    expect(h.opens()).toBe(1);
  });

  it("sends commands as JSON text frames", () => {
    const h = harness();
    h.client.connect();
    h.sockets[0].onopen?.();
    expect(h.client.send({ kind: "estop_engage", command_id: "c9" })).toBe(true);
    expect(JSON.parse(h.sockets[0].sent[0])).toEqual({ kind: "estop_engage", command_id: "c9" });
  });

  it("reconnects with backoff after a drop", async () => {
    vi.useFakeTimers();
    try {
      const h = harness();
      h.client.connect();
      h.sockets[0].onopen?.();
      h.sockets[0].onclose?.();
      expect(h.closes()).toBe(1);
      expect(h.sockets.length).toBe(1);
      await vi.advanceTimersByTimeAsync(250);
      expect(h.sockets.length).toBe(2);
      h.sockets[1].onclose?.(); // fails again: longer delay
      await vi.advanceTimersByTimeAsync(249);
      expect(h.sockets.length).toBe(2);
      await vi.advanceTimersByTimeAsync(251);
      expect(h.sockets.length).toBe(3);
    } finally {
      vi.useRealTimers();
    }
  });

  it("stops reconnecting once closed", async () => {
    vi.useFakeTimers();
    try {
      const h = harness();
      h.client.connect();
      h.client.close();
      h.sockets[0].onclose?.();
      await vi.advanceTimersByTimeAsync(10_000);
      expect(h.sockets.length).toBe(1);
      expect(h.sockets[0].closed).toBe(true);
    } finally {
      vi.useRealTimers();
    }
  });
});
