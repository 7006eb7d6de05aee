// WebSocket feed client with automatic reconnection and exponential backoff.
// The transport is injectable so the protocol logic is testable without a
// browser or a live server.

import type { ControlCommand, FeedMessage } from "./types.js";

export interface FeedSocket {
  send(text: string): void;
  close(): void;
  onopen: (() => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
  onmessage: ((event: { data: string }) => void) | null;
}

export type SocketFactory = (url: string) => FeedSocket;

export interface FeedEvents {
  onMessage(msg: FeedMessage): void;
  onOpen(): void;
  onClose(): void;
}

export class FeedClient {
  private socket: FeedSocket | null = null;
  private attempts = 0;
  private closed = false;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private url: string,
    private events: FeedEvents,
    private factory: SocketFactory,
  ) {}

  connect(): void {
    this.closed = false;
    const socket = this.factory(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.attempts = 0;
      this.events.onOpen();
    };
    socket.onmessage = (event) => {
      let msg: FeedMessage;
      try {
        msg = JSON.parse(event.data) as FeedMessage;
      } catch {
        return; // unparsable frame: ignore, full state arrives every second anyway
      }
      this.events.onMessage(msg);
    };
    socket.onclose = () => {
      this.events.onClose();
      this.scheduleReconnect();
    };
    socket.onerror = () => {
      // the close handler owns reconnection
    };
  }

  private scheduleReconnect(): void {
    if (this.closed) {
      return;
    }
    const delay = Math.min(250 * 2 ** this.attempts, 5000);
    this.attempts += 1;
    this.timer = setTimeout(() => this.connect(), delay);
  }

  send(command: ControlCommand): boolean {
    if (!this.socket) {
      return false;
    }
    try {
      this.socket.send(JSON.stringify(command));
      return true;
    } catch {
      return false;
    }
  }

  close(): void {
    this.closed = true;
    if (this.timer) {
      clearTimeout(this.timer);
    }
    this.socket?.close();
  }
}
