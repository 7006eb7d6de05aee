import { CommandTracker } from "./commands.js";
import { FeedClient } from "./feed.js";
import { render } from "./render.js";
import { initialState, onConnect, onDisconnect, reduce, type PanelState } from "./state.js";
import type { AckPayload, ControlCommand } from "./types.js";

const root = document.getElementById("app")!;
const tracker = new CommandTracker();
let state: PanelState = initialState();
let notice: string | null = null;

function redraw(): void {
  render(root, state, tracker, handlers, notice);
}

function send(command: ControlCommand): void {
  tracker.track(command, Date.now());
  if (!client.send(command)) {
    tracker.settle(command.command_id, false, "not connected");
    notice = "not connected";
  }
  redraw();
}

const handlers = {
  onToggle(group: string, links: string[]): void {
    send({ kind: "set_group_links", command_id: tracker.nextId(), group, links });
  },
  onEstop(engage: boolean): void {
    send({ kind: engage ? "estop_engage" : "estop_release", command_id: tracker.nextId() });
  },
};

const url = `ws://${location.host}/feed`;
const client = new FeedClient(
  url,
  {
    onOpen(): void {
      state = onConnect(state);
      notice = null;
      redraw();
    },
    onClose(): void {
      state = onDisconnect();
      redraw();
    },
    onMessage(msg): void {
      if (msg.kind === "ack" || msg.kind === "error") {
        const payload = msg.payload as unknown as AckPayload;
        const settled = tracker.settle(payload.command_id, msg.kind === "ack", payload.detail);
        if (settled && !settled.ok) {
          notice = `command failed: ${settled.detail}`;
        }
      } else {
        state = reduce(state, msg);
      }
      redraw();
    },
  },
  (target) => new WebSocket(target) as unknown as import("./feed.js").FeedSocket,
);

setInterval(() => {
  const expired = tracker.expire(Date.now());
  if (expired.length > 0) {
    notice = "command timed out, toggle reverted";
    redraw();
  }
}, 250);

client.connect();
redraw();
