// Panel state is a pure function of the last consistent feed messages.
// The server sends full state (never diffs), so a reconnect is whole again
// after the first overview+checks+safety triple; nothing incremental to lose.

import type { ChecksPayload, FeedMessage, Overview, SafetyPayload } from "./types.js";

export interface PanelState {
  connected: boolean;
  overview: Overview | null;
  checks: ChecksPayload | null;
  safety: SafetyPayload | null;
  lastSeq: number;
  banner: string | null;
}

export function initialState(): PanelState {
  return { connected: false, overview: null, checks: null, safety: null, lastSeq: 0, banner: null };
}

export function isReady(state: PanelState): boolean {
  return state.overview !== null && state.checks !== null && state.safety !== null;
}

function validOverview(payload: unknown): payload is Overview {
  const p = payload as Overview;
  return !!p && Array.isArray(p.links) && Array.isArray(p.flows) && typeof p.routing === "object";
}

function validChecks(payload: unknown): payload is ChecksPayload {
  const p = payload as ChecksPayload;
  return !!p && Array.isArray(p.results);
}

function validSafety(payload: unknown): payload is SafetyPayload {
  const p = payload as SafetyPayload;
  return !!p && !!p.estop && Array.isArray(p.arms);
}

/** Fold one feed message into the state; malformed input raises the banner
 * and leaves the previous state untouched. */
export function reduce(state: PanelState, msg: FeedMessage): PanelState {
  switch (msg.kind) {
    case "overview":
      if (!validOverview(msg.payload)) {
        return { ...state, banner: "malformed overview message" };
      }
      return { ...state, overview: msg.payload, lastSeq: msg.seq, banner: null };
    case "checks":
      if (!validChecks(msg.payload)) {
        return { ...state, banner: "malformed checks message" };
      }
      return { ...state, checks: msg.payload, lastSeq: msg.seq, banner: null };
    case "safety":
      if (!validSafety(msg.payload)) {
        return { ...state, banner: "malformed safety message" };
      }
      return { ...state, safety: msg.payload, lastSeq: msg.seq, banner: null };
    case "ack":
    case "error":
      return state; // command outcomes are the tracker's business
    default:
      return { ...state, banner: `unknown message kind ${(msg as FeedMessage).kind}` };
  }
}

export function onConnect(state: PanelState): PanelState {
  return { ...state, connected: true };
}

/** Drop everything derived from the dead connection; the next triple rebuilds it. */
export function onDisconnect(): PanelState {
  return { ...initialState(), banner: "connection lost, reconnecting..." };
}
