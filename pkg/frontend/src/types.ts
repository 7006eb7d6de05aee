// Wire shapes of the feed and control channel (docs/feed-schema.md, v1).

export type FeedKind = "overview" | "checks" | "safety" | "ack" | "error";

export interface FeedMessage {
  kind: FeedKind;
  seq: number;
  server_time_ns: number;
  payload: Record<string, unknown>;
}

export interface LinkRow {
  link: string;
  signal_strength: number;
  up: boolean;
  mbits_per_s: number;
}

export interface FlowRow {
  topic_id: number;
  name: string;
  direction: "down" | "up";
  group: string;
  link: string;
  packets_per_s: number;
  mbits_per_s: number;
  sent: number;
  received: number;
  est_dropped: number;
  duplicates: number;
  last_seq: number | null;
}

export interface Overview {
  t_s: number;
  links: LinkRow[];
  flows: FlowRow[];
  totals: Record<string, Record<string, number>>;
  routing: Record<string, string[]>;
}

export interface CheckRow {
  name: string;
  side: string;
  status: "ok" | "warn" | "error" | "stale";
  message: string;
}

export interface ChecksPayload {
  t_s: number;
  results: CheckRow[];
}

export interface ArmRow {
  arm: string;
  mode: string;
  external_force: number;
  fade_progress: number;
}

export interface SafetyPayload {
  t_s: number;
  estop: { engaged: boolean; effective_engaged: boolean; signal_lost: boolean };
  base_output_zeroed: boolean;
  holds: string[];
  arms: ArmRow[];
}

export interface AckPayload {
  command_id: string;
  detail: string;
}

export type ControlCommand =
  | { kind: "set_group_links"; command_id: string; group: string; links: string[] }
  | { kind: "estop_engage"; command_id: string }
  | { kind: "estop_release"; command_id: string }
  | { kind: "inject_fault"; command_id: string; fault: "crash" | "hang" | "syshang"; target?: string };
