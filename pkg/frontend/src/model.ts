// Wire types for the slicing API plus the slice form model. The shapes stay
// in lockstep with the server; everything the portal displays is fetched
// from these payloads, never derived client-side.

export type SecurityLevel = "none" | "dh_aes" | "qra_aes" | "qkd_aes";
export type Role = "control_plane" | "access" | "backhaul";
export type Policy = "exact" | "upgrade_allowed";

export const ROLES: Role[] = ["control_plane", "access", "backhaul"];
export const SECURITY_LEVELS: SecurityLevel[] = [
  "none", "dh_aes", "qra_aes", "qkd_aes",
];

export interface Connection {
  role: Role;
  src_site: string;
  dst_site: string;
  bandwidth_gbps: number;
  required_security: SecurityLevel;
  max_latency_us?: number;
}

export interface SliceDescriptor {
  slice_id: string;
  name: string;
  compute_site: string;
  compute_units: number;
  policy: Policy;
  connections: Connection[];
}

export interface StepEvent {
  entity: string;
  action: string;
  started_at: number;
  ended_at: number;
  txn_id: string | null;
  ok: boolean;
}

export interface PathInfo {
  hops: string[];
  reserved_ports: [string, number][];
  total_latency_us: number;
  min_security_on_path: SecurityLevel;
  policy_used: "exact" | "upgrade";
}

export interface SliceTimings {
  provision_duration_s: number | null;
  deprovision_duration_s: number | null;
}

export interface SliceRecord {
  descriptor: SliceDescriptor;
  state: string;
  use_case: number | null;
  paths: Partial<Record<Role, PathInfo>>;
  step_log: StepEvent[];
  timings: SliceTimings;
  failure: Record<string, unknown> | null;
}

export interface SliceSummary {
  slice_id: string;
  name: string;
  state: string;
  use_case: number | null;
}

export interface Preset {
  use_case: number;
  descriptor: SliceDescriptor;
}

export interface ConnectionAudit {
  required: SecurityLevel;
  achieved_min: SecurityLevel;
  ok: boolean;
}

export interface AuditReport {
  slice_id: string;
  ok: boolean;
  per_connection: Partial<Record<Role, ConnectionAudit>>;
}

// ---- slice request form ----

export interface SliceFormModel {
  slice_id: string;
  name: string;
  cell_site: string;
  core_site: string;
  compute_site: string;
  compute_units: number;
  bandwidth_gbps: number;
  policy: Policy;
  security: Record<Role, SecurityLevel>;
}

/**
 * Client-side mirror of the server's descriptor invariants. Returns a map of
 * field name to message; an empty map means the form can be submitted.
 */
export function validateForm(form: SliceFormModel): Record<string, string> {
  const errors: Record<string, string> = {};
  if (!form.slice_id.trim()) errors["slice_id"] = "slice id is required";
  if (!form.name.trim()) errors["name"] = "name is required";
  if (!form.cell_site) errors["cell_site"] = "pick a cell site";
  if (!form.core_site) errors["core_site"] = "pick a core site";
  if (!form.compute_site) errors["compute_site"] = "pick a compute site";
  if (!Number.isInteger(form.compute_units) || form.compute_units < 0) {
    errors["compute_units"] = "compute units must be a whole number ≥ 0";
  }
  if (!(form.bandwidth_gbps > 0 && form.bandwidth_gbps <= 100)) {
    errors["bandwidth_gbps"] = "bandwidth must be in (0, 100] Gbps";
  }
  if (form.policy !== "exact" && form.policy !== "upgrade_allowed") {
    errors["policy"] = "unknown policy";
  }
  for (const role of ROLES) {
    if (!SECURITY_LEVELS.includes(form.security[role])) {
      errors[`security.${role}`] = "unknown security level";
    }
  }
  return errors;
}

/** Three connections, one per role: cell->core, cell->compute, compute->core. */
export function buildDescriptor(form: SliceFormModel): SliceDescriptor {
  const connection = (
    role: Role, src: string, dst: string,
  ): Connection => ({
    role,
    src_site: src,
    dst_site: dst,
    bandwidth_gbps: form.bandwidth_gbps,
    required_security: form.security[role],
  });
  return {
    slice_id: form.slice_id.trim(),
    name: form.name.trim(),
    compute_site: form.compute_site,
    compute_units: form.compute_units,
    policy: form.policy,
    connections: [
      connection("control_plane", form.cell_site, form.core_site),
      connection("access", form.cell_site, form.compute_site),
      connection("backhaul", form.compute_site, form.core_site),
    ],
  };
}

// ---- timing CSV export ----

export interface TimingRow {
  slice_id: string;
  use_case: string;
  operation: string;
  start_s: number;
  end_s: number;
  duration_s: number;
}

export function parseTimingsCsv(text: string): TimingRow[] {
  const lines = text.trim().split(/\r?\n/);
  return lines.slice(1).filter((line) => line.length > 0).map((line) => {
    const [slice_id, use_case, operation, start_s, end_s, duration_s] =
      line.split(",");
    return {
      slice_id, use_case, operation,
      start_s: Number(start_s),
      end_s: Number(end_s),
      duration_s: Number(duration_s),
    };
  });
}

export function csvProvisionDuration(rows: TimingRow[],
                                     sliceId: string): number | null {
  const row = rows.find(
    (r) => r.slice_id === sliceId && r.operation === "provision");
  return row ? row.duration_s : null;
}

export function formatDuration(seconds: number | null | undefined): string {
  return seconds == null ? "–" : `${seconds.toFixed(1)} s`;
}
