export interface SessionEvent {
  number: number;
  kind: string;
  payload: Record<string, unknown>;
  timestamp: number;
}

export interface Candidate {
  label: string;
  summary: string;
  provenance: string[];
}

export interface BoundaryEntry {
  type: string;
  field_types: Record<string, string>;
  values: Record<string, string>;
}

export interface SpecSummary {
  solver: string;
  turbulence_model: string | null;
  thermo_model: string | null;
  flow_regime: string;
  time_mode: string;
  boundaries: Record<string, BoundaryEntry>;
  initial_fields: Record<string, string>;
  source_ref: string;
}

export interface MeshReport {
  patches: string[];
  findings: { kind: string; patch: string; detail: string; suggestion: string | null }[];
  clean: boolean;
}

export interface IterationEntry {
  iteration: number;
  category: string;
  target_file: string | null;
  missing_name: string | null;
  patched_files: string[];
  cost_usd?: string;
}

export interface OutcomeSummary {
  status?: string;
  reflections?: number;
  cause?: string;
  cost_usd?: string;
}

/** Session state mirrored from the event stream; no client-side truth. */
export interface SessionView {
  state: string;
  candidates: Candidate[];
  pendingSpec: SpecSummary | null;
  spec: SpecSummary | null;
  mesh: MeshReport | null;
  meshRejection: MeshReport | null;
  generatedFiles: string[];
  iterations: IterationEntry[];
  outcome: OutcomeSummary | null;
  costUsd: string;
  lastEvent: number;
}

export type Phase =
  | "input-submission"
  | "case-extraction"
  | "case-selection"
  | "mesh-integration"
  | "launch"
  | "monitoring"
  | "finished";

/** What the page shows; a pure function of the view plus connection status. */
export interface UiState {
  phase: Phase;
  showDocumentInput: boolean;
  showCandidates: boolean;
  showSpecConfirmation: boolean;
  showMeshUpload: boolean;
  showLaunch: boolean;
  showTimeline: boolean;
  showAbort: boolean;
  showRelaunch: boolean;
  timeline: IterationEntry[];
  costUsd: string;
  staleBanner: boolean;
}
