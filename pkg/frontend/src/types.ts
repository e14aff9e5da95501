// Wire types for the volume service HTTP API, mirrored field for field.

export interface CameraState {
  azimuth: number;
  elevation: number;
  zoom: number;
}

// Body of POST /v1/render. The camera block is the on-screen camera verbatim;
// nothing is rounded or rescaled on the way out.
export interface RenderSpecBody {
  isovalue: number;
  camera: CameraState;
  image_size: [number, number];
}

export interface VolumeEntry {
  file: string;
  bytes: number;
  dims: number[];
  natoms: number;
  nval: number;
  value_count: number;
}

export interface ProposalListing {
  proposal_id: string;
  volumes: VolumeEntry[];
}

export interface ErrorMetrics {
  max_abs: number;
  max_rel: number;
  rms: number;
  compared_points: number;
}

export interface ReductionReport {
  original_bytes: number;
  reduced_bytes: number;
  size_ratio: number;
  grid_before: number[];
  grid_after: number[];
  retained_point_error: ErrorMetrics;
  reconstruction_error: ErrorMetrics | null;
  params: {
    stride: number[];
    method: string;
    sig_digits: number;
    zero_threshold: number;
    measure_reconstruction: boolean;
  };
  no_op: boolean;
}

export type JobState = "queued" | "running" | "done" | "failed";

export interface JobSnapshot {
  job_id: string;
  state: JobState;
  submitted_at: string;
  finished_at: string | null;
  error: string | null;
}

export interface SubmitResult {
  job_id: string;
  state: JobState;
  duplicate: boolean;
}

// A volume is addressed by proposal id plus file name everywhere in the UI.
export interface VolumeRef {
  proposalId: string;
  file: string;
}

export function volumeKey(ref: VolumeRef): string {
  return `${ref.proposalId}/${ref.file}`;
}

// Everything the page needs to rebuild itself: which volume is open, the
// content hash of the reduced copy we previewed, the camera and isovalue the
// user dialled in, and where the render job stands.
export interface PreviewState {
  volume: VolumeRef;
  reducedSha256: string;
  camera: CameraState;
  isovalue: number;
  job: JobSnapshot | null;
}
