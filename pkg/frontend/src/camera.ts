import type { CameraState, PreviewState, RenderSpecBody } from "./types.js";

export const DEFAULT_CAMERA: CameraState = { azimuth: 30, elevation: 15, zoom: 1 };

export const MIN_ZOOM = 0.05;
export const MAX_ZOOM = 40;

function checkFinite(value: number, what: string): number {
  if (!Number.isFinite(value)) {
    throw new Error(`${what} must be finite, got ${value}`);
  }
  return value;
}

// Normalized copy: azimuth wrapped to [0, 360), elevation clamped to the
// poles, zoom clamped to the UI range. Values that are already in range pass
// through unchanged, so a camera the user typed in stays exactly theirs.
export function clampCamera(camera: CameraState): CameraState {
  const azimuth = checkFinite(camera.azimuth, "azimuth");
  const elevation = checkFinite(camera.elevation, "elevation");
  const zoom = checkFinite(camera.zoom, "zoom");
  return {
    azimuth: ((azimuth % 360) + 360) % 360,
    elevation: Math.min(90, Math.max(-90, elevation)),
    zoom: Math.min(MAX_ZOOM, Math.max(MIN_ZOOM, zoom)),
  };
}

export function orbitCamera(camera: CameraState, dAzimuth: number, dElevation = 0): CameraState {
  return clampCamera({
    azimuth: camera.azimuth + dAzimuth,
    elevation: camera.elevation + dElevation,
    zoom: camera.zoom,
  });
}

// The render spec the server receives. The camera numbers are copied through
// verbatim: what the readout shows is what goes on the wire.
export function buildRenderSpec(state: PreviewState, imageSize: [number, number]): RenderSpecBody {
  return {
    isovalue: state.isovalue,
    camera: {
      azimuth: state.camera.azimuth,
      elevation: state.camera.elevation,
      zoom: state.camera.zoom,
    },
    image_size: [imageSize[0], imageSize[1]],
  };
}

// Canonical JSON form with a fixed key order. Serializing, parsing, and
// serializing again yields the identical byte string, so saved state can be
// compared and deduplicated textually.
export function serializeCamera(camera: CameraState): string {
  return JSON.stringify({
    azimuth: camera.azimuth,
    elevation: camera.elevation,
    zoom: camera.zoom,
  });
}

export function deserializeCamera(text: string): CameraState {
  const raw = JSON.parse(text) as Record<string, unknown>;
  const pick = (key: string): number => {
    const value = raw[key];
    if (typeof value !== "number" || !Number.isFinite(value)) {
      throw new Error(`camera field ${key} must be a finite number`);
    }
    return value;
  };
  return { azimuth: pick("azimuth"), elevation: pick("elevation"), zoom: pick("zoom") };
}

export function serializePreviewState(state: PreviewState): string {
  return JSON.stringify({
    volume: { proposalId: state.volume.proposalId, file: state.volume.file },
    reducedSha256: state.reducedSha256,
    camera: {
      azimuth: state.camera.azimuth,
      elevation: state.camera.elevation,
      zoom: state.camera.zoom,
    },
    isovalue: state.isovalue,
    job:
      state.job === null
        ? null
        : {
            job_id: state.job.job_id,
            state: state.job.state,
            submitted_at: state.job.submitted_at,
            finished_at: state.job.finished_at,
            error: state.job.error,
          },
  });
}

export function deserializePreviewState(text: string): PreviewState {
  const raw = JSON.parse(text) as PreviewState;
  const camera = deserializeCamera(JSON.stringify(raw.camera));
  if (typeof raw.volume?.proposalId !== "string" || typeof raw.volume?.file !== "string") {
    throw new Error("preview state is missing the volume reference");
  }
  if (typeof raw.reducedSha256 !== "string" || typeof raw.isovalue !== "number") {
    throw new Error("preview state is missing reducedSha256 or isovalue");
  }
  return {
    volume: { proposalId: raw.volume.proposalId, file: raw.volume.file },
    reducedSha256: raw.reducedSha256,
    camera,
    isovalue: raw.isovalue,
    job:
      raw.job === null || raw.job === undefined
        ? null
        : {
            job_id: String(raw.job.job_id),
            state: raw.job.state,
            submitted_at: String(raw.job.submitted_at),
            finished_at: raw.job.finished_at ?? null,
            error: raw.job.error ?? null,
          },
  };
}
