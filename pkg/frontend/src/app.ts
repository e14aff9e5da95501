import { pollDelayMs, sleep } from "./backoff.js";
import { buildRenderSpec, clampCamera, DEFAULT_CAMERA } from "./camera.js";
import { ApiRequestError, userMessageFor, VolumeServiceClient } from "./client.js";
import { parseCubeText, slicePreview } from "./cube.js";
import { decodePpm, type RasterImage } from "./ppm.js";
import {
  volumeKey,
  type CameraState,
  type JobState,
  type PreviewState,
  type ProposalListing,
  type ReductionReport,
  type VolumeRef,
} from "./types.js";

export const DEFAULT_IMAGE_SIZE: [number, number] = [640, 480];
const MAX_POLL_NETWORK_RETRIES = 3;

// Everything the page shows, as plain data. The DOM layer renders this; tests
// assert on it directly.
export interface AppView {
  route: "volumes" | "preview";
  volumes: ProposalListing[];
  state: PreviewState | null;
  report: ReductionReport | null;
  preview: RasterImage | null; // client-local slice view of the reduced volume
  resultImage: RasterImage | null; // server-rendered image, shown beside the preview
  integrityWarning: string | null;
  statusLine: string;
  jobTrace: JobState[]; // every state observed for the current job, in order
  errorMessage: string | null;
  submitEnabled: boolean;
}

export interface PreviewAppOptions {
  imageSize?: [number, number];
  sleepFn?: (ms: number) => Promise<void>;
}

export interface SubmitOutcome {
  started: boolean;
  jobId?: string;
  finalState?: JobState;
  reason?: string;
}

// Single-page view model: volume list, one open preview, one render job per
// volume in flight at a time. Navigation cancels any polling loop.
export class PreviewApp {
  readonly view: AppView;
  private client: VolumeServiceClient;
  private imageSize: [number, number];
  private sleepFn: (ms: number) => Promise<void>;
  private listeners: Array<(view: AppView) => void> = [];
  private inFlight = new Map<string, string>(); // volume key -> job id
  private pollGeneration = 0;

  constructor(client: VolumeServiceClient, opts: PreviewAppOptions = {}) {
    this.client = client;
    this.imageSize = opts.imageSize ?? DEFAULT_IMAGE_SIZE;
    this.sleepFn = opts.sleepFn ?? sleep;
    this.view = {
      route: "volumes",
      volumes: [],
      state: null,
      report: null,
      preview: null,
      resultImage: null,
      integrityWarning: null,
      statusLine: "",
      jobTrace: [],
      errorMessage: null,
      submitEnabled: false,
    };
  }

  onChange(listener: (view: AppView) => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener(this.view);
  }

  private fail(error: unknown): void {
    this.view.errorMessage = userMessageFor(error);
    this.notify();
  }

  // Leaving the current page: any in-progress polling loop stops at its next
  // checkpoint and the preview pane resets.
  navigate(route: "volumes" | "preview"): void {
    this.pollGeneration += 1;
    this.view.route = route;
    if (route === "volumes") {
      this.view.state = null;
      this.view.report = null;
      this.view.preview = null;
      this.view.resultImage = null;
      this.view.integrityWarning = null;
      this.view.statusLine = "";
      this.view.jobTrace = [];
      this.view.errorMessage = null;
      this.view.submitEnabled = false;
    }
    this.notify();
  }

  async refreshVolumes(): Promise<void> {
    try {
      this.view.volumes = await this.client.listVolumes();
      this.view.errorMessage = null;
    } catch (error) {
      this.view.volumes = [];
      this.view.errorMessage = userMessageFor(error);
    }
    this.notify();
  }

  async loadPreview(ref: VolumeRef): Promise<void> {
    this.pollGeneration += 1; // opening a volume abandons any previous poll
    this.view.route = "preview";
    this.view.state = null;
    this.view.report = null;
    this.view.preview = null;
    this.view.resultImage = null;
    this.view.integrityWarning = null;
    this.view.statusLine = "";
    this.view.jobTrace = [];
    this.view.errorMessage = null;
    this.view.submitEnabled = false;
    this.notify();

    let reduced;
    try {
      reduced = await this.client.fetchReduced(ref);
    } catch (error) {
      this.fail(error);
      return;
    }

    this.view.report = reduced.report;
    if (!reduced.integrityOk) {
      this.view.integrityWarning =
        "Integrity check failed: the reduced volume does not match its content hash. " +
        "Preview withheld; try reloading.";
      this.notify();
      return;
    }

    let volume;
    try {
      volume = parseCubeText(new TextDecoder().decode(reduced.payload));
    } catch (error) {
      this.view.errorMessage = `The reduced volume could not be parsed: ${String(error)}`;
      this.notify();
      return;
    }

    this.view.preview = slicePreview(volume);
    this.view.state = {
      volume: ref,
      reducedSha256: reduced.sha256,
      camera: { ...DEFAULT_CAMERA },
      isovalue: suggestIsovalue(volume.values),
      job: null,
    };
    this.view.submitEnabled = true;
    this.view.statusLine = "ready";
    this.notify();
  }

  setCamera(camera: CameraState): void {
    if (this.view.state === null) return;
    this.view.state.camera = clampCamera(camera);
    this.notify();
  }

  orbitBy(dAzimuth: number, dElevation = 0): void {
    if (this.view.state === null) return;
    const c = this.view.state.camera;
    this.view.state.camera = clampCamera({
      azimuth: c.azimuth + dAzimuth,
      elevation: c.elevation + dElevation,
      zoom: c.zoom,
    });
    this.notify();
  }

  setIsovalue(isovalue: number): void {
    if (this.view.state === null || !Number.isFinite(isovalue)) return;
    this.view.state.isovalue = isovalue;
    this.notify();
  }

  // POST the render spec built verbatim from the on-screen state, then poll
  // with exponential backoff until the job settles. Only one job per volume
  // may be in flight; further submits are refused until it settles.
  async submitAndTrack(): Promise<SubmitOutcome> {
    const state = this.view.state;
    if (state === null || !this.view.submitEnabled) {
      return { started: false, reason: "no preview loaded" };
    }
    const key = volumeKey(state.volume);
    if (this.inFlight.has(key)) {
      this.view.statusLine = "a render for this volume is already in flight";
      this.notify();
      return { started: false, reason: "in flight" };
    }
    this.inFlight.set(key, "pending"); // reserve before any await so a double click cannot race

    const spec = buildRenderSpec(state, this.imageSize);
    let submitted;
    try {
      submitted = await this.client.submitRender(state.reducedSha256, spec);
    } catch (error) {
      this.inFlight.delete(key);
      this.fail(error);
      return { started: false, reason: userMessageFor(error) };
    }

    this.inFlight.set(key, submitted.job_id);
    state.job = {
      job_id: submitted.job_id,
      state: submitted.state,
      submitted_at: "",
      finished_at: null,
      error: null,
    };
    this.view.jobTrace = [submitted.state];
    this.view.statusLine = `job ${submitted.job_id}: ${submitted.state}`;
    this.view.errorMessage = null;
    this.notify();

    try {
      const final = await this.pollUntilSettled(submitted.job_id, state);
      return { started: true, jobId: submitted.job_id, finalState: final ?? undefined };
    } finally {
      this.inFlight.delete(key);
    }
  }

  // Returns the terminal state, or null if navigation cancelled the loop.
  private async pollUntilSettled(jobId: string, state: PreviewState): Promise<JobState | null> {
    const generation = this.pollGeneration;
    let netErrors = 0;
    for (let attempt = 0; ; attempt++) {
      await this.sleepFn(pollDelayMs(attempt));
      if (generation !== this.pollGeneration) {
        return null; // user navigated away; stop quietly
      }
      let job;
      try {
        job = await this.client.getJob(jobId);
        netErrors = 0;
      } catch (error) {
        if (error instanceof ApiRequestError) {
          this.fail(error);
          return null;
        }
        netErrors += 1;
        if (netErrors > MAX_POLL_NETWORK_RETRIES) {
          this.fail(error);
          return null;
        }
        continue;
      }
      if (generation !== this.pollGeneration) {
        return null;
      }
      state.job = job;
      if (this.view.jobTrace[this.view.jobTrace.length - 1] !== job.state) {
        this.view.jobTrace.push(job.state);
      }
      this.view.statusLine = `job ${jobId}: ${job.state}`;
      this.notify();
      if (job.state === "failed") {
        this.view.errorMessage = `Render failed: ${job.error ?? "no detail provided"}`;
        this.notify();
        return "failed";
      }
      if (job.state === "done") {
        await this.showResult(jobId, generation);
        return "done";
      }
    }
  }

  private async showResult(jobId: string, generation: number): Promise<void> {
    let bytes;
    try {
      bytes = await this.client.getJobImage(jobId);
    } catch (error) {
      this.fail(error);
      return;
    }
    if (generation !== this.pollGeneration) {
      return;
    }
    try {
      this.view.resultImage = decodePpm(bytes);
    } catch (error) {
      this.view.errorMessage = `The rendered image could not be decoded: ${String(error)}`;
    }
    this.notify();
  }
}

// A workable starting isovalue: halfway between the extremes puts the level
// set inside the data range for any non-constant field.
export function suggestIsovalue(values: Float64Array): number {
  if (values.length === 0) return 0;
  let lo = values[0];
  let hi = values[0];
  for (let i = 1; i < values.length; i++) {
    if (values[i] < lo) lo = values[i];
    if (values[i] > hi) hi = values[i];
  }
  return lo + 0.5 * (hi - lo);
}
