import { sha256Hex } from "./sha256.js";
import type {
  JobSnapshot,
  ProposalListing,
  ReductionReport,
  RenderSpecBody,
  SubmitResult,
  VolumeRef,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiRequestError extends Error {
  status: number;
  code: string;

  constructor(status: number, code: string, message: string) {
    super(message);
    this.name = "ApiRequestError";
    this.status = status;
    this.code = code;
  }
}

// One user-facing sentence per failure class, so a 403 never reads like a 404.
export function userMessageFor(error: unknown): string {
  if (error instanceof ApiRequestError) {
    switch (error.status) {
      case 401:
        return "Not signed in: the session token was not accepted. Enter a valid token.";
      case 403:
        return "Access denied: your account has no grant for this proposal.";
      case 404:
        return "Not found: no such volume or job under your grants.";
      case 409:
        return "The job has not finished yet.";
      case 422:
        return `The render settings were rejected: ${error.message}`;
      default:
        return `The service reported an error (${error.status}): ${error.message}`;
    }
  }
  return "Could not reach the service. Check the connection and retry.";
}

export interface ReducedVolume {
  payload: Uint8Array;
  sha256: string; // from the X-Content-SHA256 header
  integrityOk: boolean; // header hash matches a local hash of the payload
  report: ReductionReport;
  entryId: string;
}

async function errorFrom(response: Response): Promise<ApiRequestError> {
  let code = "error";
  let message = `HTTP ${response.status}`;
  try {
    const body = (await response.json()) as { error?: string; message?: string };
    if (typeof body.error === "string") code = body.error;
    if (typeof body.message === "string") message = body.message;
  } catch {
    // Non-JSON error body; keep the generic message.
  }
  return new ApiRequestError(response.status, code, message);
}

// Client for the volume service. The bearer token lives in this object only;
// it is never written to storage. Reads are GETs and the single write the
// client ever performs is POST /v1/render.
export class VolumeServiceClient {
  private baseUrl: string;
  private token: string;
  private fetchFn: FetchLike;

  constructor(baseUrl: string, token: string, fetchFn?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.token = token;
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  setToken(token: string): void {
    this.token = token;
  }

  private async request(method: "GET" | "POST", path: string, body?: unknown): Promise<Response> {
    const init: RequestInit = {
      method,
      headers: { authorization: `Bearer ${this.token}` },
    };
    if (body !== undefined) {
      init.headers = { ...init.headers, "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      throw await errorFrom(response);
    }
    return response;
  }

  async listVolumes(): Promise<ProposalListing[]> {
    const response = await this.request("GET", "/v1/volumes");
    const body = (await response.json()) as { proposals: ProposalListing[] };
    return body.proposals;
  }

  async fetchReduced(ref: VolumeRef): Promise<ReducedVolume> {
    const path = `/v1/volumes/${encodeURIComponent(ref.proposalId)}/${encodeURIComponent(ref.file)}/reduced`;
    const response = await this.request("GET", path);
    const payload = new Uint8Array(await response.arrayBuffer());
    const sha = response.headers.get("X-Content-SHA256") ?? "";
    const reportText = response.headers.get("X-Reduction-Report") ?? "";
    const entryId = response.headers.get("X-Entry-Id") ?? "";
    if (sha === "" || reportText === "") {
      throw new ApiRequestError(502, "bad_response", "reduced response is missing headers");
    }
    const report = JSON.parse(reportText) as ReductionReport;
    const localSha = await sha256Hex(payload);
    return { payload, sha256: sha, integrityOk: localSha === sha, report, entryId };
  }

  async submitRender(reducedSha256: string, spec: RenderSpecBody): Promise<SubmitResult> {
    const response = await this.request("POST", "/v1/render", {
      reduced_sha256: reducedSha256,
      spec,
    });
    return (await response.json()) as SubmitResult;
  }

  async getJob(jobId: string): Promise<JobSnapshot> {
    const response = await this.request("GET", `/v1/jobs/${encodeURIComponent(jobId)}`);
    return (await response.json()) as JobSnapshot;
  }

  async getJobImage(jobId: string): Promise<Uint8Array> {
    const response = await this.request("GET", `/v1/jobs/${encodeURIComponent(jobId)}/image`);
    return new Uint8Array(await response.arrayBuffer());
  }
}
