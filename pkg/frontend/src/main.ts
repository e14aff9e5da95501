import { PreviewApp, type AppView } from "./app.js";
import { VolumeServiceClient } from "./client.js";
import { toRgba, type RasterImage } from "./ppm.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

function paint(canvas: HTMLCanvasElement, image: RasterImage | null): void {
  const ctx = canvas.getContext("2d");
  if (ctx === null) return;
  if (image === null) {
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    return;
  }
  canvas.width = image.width;
  canvas.height = image.height;
  ctx.putImageData(new ImageData(toRgba(image), image.width, image.height), 0, 0);
}

function renderVolumeList(app: PreviewApp, view: AppView, host: HTMLElement): void {
  host.textContent = "";
  for (const proposal of view.volumes) {
    const heading = document.createElement("h3");
    heading.textContent = proposal.proposal_id;
    host.appendChild(heading);
    for (const volume of proposal.volumes) {
      const button = document.createElement("button");
      button.textContent = `${volume.file} (${volume.dims.join(" x ")})`;
      button.addEventListener("click", () => {
        void app.loadPreview({ proposalId: proposal.proposal_id, file: volume.file });
      });
      host.appendChild(button);
    }
  }
}

function renderReport(view: AppView, host: HTMLElement): void {
  if (view.report === null) {
    host.textContent = "";
    return;
  }
  const r = view.report;
  host.textContent = [
    `grid ${r.grid_before.join(" x ")} -> ${r.grid_after.join(" x ")}`,
    `size ratio ${r.size_ratio.toFixed(1)} (${r.original_bytes} -> ${r.reduced_bytes} bytes)`,
    `retained-point error: max_rel ${r.retained_point_error.max_rel.toExponential(2)}, ` +
      `rms ${r.retained_point_error.rms.toExponential(2)}`,
  ].join("\n");
}

export function mount(): void {
  const tokenInput = el<HTMLInputElement>("token");
  const connect = el<HTMLButtonElement>("connect");
  const volumeList = el<HTMLElement>("volume-list");
  const backButton = el<HTMLButtonElement>("back");
  const azimuth = el<HTMLInputElement>("azimuth");
  const elevation = el<HTMLInputElement>("elevation");
  const zoom = el<HTMLInputElement>("zoom");
  const isovalue = el<HTMLInputElement>("isovalue");
  const submit = el<HTMLButtonElement>("submit");
  const status = el<HTMLElement>("status");
  const warning = el<HTMLElement>("warning");
  const errorBox = el<HTMLElement>("error");
  const reportBox = el<HTMLElement>("report");
  const previewCanvas = el<HTMLCanvasElement>("preview");
  const resultCanvas = el<HTMLCanvasElement>("result");

  const client = new VolumeServiceClient(window.location.origin, "");
  const app = new PreviewApp(client);

  const readCamera = () => {
    app.setCamera({
      azimuth: Number(azimuth.value),
      elevation: Number(elevation.value),
      zoom: Number(zoom.value),
    });
  };
  azimuth.addEventListener("change", readCamera);
  elevation.addEventListener("change", readCamera);
  zoom.addEventListener("change", readCamera);
  isovalue.addEventListener("change", () => app.setIsovalue(Number(isovalue.value)));

  connect.addEventListener("click", () => {
    client.setToken(tokenInput.value.trim()); // held in memory only
    void app.refreshVolumes();
  });
  backButton.addEventListener("click", () => app.navigate("volumes"));
  submit.addEventListener("click", () => {
    void app.submitAndTrack();
  });

  app.onChange((view) => {
    renderVolumeList(app, view, volumeList);
    renderReport(view, reportBox);
    status.textContent = view.statusLine;
    warning.textContent = view.integrityWarning ?? "";
    errorBox.textContent = view.errorMessage ?? "";
    submit.disabled = !view.submitEnabled;
    if (view.state !== null) {
      azimuth.value = String(view.state.camera.azimuth);
      elevation.value = String(view.state.camera.elevation);
      zoom.value = String(view.state.camera.zoom);
      isovalue.value = String(view.state.isovalue);
    }
    paint(previewCanvas, view.preview);
    paint(resultCanvas, view.resultImage);
  });
}

if (typeof document !== "undefined" && document.getElementById("connect") !== null) {
  mount();
}
