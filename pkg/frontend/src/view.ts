// Canvas and DOM rendering for the operator console. Two 2D projections
// (top-down x-y and side x-z), the live error chart, the command history
// table, and the status banner. Pure drawing: all state lives in the
// client's view model.

import { UiSessionView } from "./client.js";
import { SnapshotFrame, Vec3 } from "./protocol.js";

export interface ViewElements {
  banner: HTMLElement;
  modeLabel: HTMLElement;
  statsLabel: HTMLElement;
  projectionXY: HTMLCanvasElement;
  projectionXZ: HTMLCanvasElement;
  errorChart: HTMLCanvasElement;
  historyBody: HTMLElement;
  noticeList: HTMLElement;
  buttons: {
    up: HTMLButtonElement;
    down: HTMLButtonElement;
    radiusBig: HTMLButtonElement;
    radiusSmall: HTMLButtonElement;
  };
}

const WORKSPACE_LO: Vec3 = [0.2, -0.2, 0.1];
const WORKSPACE_HI: Vec3 = [0.5, 0.2, 0.4];
const MARGIN = 24;

function scaler(
  canvas: HTMLCanvasElement,
  h: number,
  v: number,
): (p: Vec3) => [number, number] {
  const [hLo, hHi] = [WORKSPACE_LO[h], WORKSPACE_HI[h]];
  const [vLo, vHi] = [WORKSPACE_LO[v], WORKSPACE_HI[v]];
  const w = canvas.width - 2 * MARGIN;
  const ht = canvas.height - 2 * MARGIN;
  return (p) => [
    MARGIN + ((p[h] - hLo) / (hHi - hLo)) * w,
    canvas.height - MARGIN - ((p[v] - vLo) / (vHi - vLo)) * ht,
  ];
}

function metersToPixels(canvas: HTMLCanvasElement, h: number, r: number): number {
  const w = canvas.width - 2 * MARGIN;
  return (r / (WORKSPACE_HI[h] - WORKSPACE_LO[h])) * w;
}

function drawProjection(
  canvas: HTMLCanvasElement,
  snap: SnapshotFrame,
  epsilonGoal: number,
  hAxis: number,
  vAxis: number,
  title: string,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#444";
  ctx.strokeRect(MARGIN, MARGIN, canvas.width - 2 * MARGIN, canvas.height - 2 * MARGIN);
  ctx.fillStyle = "#888";
  ctx.font = "12px sans-serif";
  ctx.fillText(title, MARGIN, 16);
  const toPx = scaler(canvas, hAxis, vAxis);

  // goal with its tolerance circle
  const [gx, gy] = toPx(snap.x_g);
  ctx.strokeStyle = "#2e8b57";
  ctx.beginPath();
  ctx.arc(gx, gy, Math.max(metersToPixels(canvas, hAxis, epsilonGoal), 2), 0, 2 * Math.PI);
  ctx.stroke();
  ctx.fillStyle = "#2e8b57";
  ctx.beginPath();
  ctx.arc(gx, gy, 3, 0, 2 * Math.PI);
  ctx.fill();

  // subgoal with the active admission circle
  const [sx, sy] = toPx(snap.subgoal);
  ctx.strokeStyle = "#c08a2e";
  ctx.setLineDash([4, 3]);
  ctx.beginPath();
  ctx.arc(sx, sy, Math.max(metersToPixels(canvas, hAxis, snap.epsilon), 2), 0, 2 * Math.PI);
  ctx.stroke();
  ctx.setLineDash([]);
  ctx.fillStyle = "#c08a2e";
  ctx.fillRect(sx - 2, sy - 2, 4, 4);

  // end effector
  const [ex, ey] = toPx(snap.x);
  ctx.fillStyle = "#3b6fd4";
  ctx.beginPath();
  ctx.arc(ex, ey, 5, 0, 2 * Math.PI);
  ctx.fill();
}

function drawErrorChart(canvas: HTMLCanvasElement, view: UiSessionView): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const series = view.errorNorm;
  if (series.length < 2) return;
  const t0 = series[0].t;
  const t1 = series[series.length - 1].t;
  const span = Math.max(t1 - t0, 1e-6);
  const vMax = Math.max(...series.map((p) => p.value), 0.05);
  const w = canvas.width - 2 * MARGIN;
  const h = canvas.height - 2 * MARGIN;
  ctx.strokeStyle = "#444";
  ctx.strokeRect(MARGIN, MARGIN, w, h);
  ctx.fillStyle = "#888";
  ctx.font = "12px sans-serif";
  ctx.fillText("|e| vs sim time", MARGIN, 16);
  ctx.fillText(vMax.toFixed(3), 2, MARGIN + 8);

  const colors = ["#d44", "#4a4", "#46d"];
  const axisSeries = view.errorAxes;
  for (let a = 0; a < 3; a++) {
    ctx.strokeStyle = colors[a];
    ctx.globalAlpha = 0.5;
    ctx.beginPath();
    axisSeries[a].forEach((p, i) => {
      const px = MARGIN + ((p.t - t0) / span) * w;
      const py = canvas.height - MARGIN - ((p.value / vMax + 1) / 2) * h;
      if (i === 0) ctx.moveTo(px, py);
      else ctx.lineTo(px, py);
    });
    ctx.stroke();
  }
  ctx.globalAlpha = 1.0;
  ctx.strokeStyle = "#111";
  ctx.beginPath();
  series.forEach((p, i) => {
    const px = MARGIN + ((p.t - t0) / span) * w;
    const py = canvas.height - MARGIN - (p.value / vMax) * h;
    if (i === 0) ctx.moveTo(px, py);
    else ctx.lineTo(px, py);
  });
  ctx.stroke();
}

export function render(view: UiSessionView, el: ViewElements, epsilonGoal = 0.01): void {
  const status =
    view.connection === "open"
      ? view.summary
        ? "episode finished"
        : "live"
      : view.connection;
  el.banner.textContent = status;
  el.banner.className = `banner ${view.connection}`;

  const snap = view.snapshot;
  if (snap) {
    el.modeLabel.textContent =
      `mode: ${snap.mode}   t=${snap.sim_time.toFixed(1)}s   ` +
      `|e|=${Math.hypot(...snap.e).toFixed(4)}m   osc=${snap.n_osc}`;
    drawProjection(el.projectionXY, snap, epsilonGoal, 0, 1, "top view (x-y)");
    drawProjection(el.projectionXZ, snap, epsilonGoal, 0, 2, "side view (x-z)");
    drawErrorChart(el.errorChart, view);
  }
  el.statsLabel.textContent =
    `radius: ${view.stickyRadius}   commands: ${view.history.length}   ` +
    `dropped frames: ${view.droppedFrames}`;

  const sendable = view.connection === "open" && snap?.mode === "awaiting_command";
  el.buttons.up.disabled = !sendable;
  el.buttons.down.disabled = !sendable;
  el.buttons.radiusBig.classList.toggle("active", view.stickyRadius === "big");
  el.buttons.radiusSmall.classList.toggle("active", view.stickyRadius === "small");

  el.historyBody.innerHTML = view.history
    .slice(-12)
    .map(
      (row) =>
        `<tr><td>${row.index}</td><td>${row.direction > 0 ? "+1" : "-1"}</td>` +
        `<td>${row.radius}</td><td>${row.acknowledged}</td>` +
        `<td>${row.atSimTime.toFixed(1)}s</td></tr>`,
    )
    .join("");
  el.noticeList.innerHTML = view.notices
    .slice(-5)
    .map((n) => `<li>${n}</li>`)
    .join("");
}
