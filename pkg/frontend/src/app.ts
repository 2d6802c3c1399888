// Browser entry point: wire the session client to the DOM.

import { SessionClient } from "./client.js";
import { render, ViewElements } from "./view.js";

function grab<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

function wsUrl(): string {
  const params = new URLSearchParams(window.location.search);
  const base =
    params.get("service") ??
    `${window.location.protocol === "https:" ? "wss" : "ws"}://${window.location.host}`;
  const seed = params.get("seed") ?? "0";
  return `${base}/ws/session?seed=${seed}`;
}

export function start(): void {
  const elements: ViewElements = {
    banner: grab("banner"),
    modeLabel: grab("mode-label"),
    statsLabel: grab("stats-label"),
    projectionXY: grab<HTMLCanvasElement>("proj-xy"),
    projectionXZ: grab<HTMLCanvasElement>("proj-xz"),
    errorChart: grab<HTMLCanvasElement>("error-chart"),
    historyBody: grab("history-body"),
    noticeList: grab("notice-list"),
    buttons: {
      up: grab<HTMLButtonElement>("btn-up"),
      down: grab<HTMLButtonElement>("btn-down"),
      radiusBig: grab<HTMLButtonElement>("btn-radius-big"),
      radiusSmall: grab<HTMLButtonElement>("btn-radius-small"),
    },
  };

  const client = new SessionClient({
    url: wsUrl(),
    socketFactory: (url) => new WebSocket(url) as never,
    onChange: (view) => render(view, elements),
  });

  elements.buttons.up.addEventListener("click", () => client.sendCommand(1));
  elements.buttons.down.addEventListener("click", () => client.sendCommand(-1));
  elements.buttons.radiusBig.addEventListener("click", () =>
    client.setRadius("big"),
  );
  elements.buttons.radiusSmall.addEventListener("click", () =>
    client.setRadius("small"),
  );
  document.addEventListener("keydown", (ev) => {
    if (client.handleKey(ev.key)) ev.preventDefault();
  });

  client.connect();
}

start();
