import { ApiClient } from "./api.js";
import { App } from "./app.js";

declare global {
  interface Window {
    COFORGE_BASE_URL?: string;
  }
}

const root = document.getElementById("app");
if (root) {
  // same-origin by default; override when the engine runs elsewhere
  const base = window.COFORGE_BASE_URL ?? "";
  const app = new App(new ApiClient(base), root);
  const sessionId = new URLSearchParams(window.location.search).get("session");
  if (sessionId) {
    void app.open(sessionId);
  }
}
