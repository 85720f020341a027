import { StudioClient } from "./api.js";
import { StudioApp } from "./app.js";

const params = new URLSearchParams(window.location.search);
const base = params.get("server") ?? "http://127.0.0.1:8765";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app element");

const app = new StudioApp(root, new StudioClient(base));
app.start().catch((err) => {
  root.textContent = `failed to reach service at ${base}: ${err}`;
});
