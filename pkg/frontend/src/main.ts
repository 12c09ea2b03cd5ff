import { Client } from "./api.js";
import { App } from "./app.js";

const params = new URLSearchParams(window.location.search);
const app = new App(document.getElementById("app") as HTMLElement, new Client(), {
  annotator: params.get("annotator") ?? "reviewer",
  batch: params.get("batch") ?? "demo",
  pollMs: Number(params.get("poll") ?? "4000"),
});
void app.start();
