import { HttpApi } from "./api.js";
import { renderResults } from "./results.js";
import { SessionController } from "./session.js";
import { DomView } from "./view.js";

async function start(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app container");
  const params = new URLSearchParams(window.location.search);

  if (params.get("view") === "results") {
    await renderResults(root);
    return;
  }

  let participant = params.get("participant");
  while (!participant) {
    participant = window.prompt("Participant id?");
  }
  const controller = new SessionController(new HttpApi(), new DomView(root), participant);
  await controller.run();
}

start().catch((err) => {
  const root = document.getElementById("app");
  if (root) root.innerHTML = `<p class="banner visible">Session error: ${String(err)}</p>`;
});
