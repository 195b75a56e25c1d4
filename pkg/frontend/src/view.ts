// DOM view: context sentence on top, the two candidate continuations
// stacked below as neutral "Option 1"/"Option 2" buttons.  Keys 1/2 mirror
// the clicks.  Order comes from the service (option_a first).

import type { Choice, StimulusPayload } from "./api.js";
import type { SessionView } from "./session.js";

export class DomView implements SessionView {
  private root: HTMLElement;

  constructor(root: HTMLElement) {
    this.root = root;
  }

  showItem(item: StimulusPayload): Promise<Choice> {
    return new Promise((resolve) => {
      this.root.innerHTML = `
        <div class="progress">${item.judged + 1} / ${item.total}</div>
        <div class="context">
          <h2>Context</h2>
          <p>${escapeHtml(item.context)}</p>
        </div>
        <h2>Which sentence is the most likely continuation?</h2>
        <button class="option" id="option-a" disabled>
          <span class="tag">Option 1</span> ${escapeHtml(item.option_a)}
        </button>
        <button class="option" id="option-b" disabled>
          <span class="tag">Option 2</span> ${escapeHtml(item.option_b)}
        </button>
        <p class="hint">Click an option or press 1 / 2.</p>
        <div class="banner" id="banner"></div>
      `;
      const buttons = {
        A: this.root.querySelector<HTMLButtonElement>("#option-a")!,
        B: this.root.querySelector<HTMLButtonElement>("#option-b")!,
      };
      const finish = (choice: Choice) => {
        buttons.A.disabled = true;
        buttons.B.disabled = true;
        document.removeEventListener("keydown", onKey);
        resolve(choice);
      };
      const onKey = (ev: KeyboardEvent) => {
        if (ev.key === "1") finish("A");
        if (ev.key === "2") finish("B");
      };
      buttons.A.addEventListener("click", () => finish("A"));
      buttons.B.addEventListener("click", () => finish("B"));
      document.addEventListener("keydown", onKey);
      // enable only once wired, so a click can never fire before the handler
      buttons.A.disabled = false;
      buttons.B.disabled = false;
    });
  }

  async showRetry(message: string): Promise<void> {
    const banner = this.root.querySelector("#banner");
    if (banner) {
      banner.textContent = `Submission failed (${message}); retrying…`;
      banner.className = "banner visible";
    }
  }

  showDone(judged: number, total: number): void {
    this.root.innerHTML = `
      <h2>All done — thank you!</h2>
      <p>You judged ${judged} of ${total} items.</p>
    `;
  }
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
