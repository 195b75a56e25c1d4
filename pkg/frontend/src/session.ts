// Forced-choice session loop: fetch item -> render -> capture -> submit.
//
// A judgment is only considered delivered once the service acknowledges it;
// network or server failures re-submit the same judgment (the service
// overwrites by (participant, item), so retries cannot duplicate a vote).

import type { Choice, EvalApi, StimulusPayload } from "./api.js";

export interface SessionView {
  showItem(item: StimulusPayload): Promise<Choice>;
  showRetry(message: string): Promise<void>;
  showDone(judged: number, total: number): void;
}

export type SessionResult = {
  judged: number;
  acknowledged: number;
  retries: number;
};

const RETRY_DELAY_MS = 500;

export class SessionController {
  constructor(
    private api: EvalApi,
    private view: SessionView,
    private participant: string,
    private retryDelayMs: number = RETRY_DELAY_MS,
  ) {}

  async run(): Promise<SessionResult> {
    const result: SessionResult = { judged: 0, acknowledged: 0, retries: 0 };
    for (;;) {
      const item = await this.api.nextItem(this.participant);
      if (item.done) {
        this.view.showDone(item.judged, item.total);
        return result;
      }
      const choice = await this.view.showItem(item);
      result.judged += 1;
      await this.submitUntilAcked(item.item_id, choice, result);
    }
  }

  private async submitUntilAcked(itemId: string, choice: Choice, result: SessionResult): Promise<void> {
    for (;;) {
      try {
        const ack = await this.api.submitJudgment(this.participant, itemId, choice);
        if (ack.accepted) {
          result.acknowledged += 1;
          return;
        }
        throw new Error("service did not accept the judgment");
      } catch (err) {
        result.retries += 1;
        await this.view.showRetry(String(err));
        await sleep(this.retryDelayMs);
      }
    }
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
