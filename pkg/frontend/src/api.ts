// Wire types and transport for the forced-choice service.
//
// The stimulus payload deliberately carries no field saying which option is
// the corpus reference; the trial stays blind end to end.

export type StimulusPayload = {
  item_id: string;
  context: string;
  option_a: string;
  option_b: string;
  judged: number;
  total: number;
  done: false;
};

export type DonePayload = {
  done: true;
  judged: number;
  total: number;
};

export type NextItem = StimulusPayload | DonePayload;

export type Choice = "A" | "B";

export type JudgmentAck = {
  accepted: boolean;
  participant: string;
  item_id: string;
  choice: Choice;
};

export interface EvalApi {
  nextItem(participant: string): Promise<NextItem>;
  submitJudgment(participant: string, itemId: string, choice: Choice): Promise<JudgmentAck>;
}

export class HttpApi implements EvalApi {
  constructor(private baseUrl: string = "") {}

  async nextItem(participant: string): Promise<NextItem> {
    const url = `${this.baseUrl}/api/items/next?participant=${encodeURIComponent(participant)}`;
    const resp = await fetch(url);
    if (!resp.ok) throw new Error(`next item failed: HTTP ${resp.status}`);
    return (await resp.json()) as NextItem;
  }

  async submitJudgment(participant: string, itemId: string, choice: Choice): Promise<JudgmentAck> {
    const resp = await fetch(`${this.baseUrl}/api/judgments`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ participant, item_id: itemId, choice }),
    });
    if (!resp.ok) throw new Error(`judgment failed: HTTP ${resp.status}`);
    return (await resp.json()) as JudgmentAck;
  }
}
