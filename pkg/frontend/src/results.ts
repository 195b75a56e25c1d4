// Experimenter dashboard: agreement percentages and per-item vote counts.

type ItemResult = {
  item_id: string;
  votes_for_reference: number;
  votes_total: number;
  human_label: number | null;
  model_chose_reference: boolean;
};

type ResultsSummary = {
  n_items: number;
  n_judged_items: number;
  n_judgments: number;
  items: ItemResult[];
  human_corpus_pct: number | null;
  model_corpus_pct: number | null;
  model_human_pct: number | null;
  pearson_model_human: number | null;
  pearson_model_corpus: number | null;
};

function pct(v: number | null): string {
  return v === null ? "–" : v.toFixed(2);
}

function corr(v: number | null): string {
  return v === null ? "–" : v.toFixed(3);
}

export async function renderResults(root: HTMLElement, baseUrl = ""): Promise<void> {
  const resp = await fetch(`${baseUrl}/api/results`);
  if (!resp.ok) {
    root.innerHTML = `<p class="banner visible">Could not load results (HTTP ${resp.status}).</p>`;
    return;
  }
  const summary = (await resp.json()) as ResultsSummary;
  const rows = summary.items
    .map(
      (it) => `
      <tr>
        <td>${it.item_id}</td>
        <td>${it.votes_for_reference} / ${it.votes_total}</td>
        <td>${it.human_label === null ? "–" : it.human_label}</td>
        <td>${it.model_chose_reference ? "reference" : "variant"}</td>
      </tr>`,
    )
    .join("");
  root.innerHTML = `
    <h2>Results (${summary.n_judgments} judgments over ${summary.n_judged_items}/${summary.n_items} items)</h2>
    <table>
      <tr><th>Agreement human:corpus %</th><td>${pct(summary.human_corpus_pct)}</td></tr>
      <tr><th>Model:corpus %</th><td>${pct(summary.model_corpus_pct)}</td></tr>
      <tr><th>Model:human %</th><td>${pct(summary.model_human_pct)}</td></tr>
      <tr><th>Pearson model/human</th><td>${corr(summary.pearson_model_human)}</td></tr>
      <tr><th>Pearson model/corpus</th><td>${corr(summary.pearson_model_corpus)}</td></tr>
    </table>
    <h3>Per item</h3>
    <table>
      <tr><th>Item</th><th>Votes for reference</th><th>Human label</th><th>Model chose</th></tr>
      ${rows}
    </table>
  `;
}
