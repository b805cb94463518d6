import { ApiClient } from "./api.js";
import { UiSession } from "./session.js";
import { AnswerTimer } from "./telemetry.js";
import { bindKeyboard, renderBanner, renderQuery, renderStep, renderSummary } from "./ui.js";

function baseUrl(): string {
  const param = new URLSearchParams(window.location.search).get("api");
  if (param) {
    window.localStorage.setItem("pairsearch-api", param);
    return param;
  }
  return window.localStorage.getItem("pairsearch-api") ?? "";
}

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node;
}

async function boot(): Promise<void> {
  const api = new ApiClient(baseUrl());
  const session = new UiSession(api);
  const timer = new AnswerTimer();
  const cards = el("cards");
  const stepEl = el("step");
  const banner = el("banner");
  const footer = el("footer");

  function updateFooter(): void {
    const median = timer.medianMs();
    footer.textContent = median === null
      ? ""
      : `median time to answer: ${(median / 1000).toFixed(1)}s over ${timer.count()} clicks`;
  }

  function showQuery(): void {
    if (session.query) {
      renderQuery(cards, session.query, handlers);
      renderStep(stepEl, session.query.step);
      timer.queryShown();
    }
  }

  const handlers = {
    onPick: (id: number) => {
      timer.clicked();
      updateFooter();
      void session
        .answer(id)
        .then(() => {
          if (session.phase === "exhausted") {
            renderBanner(banner, "No more objects to show — start a new search?");
            cards.replaceChildren();
          } else {
            showQuery();
          }
        })
        .catch((err) => renderBanner(banner, String(err)));
    },
    onFound: (id: number) => {
      timer.clicked();
      updateFooter();
      void session
        .found(id)
        .then((summary) => {
          renderSummary(cards, summary);
          renderBanner(banner, "");
        })
        .catch((err) => renderBanner(banner, String(err)));
    },
  };

  document.addEventListener("keydown", bindKeyboard(handlers, () => session.candidateIds()));
  el("start").addEventListener("click", () => {
    renderBanner(banner, "");
    void session
      .start()
      .then(() => showQuery())
      .catch(() => renderBanner(banner, "Search service unreachable — is the server running?"));
  });

  try {
    await api.health();
    renderBanner(banner, "");
  } catch {
    renderBanner(banner, "Search service unreachable — is the server running?");
  }
}

void boot();
