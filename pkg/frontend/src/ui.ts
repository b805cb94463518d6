import type { Query, SessionSummary } from "./types.js";

export interface CardHandlers {
  onPick(id: number): void;
  onFound(id: number): void;
}

/** Render the candidate cards for one query. Cards fall back to label-only
 * when an object has no image. All actions are buttons (keyboard
 * reachable); digit keys 1..k pick, shift+digit marks found. */
export function renderQuery(root: HTMLElement, query: Query, handlers: CardHandlers): void {
  root.replaceChildren();
  query.candidates.forEach((candidate, index) => {
    const card = document.createElement("div");
    card.className = "card";
    if (candidate.image_ref) {
      const img = document.createElement("img");
      img.src = candidate.image_ref;
      img.alt = candidate.label;
      card.appendChild(img);
    }
    const label = document.createElement("p");
    label.textContent = candidate.label;
    card.appendChild(label);

    const pick = document.createElement("button");
    pick.textContent = `Closer to my target (${index + 1})`;
    pick.className = "pick";
    pick.addEventListener("click", () => handlers.onPick(candidate.id));
    card.appendChild(pick);

    const found = document.createElement("button");
    found.textContent = "It's this one!";
    found.className = "found";
    found.addEventListener("click", () => handlers.onFound(candidate.id));
    card.appendChild(found);

    root.appendChild(card);
  });
}

export function renderStep(el: HTMLElement, step: number): void {
  el.textContent = `question ${step}`;
}

export function renderSummary(root: HTMLElement, summary: SessionSummary): void {
  root.replaceChildren();
  const p = document.createElement("p");
  p.className = "summary";
  p.textContent =
    `Found object ${summary.target} after ${summary.steps} answers ` +
    `(${summary.triplets_added} comparisons recorded, embedding v${summary.embedding_version}).`;
  root.appendChild(p);
}

export function renderBanner(el: HTMLElement, message: string): void {
  el.textContent = message;
  el.hidden = message.length === 0;
}

export function bindKeyboard(handlers: CardHandlers, candidateIds: () => number[]): (e: KeyboardEvent) => void {
  return (event: KeyboardEvent) => {
    const digit = Number.parseInt(event.key, 10);
    if (!Number.isInteger(digit) || digit < 1) {
      return;
    }
    const ids = candidateIds();
    if (digit > ids.length) {
      return;
    }
    if (event.shiftKey) {
      handlers.onFound(ids[digit - 1]);
    } else {
      handlers.onPick(ids[digit - 1]);
    }
  };
}
