/** Time-to-answer measurement: elapsed time between a query being shown
 * and the user's click, with a running median for the footer display. */
export class AnswerTimer {
  private shownAt: number | null = null;
  private durationsMs: number[] = [];

  constructor(private readonly now: () => number = () => performance.now()) {}

  queryShown(): void {
    this.shownAt = this.now();
  }

  clicked(): number | null {
    if (this.shownAt === null) {
      return null;
    }
    const elapsed = this.now() - this.shownAt;
    this.durationsMs.push(elapsed);
    this.shownAt = null;
    return elapsed;
  }

  medianMs(): number | null {
    if (this.durationsMs.length === 0) {
      return null;
    }
    const sorted = [...this.durationsMs].sort((a, b) => a - b);
    const mid = Math.floor(sorted.length / 2);
    return sorted.length % 2 === 1
      ? sorted[mid]
      : (sorted[mid - 1] + sorted[mid]) / 2;
  }

  count(): number {
    return this.durationsMs.length;
  }
}
