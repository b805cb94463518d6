import { describe, expect, it } from "vitest";

import { AnswerTimer } from "../src/telemetry.js";

function timerWithClock(times: number[]): AnswerTimer {
  let i = 0;
  return new AnswerTimer(() => times[i++]);
}

describe("AnswerTimer", () => {
  it("measures shown-to-click durations", () => {
    const timer = timerWithClock([100, 5100]);
    timer.queryShown();
    expect(timer.clicked()).toBe(5000);
    expect(timer.count()).toBe(1);
  });

  it("ignores clicks with no query shown", () => {
    const timer = timerWithClock([]);
    expect(timer.clicked()).toBeNull();
  });

  it("reports the median over odd and even counts", () => {
    const timer = timerWithClock([0, 1000, 1000, 4000, 4000, 6000]);
    timer.queryShown();
    timer.clicked(); // 1000
    timer.queryShown();
    timer.clicked(); // 3000
    expect(timer.medianMs()).toBe(2000);
    timer.queryShown();
    timer.clicked(); // 2000
    expect(timer.medianMs()).toBe(2000);
  });

  it("returns null with no data", () => {
    expect(new AnswerTimer().medianMs()).toBeNull();
  });
});
