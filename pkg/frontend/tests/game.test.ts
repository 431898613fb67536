import { describe, expect, it } from "vitest";

import {
  applyAccepted,
  applyConflict,
  generateAnnotatorId,
  newSession,
  pointsForNextAnswer,
} from "../src/game";

describe("session scoring", () => {
  it("starts at zero", () => {
    const s = newSession("gardener-1");
    expect(s.score).toBe(0);
    expect(s.streak).toBe(0);
    expect(s.answered).toBe(0);
  });

  it("first accepted answer scores 10 and starts the streak", () => {
    const s = applyAccepted(newSession("g"));
    expect(s.score).toBe(10);
    expect(s.streak).toBe(1);
    expect(s.answered).toBe(1);
  });

  it("two consecutive answers score 10 + 12", () => {
    const s = applyAccepted(applyAccepted(newSession("g")));
    expect(s.score).toBe(22);
    expect(s.streak).toBe(2);
    expect(s.answered).toBe(2);
  });

  it("the streak bonus grows by 2 per consecutive answer", () => {
    let s = newSession("g");
    const gains: number[] = [];
    for (let i = 0; i < 4; i++) {
      gains.push(pointsForNextAnswer(s));
      s = applyAccepted(s);
    }
    expect(gains).toEqual([10, 12, 14, 16]);
    expect(s.score).toBe(52);
  });

  it("a conflict changes nothing", () => {
    const before = applyAccepted(newSession("g"));
    const after = applyConflict(before);
    expect(after).toEqual(before);
  });

  it("every accepted answer advances the answered count by exactly 1", () => {
    let s = newSession("g");
    for (let i = 1; i <= 5; i++) {
      s = applyAccepted(s);
      expect(s.answered).toBe(i);
    }
  });

  it("rejects an empty annotator id", () => {
    expect(() => newSession("")).toThrow();
  });

  it("generates distinct annotator ids", () => {
    const ids = new Set(Array.from({ length: 50 }, generateAnnotatorId));
    expect(ids.size).toBe(50);
    for (const id of ids) {
      expect(id).toMatch(/^gardener-/);
    }
  });
});
