import { describe, expect, it } from "vitest";

import { validateStepTrace } from "../src/protocol.js";
import type { PassKind, RatingValue } from "../src/protocol.js";
import { Stepper, StepperError, viewModel } from "../src/stepper.js";

// deterministic PRNG (mulberry32) so the property run is reproducible
function rng(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function playAll(stepper: Stepper): void {
  stepper.markPlayed("prompt", 1);
  stepper.markPlayed("a", 0.95);
  stepper.markPlayed("b", 1);
}

function drive(stepper: Stepper, random: () => number): void {
  while (!stepper.complete()) {
    playAll(stepper);
    stepper.setAcceptable("a", random() < 0.6);
    stepper.setAcceptable("b", random() < 0.6);
    // occasionally flip a decision before committing, like a real user
    if (random() < 0.3) stepper.setAcceptable("a", random() < 0.5);
    const enabled = stepper.enabledRatings();
    stepper.commit(enabled[Math.floor(random() * enabled.length)]);
  }
}

describe("stepper", () => {
  it("never constructs a payload the validator rejects (1000 runs)", () => {
    const random = rng(20250810);
    const passes: PassKind[] = ["blind", "hcot", "hcot_resample"];
    for (let i = 0; i < 1000; i++) {
      const pass = passes[Math.floor(random() * passes.length)];
      const stepper = new Stepper(pass, `ex${i}`, () => i + random());
      drive(stepper, random);
      const payload = stepper.payload("session");
      expect(validateStepTrace(pass, payload.step_trace)).toEqual([]);
      expect(payload.overall).toBe(
        payload.step_trace[payload.step_trace.length - 1].rating);
    }
  });

  it("blocks ratings until every clip played to at least 90%", () => {
    const stepper = new Stepper("hcot", "ex1", () => 1);
    stepper.setAcceptable("a", true);
    stepper.setAcceptable("b", true);
    expect(stepper.enabledRatings()).toEqual([]);
    stepper.markPlayed("prompt", 1);
    stepper.markPlayed("a", 0.5);
    stepper.markPlayed("b", 1);
    expect(stepper.enabledRatings()).toEqual([]);
    expect(() => stepper.commit("1")).toThrow(StepperError);
    stepper.markPlayed("a", 0.91);
    expect(stepper.enabledRatings()).toEqual(["1", "2", "both_good"]);
  });

  it("forces the winner when exactly one side is acceptable", () => {
    const stepper = new Stepper("hcot", "ex2");
    playAll(stepper);
    stepper.setAcceptable("a", false);
    stepper.setAcceptable("b", true);
    expect(stepper.enabledRatings()).toEqual(["2"]);
    expect(stepper.forcedRating()).toBe("2");
    expect(() => stepper.commit("1")).toThrow(StepperError);
    stepper.commit("2");
    expect(stepper.trace[0].rating).toBe("2");
  });

  it("forces both_bad when neither side is acceptable", () => {
    const stepper = new Stepper("hcot", "ex3");
    playAll(stepper);
    stepper.setAcceptable("a", false);
    stepper.setAcceptable("b", false);
    expect(stepper.enabledRatings()).toEqual(["both_bad"]);
    expect(() => stepper.commit("both_good" as RatingValue)).toThrow();
  });

  it("walks the fixed dimension order and only forward", () => {
    const stepper = new Stepper("hcot", "ex4");
    expect(stepper.currentDim).toBe("content");
    playAll(stepper);
    stepper.setAcceptable("a", true);
    stepper.setAcceptable("b", true);
    stepper.commit("both_good");
    expect(stepper.currentDim).toBe("vq");
    // per-page state resets: playback and acceptability must be redone
    expect(stepper.enabledRatings()).toEqual([]);
  });

  it("timestamps strictly increase even with a frozen clock", () => {
    const stepper = new Stepper("hcot", "ex5", () => 42);
    const random = rng(7);
    drive(stepper, random);
    const times = stepper.trace.map((e) => e.t);
    for (let i = 1; i < times.length; i++) {
      expect(times[i]).toBeGreaterThan(times[i - 1]);
    }
  });

  it("jumpBackTo reopens a dimension and discards later commits", () => {
    const stepper = new Stepper("hcot", "ex6");
    const random = rng(9);
    drive(stepper, random);
    expect(stepper.complete()).toBe(true);
    stepper.jumpBackTo("vq");
    expect(stepper.complete()).toBe(false);
    expect(stepper.currentDim).toBe("vq");
    expect(stepper.trace.map((e) => e.dim)).toEqual(["content"]);
    drive(stepper, random);
    expect(validateStepTrace("hcot",
                             stepper.payload("s").step_trace)).toEqual([]);
  });

  it("blind pass exposes a single overall step and no dimension labels", () => {
    const stepper = new Stepper("blind", "ex7");
    expect(stepper.dims).toEqual(["overall"]);
    const view = viewModel(stepper);
    expect(view.showDimensionLabels).toBe(false);
    expect(view.steps.map((s) => s.label)).toEqual(["Overall"]);
    const labels = JSON.stringify(view.steps);
    for (const hidden of ["Content", "Voice Quality", "Paralinguistics"]) {
      expect(labels).not.toContain(hidden);
    }
  });

  it("payload is refused before all steps are committed", () => {
    const stepper = new Stepper("hcot", "ex8");
    expect(() => stepper.payload("s")).toThrow(StepperError);
  });
});
