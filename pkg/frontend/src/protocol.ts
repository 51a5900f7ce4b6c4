/**
 * Typed-tie label space and the five-step rating procedure.
 *
 * This mirrors the server-side validator exactly; the stepper can only
 * produce payloads this module accepts, and the shared fuzz corpus pins
 * both implementations to the same verdicts.
 */

export type RatingValue = "1" | "2" | "both_good" | "both_bad";
export type Dim = "content" | "vq" | "para" | "overall";
export type PassKind = "blind" | "hcot" | "hcot_resample";

export const RATING_VALUES: RatingValue[] = ["1", "2", "both_good", "both_bad"];

export interface StepEntry {
  dim: Dim;
  acceptable_a: boolean;
  acceptable_b: boolean;
  rating: RatingValue;
  t: number;
}

export interface Violation {
  step: string;
  message: string;
}

export function passDims(pass: PassKind): Dim[] {
  return pass === "blind" ? ["overall"] : ["content", "vq", "para", "overall"];
}

export function isWinner(rating: RatingValue): boolean {
  return rating === "1" || rating === "2";
}

/** Ratings permitted once both acceptability decisions are made. */
export function allowedRatings(aOk: boolean, bOk: boolean): RatingValue[] {
  if (aOk !== bOk) return [aOk ? "1" : "2"];
  if (!aOk) return ["both_bad"];
  return ["1", "2", "both_good"];
}

function entryViolation(entry: Partial<StepEntry>): Violation | null {
  const dim = entry.dim ?? "?";
  if (typeof entry.acceptable_a !== "boolean" ||
      typeof entry.acceptable_b !== "boolean") {
    return {
      step: "step_1_2",
      message: `${dim}: per-side acceptability must be decided before rating`,
    };
  }
  const rating = entry.rating as RatingValue | undefined;
  if (rating === undefined || !RATING_VALUES.includes(rating)) {
    return { step: "label", message: `${dim}: rating outside the label space` };
  }
  const aOk = entry.acceptable_a;
  const bOk = entry.acceptable_b;
  if (aOk !== bOk) {
    const forced: RatingValue = aOk ? "1" : "2";
    if (rating !== forced) {
      return {
        step: "step_3",
        message: `${dim}: exactly one side acceptable forces '${forced}'`,
      };
    }
  } else if (!aOk) {
    if (rating !== "both_bad") {
      return {
        step: "step_4",
        message: `${dim}: both sides unacceptable forces 'both_bad'`,
      };
    }
  } else if (rating === "both_bad") {
    return {
      step: "step_5",
      message: `${dim}: both sides acceptable permits a winner or 'both_good'`,
    };
  }
  return null;
}

export function validateStepTrace(
  pass: PassKind,
  entries: Array<Partial<StepEntry>>,
): Violation[] {
  const violations: Violation[] = [];
  const dims = entries.map((e) => e.dim);
  const expected = passDims(pass);
  if (dims.length !== expected.length ||
      dims.some((d, i) => d !== expected[i])) {
    violations.push({
      step: "dimension_order",
      message: `${pass} pass must rate ${expected.join(", ")} in order`,
    });
  }
  const times = entries.map((e) => e.t);
  if (times.some((t) => typeof t !== "number" || Number.isNaN(t))) {
    violations.push({
      step: "timestamps",
      message: "every step needs a commit timestamp",
    });
  } else {
    for (let i = 1; i < times.length; i++) {
      if ((times[i] as number) <= (times[i - 1] as number)) {
        violations.push({
          step: "timestamps",
          message: "step timestamps must strictly increase",
        });
        break;
      }
    }
  }
  for (const entry of entries) {
    const violation = entryViolation(entry);
    if (violation !== null) violations.push(violation);
  }
  return violations;
}
