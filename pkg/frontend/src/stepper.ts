/**
 * The dimension-first annotation state machine.
 *
 * One page per dimension, in fixed order. A page commits only after (1)
 * every clip has played to at least 90% on that page, (2) both per-side
 * acceptability toggles are set, and (3) the chosen rating is one the
 * acceptability pair permits. Forward navigation only; the server's
 * validator can never see an inconsistent payload from here.
 */

import {
  Dim,
  PassKind,
  RatingValue,
  StepEntry,
  allowedRatings,
  passDims,
} from "./protocol.js";

export const PLAYBACK_GATE = 0.9;
export type ClipKey = "prompt" | "a" | "b";
const CLIPS: ClipKey[] = ["prompt", "a", "b"];

export interface RatingPayload {
  session_id: string;
  example_id: string;
  step_trace: StepEntry[];
  overall: RatingValue;
}

export class StepperError extends Error {}

interface PageState {
  played: Record<ClipKey, number>;
  acceptableA: boolean | null;
  acceptableB: boolean | null;
}

function freshPage(): PageState {
  return { played: { prompt: 0, a: 0, b: 0 }, acceptableA: null,
           acceptableB: null };
}

export class Stepper {
  readonly pass: PassKind;
  readonly exampleId: string;
  readonly dims: Dim[];
  private index = 0;
  private page: PageState = freshPage();
  private committed: StepEntry[] = [];
  private lastT = 0;
  private readonly clock: () => number;

  constructor(pass: PassKind, exampleId: string,
              clock: () => number = () => Date.now() / 1000) {
    this.pass = pass;
    this.exampleId = exampleId;
    this.dims = passDims(pass);
    this.clock = clock;
  }

  get currentDim(): Dim | null {
    return this.index < this.dims.length ? this.dims[this.index] : null;
  }

  get trace(): StepEntry[] {
    return [...this.committed];
  }

  get acceptableA(): boolean | null {
    return this.page.acceptableA;
  }

  get acceptableB(): boolean | null {
    return this.page.acceptableB;
  }

  /** Record playback progress (monotonic max) for the current page. */
  markPlayed(clip: ClipKey, fraction: number): void {
    this.page.played[clip] = Math.max(this.page.played[clip],
                                      Math.min(1, fraction));
  }

  playbackGatePassed(): boolean {
    return CLIPS.every((c) => this.page.played[c] >= PLAYBACK_GATE);
  }

  setAcceptable(side: "a" | "b", value: boolean): void {
    if (this.currentDim === null) {
      throw new StepperError("all dimensions already committed");
    }
    if (side === "a") this.page.acceptableA = value;
    else this.page.acceptableB = value;
  }

  /**
   * Ratings currently enabled: empty until playback and both
   * acceptability decisions are in; then exactly the step-3/4/5 choices.
   */
  enabledRatings(): RatingValue[] {
    if (this.currentDim === null || !this.playbackGatePassed()) return [];
    const { acceptableA, acceptableB } = this.page;
    if (acceptableA === null || acceptableB === null) return [];
    return allowedRatings(acceptableA, acceptableB);
  }

  /** One rating is forced by step 3/4; the UI renders it confirm-only. */
  forcedRating(): RatingValue | null {
    const enabled = this.enabledRatings();
    return enabled.length === 1 ? enabled[0] : null;
  }

  commit(rating: RatingValue): void {
    const dim = this.currentDim;
    if (dim === null) throw new StepperError("all dimensions committed");
    if (!this.playbackGatePassed()) {
      throw new StepperError("listen to every clip (>=90%) before rating");
    }
    const enabled = this.enabledRatings();
    if (!enabled.includes(rating)) {
      throw new StepperError(
        `rating '${rating}' not permitted by the acceptability decisions`);
    }
    const now = Math.max(this.clock(), this.lastT + 1e-3);
    this.lastT = now;
    this.committed.push({
      dim,
      acceptable_a: this.page.acceptableA as boolean,
      acceptable_b: this.page.acceptableB as boolean,
      rating,
      t: now,
    });
    this.index += 1;
    this.page = freshPage();
  }

  /** Re-open the trace at a dimension (server 422 recovery path). */
  jumpBackTo(dim: Dim): void {
    const target = this.dims.indexOf(dim);
    if (target < 0) throw new StepperError(`no such dimension ${dim}`);
    this.index = target;
    this.committed = this.committed.slice(0, target);
    this.page = freshPage();
  }

  complete(): boolean {
    return this.committed.length === this.dims.length;
  }

  payload(sessionId: string): RatingPayload {
    if (!this.complete()) {
      throw new StepperError("cannot submit before every step is committed");
    }
    const overall = this.committed[this.committed.length - 1].rating;
    return {
      session_id: sessionId,
      example_id: this.exampleId,
      step_trace: this.trace,
      overall,
    };
  }
}

/** Pure view description consumed by the DOM layer (and by tests). */
export interface StepperView {
  exampleId: string;
  /** Dimension labels are hidden entirely during blind passes. */
  showDimensionLabels: boolean;
  steps: Array<{
    dim: Dim;
    label: string;
    state: "done" | "active" | "pending";
  }>;
  activeDim: Dim | null;
  playbackGatePassed: boolean;
  acceptableA: boolean | null;
  acceptableB: boolean | null;
  enabledRatings: RatingValue[];
  forcedRating: RatingValue | null;
}

const DIM_LABELS: Record<Dim, string> = {
  content: "Content",
  vq: "Voice Quality",
  para: "Paralinguistics",
  overall: "Overall",
};

export function viewModel(stepper: Stepper): StepperView {
  const blind = stepper.pass === "blind";
  const doneCount = stepper.trace.length;
  return {
    exampleId: stepper.exampleId,
    showDimensionLabels: !blind,
    steps: stepper.dims.map((dim, i) => ({
      dim,
      label: blind ? "Overall" : DIM_LABELS[dim],
      state: i < doneCount ? "done" : i === doneCount ? "active" : "pending",
    })),
    activeDim: stepper.currentDim,
    playbackGatePassed: stepper.playbackGatePassed(),
    acceptableA: stepper.acceptableA,
    acceptableB: stepper.acceptableB,
    enabledRatings: stepper.enabledRatings(),
    forcedRating: stepper.forcedRating(),
  };
}
