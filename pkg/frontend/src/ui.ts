/**
 * DOM layer: renders the stepper view model and wires audio elements to
 * the playback gate. Kept thin; all decisions live in stepper/protocol.
 */

import { TaskDescriptor } from "./api.js";
import { Dim, RatingValue } from "./protocol.js";
import { PlaybackTracker } from "./player.js";
import { ClipKey, Stepper, viewModel } from "./stepper.js";

// Per-dimension rubric shown above the rating controls; the overall page
// restates the typed-tie instruction.
const RUBRICS: Record<Dim, string> = {
  content: "Does the content fulfill the user's request accurately? Did " +
    "the content of the response appropriately address the user's " +
    "instruction?",
  vq: "How good is the voice quality of the response? Does it sound " +
    "natural/human, does it mispronounce words, does it have pops or " +
    "echoes?",
  para: "Does the response correctly perceive emotion from the user's " +
    "tone of voice, express emotion through tone of voice, and follow " +
    "paralinguistic instructions?",
  overall: "Taking everything together: first decide whether each " +
    "response is acceptable, then pick a winner or a typed tie.",
};

const RATING_LABELS: Record<RatingValue, string> = {
  "1": "Response A wins",
  "2": "Response B wins",
  both_good: "Both good",
  both_bad: "Both bad",
};

const KEY_BINDINGS: Record<string, RatingValue> = {
  "1": "1", "2": "2", g: "both_good", b: "both_bad",
};

export interface RenderCallbacks {
  onCommit: (rating: RatingValue) => void;
}

export function renderTask(rootEl: HTMLElement, task: TaskDescriptor,
                           stepper: Stepper,
                           callbacks: RenderCallbacks): () => void {
  const view = viewModel(stepper);
  rootEl.textContent = "";

  const header = document.createElement("div");
  header.className = "task-header";
  header.textContent = `Example ${task.example_id}`;
  rootEl.appendChild(header);

  if (view.showDimensionLabels) {
    const progress = document.createElement("ol");
    progress.className = "steps";
    for (const step of view.steps) {
      const item = document.createElement("li");
      item.textContent = step.label;
      item.className = `step step-${step.state}`;
      progress.appendChild(item);
    }
    rootEl.appendChild(progress);
  }

  const players = document.createElement("div");
  players.className = "players";
  const trackers: Record<ClipKey, PlaybackTracker> = {
    prompt: new PlaybackTracker(),
    a: new PlaybackTracker(),
    b: new PlaybackTracker(),
  };
  const clipNames: Record<ClipKey, string> = {
    prompt: "Prompt", a: "Response A", b: "Response B",
  };
  (Object.keys(clipNames) as ClipKey[]).forEach((key) => {
    const label = document.createElement("label");
    label.textContent = clipNames[key];
    const audio = document.createElement("audio");
    audio.controls = true;
    audio.src = task.audio[key];
    audio.addEventListener("loadedmetadata", () => {
      trackers[key].setDuration(audio.duration);
    });
    audio.addEventListener("timeupdate", () => {
      trackers[key].tick(audio.currentTime);
      stepper.markPlayed(key, trackers[key].coverage());
      update();
    });
    audio.addEventListener("seeked", () => {
      trackers[key].seeked(audio.currentTime);
    });
    audio.addEventListener("error", () => {
      banner.textContent = `audio failed to load: ${clipNames[key]}; ` +
        "use Retry";
      banner.style.display = "block";
    });
    label.appendChild(audio);
    players.appendChild(label);
  });
  rootEl.appendChild(players);

  const banner = document.createElement("div");
  banner.className = "error-banner";
  banner.style.display = "none";
  const retry = document.createElement("button");
  retry.textContent = "Retry";
  retry.addEventListener("click", () => {
    banner.style.display = "none";
    players.querySelectorAll("audio").forEach((a) => a.load());
  });
  banner.appendChild(retry);
  rootEl.appendChild(banner);

  const rubric = document.createElement("p");
  rubric.className = "rubric";
  rootEl.appendChild(rubric);

  const acceptability = document.createElement("div");
  acceptability.className = "acceptability";
  const makeToggle = (side: "a" | "b", text: string) => {
    const wrap = document.createElement("fieldset");
    const legend = document.createElement("legend");
    legend.textContent = text;
    wrap.appendChild(legend);
    for (const [labelText, value] of [["Acceptable", true],
                                      ["Unacceptable", false]] as const) {
      const button = document.createElement("button");
      button.textContent = labelText;
      button.addEventListener("click", () => {
        stepper.setAcceptable(side, value);
        update();
      });
      wrap.appendChild(button);
    }
    return wrap;
  };
  acceptability.appendChild(makeToggle("a", "Is Response A acceptable?"));
  acceptability.appendChild(makeToggle("b", "Is Response B acceptable?"));
  rootEl.appendChild(acceptability);

  const ratings = document.createElement("div");
  ratings.className = "ratings";
  rootEl.appendChild(ratings);

  function update(): void {
    const current = viewModel(stepper);
    rubric.textContent = current.activeDim === null
      ? "All steps committed."
      : current.showDimensionLabels
        ? RUBRICS[current.activeDim]
        : RUBRICS.overall;
    ratings.textContent = "";
    if (!current.playbackGatePassed) {
      const note = document.createElement("p");
      note.textContent =
        "Listen to the prompt and both responses (at least 90%) to unlock " +
        "the rating buttons.";
      ratings.appendChild(note);
      return;
    }
    for (const value of current.enabledRatings) {
      const button = document.createElement("button");
      button.textContent = current.forcedRating === value
        ? `Confirm: ${RATING_LABELS[value]}`
        : RATING_LABELS[value];
      button.addEventListener("click", () => callbacks.onCommit(value));
      ratings.appendChild(button);
    }
  }

  function onKey(event: KeyboardEvent): void {
    const rating = KEY_BINDINGS[event.key];
    if (rating !== undefined &&
        viewModel(stepper).enabledRatings.includes(rating)) {
      callbacks.onCommit(rating);
    }
  }
  document.addEventListener("keydown", onKey);
  update();
  return () => document.removeEventListener("keydown", onKey);
}
