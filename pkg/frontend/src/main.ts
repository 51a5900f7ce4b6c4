/** Application entry: session loop over tasks from the annotation server. */

import { ApiClient, TaskDescriptor } from "./api.js";
import { Dim, PassKind } from "./protocol.js";
import { Stepper } from "./stepper.js";
import { renderTask } from "./ui.js";

function param(name: string, fallback: string): string {
  const url = new URL(window.location.href);
  return url.searchParams.get(name)
    ?? window.localStorage.getItem(name)
    ?? fallback;
}

async function runSession(root: HTMLElement): Promise<void> {
  const token = param("token", "");
  const pass = param("pass", "hcot") as PassKind;
  if (!token) {
    root.textContent = "Missing ?token=... annotator token.";
    return;
  }
  window.localStorage.setItem("token", token);
  const client = new ApiClient(window.location.origin, token);
  window.addEventListener("online", () => void client.flushQueue());

  const session = await client.openSession(pass, {
    fraction: Number(param("fraction", "0.2")),
    seed: Number(param("seed", "0")),
  });
  const status = document.createElement("div");
  status.className = "status";
  document.body.appendChild(status);

  let remaining = session.queue_size;
  for (;;) {
    status.textContent = `pass: ${pass} | ${remaining} examples left` +
      (client.pendingCount ? ` (${client.pendingCount} queued offline)` : "");
    const task: TaskDescriptor | null = await client.nextTask(
      session.session_id);
    if (task === null) {
      root.textContent = "Queue exhausted. Thank you!";
      return;
    }
    await annotate(root, client, session.session_id, task, pass);
    remaining -= 1;
  }
}

function annotate(root: HTMLElement, client: ApiClient, sessionId: string,
                  task: TaskDescriptor, pass: PassKind): Promise<void> {
  return new Promise((resolve) => {
    const stepper = new Stepper(pass, task.example_id);
    let cleanup = () => {};

    const rerender = () => {
      cleanup();
      cleanup = renderTask(root, task, stepper, {
        onCommit: (rating) => {
          stepper.commit(rating);
          if (!stepper.complete()) {
            rerender();
            return;
          }
          void submit();
        },
      });
    };

    const submit = async () => {
      const result = await client.submitRating(stepper.payload(sessionId));
      if (result.kind === "rejected") {
        // jump back to the violated step and re-collect from there
        const step = result.violations[0]?.step ?? "";
        const dim = (["content", "vq", "para", "overall"] as Dim[])
          .find((d) => result.violations[0]?.message?.startsWith(d));
        stepper.jumpBackTo(dim ?? stepper.dims[0]);
        rerender();
        window.alert(`The server rejected this rating (${step}); ` +
          "please redo the highlighted step.");
        return;
      }
      // stored, duplicate-after-retry, and queued-offline all advance
      cleanup();
      resolve();
    };

    rerender();
  });
}

const rootEl = document.getElementById("app");
if (rootEl !== null) {
  runSession(rootEl).catch((err) => {
    rootEl.textContent = `session error: ${err}`;
  });
}
