/** DOM shell of the annotation game: shows one flower image at a time with
 * seven action buttons (keyboard 1-7), tracks the session score and streak,
 * and walks the task queue until the service reports none left. */

import { AnnotationApi, TaskView } from "./api";
import { applyAccepted, applyConflict, newSession, SessionState } from "./game";
import { actionLabel } from "./verbs";

export class GardenApp {
  private session: SessionState;
  private current: TaskView | null = null;
  private busy = false;
  private pending: Promise<void> = Promise.resolve();
  private readonly keyListener: (ev: KeyboardEvent) => void;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: AnnotationApi,
    annotatorId: string,
  ) {
    this.session = newSession(annotatorId);
    this.keyListener = (ev) => this.handleKey(ev);
    this.root.ownerDocument.addEventListener("keydown", this.keyListener);
    this.renderShell();
  }

  start(): Promise<void> {
    return this.enqueue(() => this.loadNext());
  }

  /** Resolves once every queued action has settled (used by tests). */
  idle(): Promise<void> {
    return this.pending;
  }

  destroy(): void {
    this.root.ownerDocument.removeEventListener("keydown", this.keyListener);
  }

  get state(): SessionState {
    return this.session;
  }

  get currentTask(): TaskView | null {
    return this.current;
  }

  submitChoice(flowerClass: string): Promise<void> {
    const task = this.current; // bind now: a queued stale click must not hit the next task
    return this.enqueue(() => this.doSubmit(flowerClass, task));
  }

  // ---------- internals ----------

  private enqueue(action: () => Promise<void>): Promise<void> {
    this.pending = this.pending.then(action, action);
    return this.pending;
  }

  private handleKey(ev: KeyboardEvent): void {
    if (!this.current || this.busy) {
      return;
    }
    const slot = Number.parseInt(ev.key, 10);
    if (slot >= 1 && slot <= this.current.classes.length) {
      void this.submitChoice(this.current.classes[slot - 1]);
    }
  }

  private async loadNext(): Promise<void> {
    this.busy = true;
    try {
      const result = await this.api.fetchNext(this.session.annotatorId);
      if (result.kind === "done") {
        this.current = null;
        this.renderDone();
      } else {
        this.current = result.task;
        this.renderTask(result.task);
      }
    } catch {
      this.renderNetworkError();
    } finally {
      this.busy = false;
    }
  }

  private async doSubmit(flowerClass: string, task: TaskView | null): Promise<void> {
    if (!task || this.current?.task_id !== task.task_id || this.busy) {
      return;
    }
    this.busy = true;
    try {
      const result = await this.api.submit(task.task_id, this.session.annotatorId, flowerClass);
      if (result.status === 201) {
        this.session = applyAccepted(this.session);
        this.setMessage(`+${10 + 2 * (this.session.streak - 1)} points`);
        this.busy = false;
        await this.loadNext();
      } else if (result.status === 409 || result.status === 404) {
        this.session = applyConflict(this.session);
        this.setMessage("Already answered; skipping ahead");
        this.busy = false;
        await this.loadNext();
      } else if (result.status === 422) {
        this.setMessage(`Rejected: ${result.detail ?? "invalid submission"}`, true);
      } else {
        this.setMessage(`Unexpected response (${result.status})`, true);
      }
    } catch {
      this.renderNetworkError();
    } finally {
      this.busy = false;
      this.renderHud();
    }
  }

  // ---------- rendering ----------

  private renderShell(): void {
    this.root.innerHTML = `
      <div class="garden">
        <header class="hud">
          <span>Gardener <strong data-role="annotator"></strong></span>
          <span>Score <strong data-role="score">0</strong></span>
          <span>Streak <strong data-role="streak">0</strong></span>
          <span>Answered <strong data-role="answered">0</strong></span>
        </header>
        <p class="message" data-role="message"></p>
        <main data-role="stage"><p>Loading…</p></main>
      </div>`;
    const annotator = this.root.querySelector('[data-role="annotator"]');
    if (annotator) {
      annotator.textContent = this.session.annotatorId;
    }
    this.renderHud();
  }

  private stage(): HTMLElement {
    return this.root.querySelector('[data-role="stage"]') as HTMLElement;
  }

  private renderHud(): void {
    const set = (role: string, value: number) => {
      const el = this.root.querySelector(`[data-role="${role}"]`);
      if (el) {
        el.textContent = String(value);
      }
    };
    set("score", this.session.score);
    set("streak", this.session.streak);
    set("answered", this.session.answered);
  }

  private setMessage(text: string, isError = false): void {
    const el = this.root.querySelector('[data-role="message"]') as HTMLElement | null;
    if (el) {
      el.textContent = text;
      el.classList.toggle("error", isError);
    }
  }

  private renderTask(task: TaskView): void {
    const stage = this.stage();
    stage.innerHTML = "";

    const img = stage.ownerDocument.createElement("img");
    img.dataset.role = "flower-image";
    img.alt = "flower to annotate";
    img.src = this.api.imageUrl(task);
    stage.appendChild(img);

    const actions = stage.ownerDocument.createElement("div");
    actions.className = "actions";
    task.classes.forEach((flowerClass, i) => {
      const button = stage.ownerDocument.createElement("button");
      button.dataset.class = flowerClass;
      button.textContent = `${i + 1}. ${actionLabel(flowerClass)}`;
      button.addEventListener("click", () => void this.submitChoice(flowerClass));
      actions.appendChild(button);
    });
    stage.appendChild(actions);
  }

  private renderDone(): void {
    this.stage().innerHTML = `
      <div class="done" data-role="done">
        <h2>The garden is fully tended!</h2>
        <p>No flowers left to annotate. Final score: <strong>${this.session.score}</strong>
        after ${this.session.answered} answers.</p>
      </div>`;
  }

  private renderNetworkError(): void {
    const stage = this.stage();
    stage.innerHTML = `
      <div class="error" data-role="network-error">
        <p>The garden is unreachable. Check the service and try again.</p>
      </div>`;
    const retry = stage.ownerDocument.createElement("button");
    retry.dataset.role = "retry";
    retry.textContent = "Retry";
    retry.addEventListener("click", () => void this.enqueue(() => this.loadNext()));
    (stage.querySelector('[data-role="network-error"]') as HTMLElement).appendChild(retry);
  }
}

export function mountGarden(root: HTMLElement, api: AnnotationApi, annotatorId: string): GardenApp {
  return new GardenApp(root, api, annotatorId);
}
