/** Typed client for the annotation service HTTP API. */

export interface TaskView {
  task_id: string;
  image_url: string;
  classes: string[];
}

export type NextTaskResult = { kind: "task"; task: TaskView } | { kind: "done" };

export interface SubmitResult {
  status: number; // 201 accepted, 409 conflict, 422 invalid, 404 unknown task
  detail?: string;
}

export class AnnotationApi {
  constructor(private readonly baseUrl: string = "") {}

  async fetchNext(annotatorId: string): Promise<NextTaskResult> {
    const resp = await fetch(
      `${this.baseUrl}/api/tasks/next?annotator=${encodeURIComponent(annotatorId)}`,
    );
    if (resp.status === 204) {
      return { kind: "done" };
    }
    if (!resp.ok) {
      throw new Error(`task fetch failed with status ${resp.status}`);
    }
    const task = (await resp.json()) as TaskView;
    return { kind: "task", task };
  }

  async submit(taskId: string, annotatorId: string, flowerClass: string): Promise<SubmitResult> {
    const resp = await fetch(`${this.baseUrl}/api/annotations`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        task_id: taskId,
        annotator: annotatorId,
        flower_class: flowerClass,
        client_timestamp: new Date().toISOString(),
      }),
    });
    let detail: string | undefined;
    if (!resp.ok) {
      try {
        const body = (await resp.json()) as { detail?: unknown };
        detail = typeof body.detail === "string" ? body.detail : JSON.stringify(body.detail);
      } catch {
        detail = undefined;
      }
    }
    return { status: resp.status, detail };
  }

  imageUrl(task: TaskView): string {
    return `${this.baseUrl}${task.image_url}`;
  }
}
