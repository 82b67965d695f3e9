/** Job polling at 1 Hz until the job reaches a terminal state. */
import type { JobSnapshot } from "./types.js";

export interface JobPoller {
  promise: Promise<JobSnapshot>;
  stop: () => void;
}

export function pollJob(
  fetchJob: (jobId: string) => Promise<JobSnapshot>,
  jobId: string,
  onUpdate?: (snapshot: JobSnapshot) => void,
  intervalMs = 1000,
): JobPoller {
  let timer: ReturnType<typeof setInterval> | null = null;
  let stopped = false;

  const stop = () => {
    stopped = true;
    if (timer !== null) clearInterval(timer);
  };

  const promise = new Promise<JobSnapshot>((resolve, reject) => {
    let inFlight = false;
    const tick = async () => {
      if (stopped || inFlight) return;
      inFlight = true;
      try {
        const snapshot = await fetchJob(jobId);
        onUpdate?.(snapshot);
        if (snapshot.state === "done") {
          stop();
          resolve(snapshot);
        } else if (snapshot.state === "failed") {
          stop();
          reject(new Error(snapshot.error ?? "generation job failed"));
        }
      } catch (error) {
        stop();
        reject(error);
      } finally {
        inFlight = false;
      }
    };
    timer = setInterval(tick, intervalMs);
    void tick();
  });

  return { promise, stop };
}
