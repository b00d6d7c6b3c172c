import type { JobDoc } from "./types.js";
import type { ApiClient } from "./api.js";

export interface PollOptions {
  intervalMs?: number;
  timeoutMs?: number;
}

const sleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

/**
 * Poll an iteration job until it settles. The engine runs iterations in the
 * background and the console checks in once a second, which is plenty for
 * mock backends and keeps live ones from being hammered.
 */
export async function pollJobUntilDone(
  client: ApiClient,
  sessionId: string,
  jobId: string,
  options: PollOptions = {}
): Promise<JobDoc> {
  const interval = options.intervalMs ?? 1000;
  const timeout = options.timeoutMs ?? 120_000;
  const deadline = Date.now() + timeout;
  for (;;) {
    const job = await client.getJob(sessionId, jobId);
    if (job.state === "done" || job.state === "failed") {
      return job;
    }
    if (Date.now() >= deadline) {
      throw new Error(`job ${jobId} still ${job.state} after ${timeout}ms`);
    }
    await sleep(interval);
  }
}
