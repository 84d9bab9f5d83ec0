// 1 s slice polling with coalescing: a tick is skipped while the previous
// request is still in flight, so a slow server never sees stacked requests.

import type { PortalApi } from "./api.js";
import type { SliceRecord } from "./model.js";

export class SlicePoller {
  private timer: ReturnType<typeof setInterval> | null = null;
  private inFlight = false;
  private lastEventCount = 0;

  constructor(private readonly api: PortalApi,
              private readonly sliceId: string,
              private readonly onRecord: (record: SliceRecord) => void,
              private readonly onError: (error: unknown) => void,
              private readonly intervalMs: number = 1000) {}

  start(): void {
    if (this.timer != null) return;
    void this.tick();
    this.timer = setInterval(() => void this.tick(), this.intervalMs);
  }

  stop(): void {
    if (this.timer != null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  get running(): boolean {
    return this.timer != null;
  }

  private async tick(): Promise<void> {
    if (this.inFlight) return;
    this.inFlight = true;
    try {
      const record = await this.api.getSlice(this.sliceId);
      // the server's step log is append-only; a shrink means we are talking
      // to something else entirely
      if (record.step_log.length < this.lastEventCount) {
        this.onError(new Error("step log shrank between polls"));
        return;
      }
      this.lastEventCount = record.step_log.length;
      this.onRecord(record);
    } catch (error) {
      this.onError(error);
    } finally {
      this.inFlight = false;
    }
  }
}
