// Fixed-interval polling with coalescing: at most one tick in flight. A
// timer firing (or a manual refresh) during a slow tick marks one pending
// rerun instead of stacking requests; it runs as soon as the tick settles.

export const DEFAULT_POLL_MS = 5_000;
export const MIN_POLL_MS = 1_000;

export interface PollerStats {
  started: number;
  completed: number;
  failed: number;
  /** Timer fires and refreshes absorbed while a tick was in flight. */
  coalesced: number;
}

export class Poller {
  private readonly tick: () => Promise<void>;
  private intervalMs: number;
  private timer: ReturnType<typeof setInterval> | null = null;
  private busy = false;
  private pending = false;
  readonly stats: PollerStats = { started: 0, completed: 0, failed: 0, coalesced: 0 };
  /** Called with the tick's error; rendering code shows the banner. */
  onError: ((err: unknown) => void) | null = null;

  constructor(tick: () => Promise<void>, intervalMs: number = DEFAULT_POLL_MS) {
    this.tick = tick;
    this.intervalMs = Math.max(MIN_POLL_MS, intervalMs);
  }

  get interval(): number {
    return this.intervalMs;
  }

  get inFlight(): boolean {
    return this.busy;
  }

  get running(): boolean {
    return this.timer !== null;
  }

  /** Clamped to MIN_POLL_MS; takes effect immediately when running. */
  setIntervalMs(ms: number): void {
    this.intervalMs = Math.max(MIN_POLL_MS, ms);
    if (this.timer !== null) {
      this.stop();
      this.start();
    }
  }

  start(): void {
    if (this.timer !== null) return;
    this.timer = setInterval(() => this.request(), this.intervalMs);
    this.request(); // immediate first poll
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  /** Poll now; coalesced into the in-flight tick if there is one. */
  refresh(): void {
    this.request();
  }

  private request(): void {
    if (this.busy) {
      this.pending = true;
      this.stats.coalesced += 1;
      return;
    }
    this.busy = true;
    this.stats.started += 1;
    this.tick().then(
      () => {
        this.stats.completed += 1;
        this.settle();
      },
      (err) => {
        this.stats.failed += 1;
        this.onError?.(err);
        this.settle();
      },
    );
  }

  private settle(): void {
    this.busy = false;
    if (this.pending) {
      this.pending = false;
      this.request();
    }
  }
}
