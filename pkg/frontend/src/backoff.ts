export const POLL_BASE_MS = 500;
export const POLL_CAP_MS = 5_000;

// Delay before poll attempt `attempt` (0-based): 500, 1000, 2000, 4000, then
// capped at 5000 ms. Deterministic on purpose so tests can assert the exact
// schedule.
export function pollDelayMs(attempt: number, baseMs = POLL_BASE_MS, capMs = POLL_CAP_MS): number {
  const n = Math.max(0, Math.floor(attempt));
  const pow = Math.min(n, 30);
  return Math.min(capMs, baseMs * Math.pow(2, pow));
}

export function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
