/**
 * Playback progress tracking for the listen-before-rating gate.
 *
 * Coverage is measured as the union of played time ranges, so scrubbing
 * to the end does not count as having listened.
 */

export class PlaybackTracker {
  private ranges: Array<[number, number]> = [];
  private lastTime = 0;
  private duration = 0;

  setDuration(seconds: number): void {
    this.duration = seconds;
  }

  /** Call on every timeupdate with the current position. */
  tick(position: number): void {
    if (position > this.lastTime && position - this.lastTime < 2.0) {
      this.ranges.push([this.lastTime, position]);
    }
    this.lastTime = position;
  }

  seeked(position: number): void {
    this.lastTime = position;
  }

  coverage(): number {
    if (this.duration <= 0) return 0;
    const sorted = [...this.ranges].sort((x, y) => x[0] - y[0]);
    let covered = 0;
    let start = -1;
    let end = -1;
    for (const [s, e] of sorted) {
      if (s > end) {
        covered += end - start > 0 ? end - start : 0;
        start = s;
        end = e;
      } else {
        end = Math.max(end, e);
      }
    }
    covered += end - start > 0 ? end - start : 0;
    return Math.min(1, covered / this.duration);
  }
}
