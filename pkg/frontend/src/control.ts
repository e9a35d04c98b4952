/**
 * Keyboard throttle/brake state: the accelerate key ramps the raw action
 * toward +1, the brake key toward -1, releasing decays toward 0.  Full ramp
 * and full decay each take 0.5 s; when both keys are held, brake wins.
 */

export const FULL_SCALE_SECONDS = 0.5;

export interface KeyState {
  accelerate: boolean;
  brake: boolean;
}

export class ControlState {
  aTilde = 0;

  /** Advance the control value by dtSeconds of the current key state. */
  update(keys: KeyState, dtSeconds: number): number {
    const rate = dtSeconds / FULL_SCALE_SECONDS;
    if (keys.brake) {
      this.aTilde -= rate;
    } else if (keys.accelerate) {
      this.aTilde += rate;
    } else if (this.aTilde > 0) {
      this.aTilde = Math.max(0, this.aTilde - rate);
    } else if (this.aTilde < 0) {
      this.aTilde = Math.min(0, this.aTilde + rate);
    }
    this.aTilde = Math.min(1, Math.max(-1, this.aTilde));
    return this.aTilde;
  }

  reset(): void {
    this.aTilde = 0;
  }
}
