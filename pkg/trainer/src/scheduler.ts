/**
 * Reduce-on-plateau learning-rate rule.
 *
 * Tracks a metric to be minimized (validation loss). After `patience`
 * consecutive epochs without improvement the learning rate is multiplied
 * by `factor` — exactly on the patience-th flat epoch, not one earlier —
 * and the wait counter resets.
 */

export interface PlateauOptions {
  patience?: number;
  factor?: number;
  /** Improvement must beat the best value by more than this. */
  minDelta?: number;
}

export class ReduceLROnPlateau {
  readonly patience: number;
  readonly factor: number;
  readonly minDelta: number;
  best = Number.POSITIVE_INFINITY;
  wait = 0;
  reductions = 0;

  constructor(
    private readonly onReduce: (factor: number) => void,
    opts: PlateauOptions = {},
  ) {
    this.patience = opts.patience ?? 100;
    this.factor = opts.factor ?? 0.5;
    this.minDelta = opts.minDelta ?? 0;
    if (!Number.isInteger(this.patience) || this.patience < 1) {
      throw new Error(`patience must be an integer >= 1, got ${this.patience}`);
    }
    if (!(this.factor > 0 && this.factor < 1)) {
      throw new Error(`factor must be in (0, 1), got ${this.factor}`);
    }
  }

  /** Feed one epoch's metric. Returns true if the LR was reduced now. */
  update(metric: number): boolean {
    if (metric < this.best - this.minDelta) {
      this.best = metric;
      this.wait = 0;
      return false;
    }
    this.wait += 1;
    if (this.wait >= this.patience) {
      this.onReduce(this.factor);
      this.reductions += 1;
      this.wait = 0;
      return true;
    }
    return false;
  }
}
