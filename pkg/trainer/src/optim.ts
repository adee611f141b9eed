/**
 * Adam with named parameter groups.
 *
 * The stock tfjs optimizers apply one learning rate to every variable, so
 * fine-tuning with a lower encoder rate is not expressible with them. This
 * hand-rolled Adam keeps per-variable moment slots and applies each group's
 * own learning rate; a scheduler can rescale all groups in lock step.
 */

import { tf } from "./backend.js";

export interface AdamOptions {
  beta1?: number;
  beta2?: number;
  epsilon?: number;
}

export interface GroupSpec {
  name: string;
  vars: tf.Variable[];
  learningRate: number;
}

export interface GroupInfo {
  name: string;
  learningRate: number;
  varCount: number;
}

interface Slots {
  m: tf.Variable;
  v: tf.Variable;
}

export class GroupedAdam {
  private readonly beta1: number;
  private readonly beta2: number;
  private readonly epsilon: number;
  private readonly groupSpecs: GroupSpec[];
  private readonly varToGroup = new Map<string, number>();
  private readonly slots = new Map<string, Slots>();
  private step = 0;

  constructor(groups: GroupSpec[], opts: AdamOptions = {}) {
    if (groups.length === 0) throw new Error("GroupedAdam needs at least one group");
    this.beta1 = opts.beta1 ?? 0.9;
    this.beta2 = opts.beta2 ?? 0.999;
    this.epsilon = opts.epsilon ?? 1e-8;
    this.groupSpecs = groups.map((g) => ({ ...g, vars: [...g.vars] }));
    this.groupSpecs.forEach((g, gi) => {
      for (const v of g.vars) {
        if (this.varToGroup.has(v.name)) {
          throw new Error(`variable ${v.name} appears in more than one group`);
        }
        this.varToGroup.set(v.name, gi);
      }
    });
  }

  get groups(): GroupInfo[] {
    return this.groupSpecs.map((g) => ({
      name: g.name,
      learningRate: g.learningRate,
      varCount: g.vars.length,
    }));
  }

  /** All optimized variables, in group order. */
  get variables(): tf.Variable[] {
    return this.groupSpecs.flatMap((g) => g.vars);
  }

  setLearningRate(groupName: string, lr: number): void {
    const g = this.groupSpecs.find((s) => s.name === groupName);
    if (!g) throw new Error(`no parameter group named '${groupName}'`);
    g.learningRate = lr;
  }

  /** Multiply every group's learning rate by `factor` (plateau step). */
  scale(factor: number): void {
    for (const g of this.groupSpecs) g.learningRate *= factor;
  }

  applyGradients(grads: tf.NamedTensorMap): void {
    this.step += 1;
    const bc1 = 1 - Math.pow(this.beta1, this.step);
    const bc2 = 1 - Math.pow(this.beta2, this.step);
    for (const g of this.groupSpecs) {
      for (const variable of g.vars) {
        const grad = grads[variable.name];
        if (grad == null) continue;
        const slot = this.slotsFor(variable);
        tf.tidy(() => {
          const m = tf.add(tf.mul(slot.m, this.beta1), tf.mul(grad, 1 - this.beta1));
          const v = tf.add(tf.mul(slot.v, this.beta2), tf.mul(tf.square(grad), 1 - this.beta2));
          slot.m.assign(m);
          slot.v.assign(v);
          const mHat = tf.div(m, bc1);
          const vHat = tf.div(v, bc2);
          const update = tf.div(mHat, tf.add(tf.sqrt(vHat), this.epsilon));
          variable.assign(tf.sub(variable, tf.mul(update, g.learningRate)));
        });
      }
    }
  }

  dispose(): void {
    for (const slot of this.slots.values()) {
      slot.m.dispose();
      slot.v.dispose();
    }
    this.slots.clear();
  }

  private slotsFor(variable: tf.Variable): Slots {
    let slot = this.slots.get(variable.name);
    if (!slot) {
      const makeSlot = (suffix: string) => {
        const zeros = tf.zerosLike(variable);
        const v = tf.variable(zeros, false, `${variable.name}__adam_${suffix}`);
        zeros.dispose();
        return v;
      };
      slot = { m: makeSlot("m"), v: makeSlot("v") };
      this.slots.set(variable.name, slot);
    }
    return slot;
  }
}
