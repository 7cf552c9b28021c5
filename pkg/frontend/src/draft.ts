/** Mutable ranking draft: slots move from the unranked pool into an ordered
 * list (best first). Submission is allowed only once the ordering is a
 * complete permutation of the task's slots. */
export class RankingDraft {
  private ranked: string[] = [];

  constructor(readonly slots: readonly string[]) {
    if (new Set(slots).size !== slots.length) {
      throw new Error("slots must be unique");
    }
  }

  get ordering(): string[] {
    return [...this.ranked];
  }

  /** Slots not yet ranked, in presentation order. */
  get unranked(): string[] {
    return this.slots.filter((slot) => !this.ranked.includes(slot));
  }

  isComplete(): boolean {
    return this.ranked.length === this.slots.length;
  }

  rank(slot: string): void {
    if (!this.slots.includes(slot) || this.ranked.includes(slot)) {
      return;
    }
    this.ranked.push(slot);
  }

  unrank(slot: string): void {
    this.ranked = this.ranked.filter((s) => s !== slot);
  }

  moveUp(slot: string): void {
    const i = this.ranked.indexOf(slot);
    if (i > 0) {
      [this.ranked[i - 1], this.ranked[i]] = [this.ranked[i], this.ranked[i - 1]];
    }
  }

  moveDown(slot: string): void {
    const i = this.ranked.indexOf(slot);
    if (i >= 0 && i < this.ranked.length - 1) {
      [this.ranked[i], this.ranked[i + 1]] = [this.ranked[i + 1], this.ranked[i]];
    }
  }

  /** Drag-and-drop: place `slot` at `index` in the ranked list (ranking it
   * first if needed). */
  moveTo(slot: string, index: number): void {
    if (!this.slots.includes(slot)) {
      return;
    }
    this.ranked = this.ranked.filter((s) => s !== slot);
    const bounded = Math.max(0, Math.min(index, this.ranked.length));
    this.ranked.splice(bounded, 0, slot);
  }

  reset(): void {
    this.ranked = [];
  }
}
