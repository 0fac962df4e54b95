// Review session state: the queue, per-item tri-state judgment controls, and
// optimistic submission with reconciliation against the server ack.
//
// Counters are server truth: every mutation refetches the run summary rather
// than trusting local arithmetic. The only optimism is the transient
// "submitting" mark on the item itself, reverted on failure.

import { ApiClient, ApiRequestError } from './api.js';
import type { ItemDetail, ItemSummary, RunSummary } from './types.js';

export type TriState = 'unset' | 'yes' | 'no';

export type SubmitState =
  | { phase: 'idle' }
  | { phase: 'submitting' }
  | { phase: 'judged'; version: number; conflict: boolean }
  | { phase: 'error'; message: string };

export interface ItemState {
  detail: ItemDetail;
  answerCorrect: TriState;
  entityExists: TriState;
  submit: SubmitState;
}

export interface QueueState {
  run: RunSummary | null;
  categoryFilter: string | null;
  statusFilter: 'pending' | 'judged' | null;
  items: ItemSummary[];
}

export interface Toast {
  kind: 'error' | 'info';
  message: string;
}

export class ReviewStore {
  readonly queue: QueueState = {
    run: null,
    categoryFilter: null,
    statusFilter: null,
    items: [],
  };
  readonly items = new Map<string, ItemState>();
  readonly toasts: Toast[] = [];
  reviewer: string;

  private readonly inflight = new Set<string>();

  constructor(
    private readonly api: ApiClient,
    private readonly runId: string,
    reviewer = 'reviewer',
  ) {
    this.reviewer = reviewer;
  }

  /** Fetch the run summary and item list; server order is preserved. */
  async refreshQueue(
    statusFilter: 'pending' | 'judged' | null = this.queue.statusFilter,
    categoryFilter: string | null = this.queue.categoryFilter,
  ): Promise<void> {
    this.queue.statusFilter = statusFilter;
    this.queue.categoryFilter = categoryFilter;
    this.queue.run = await this.api.getRun(this.runId);
    this.queue.items = await this.api.listItems(
      this.runId,
      statusFilter ?? undefined,
      categoryFilter ?? undefined,
    );
  }

  async openItem(itemId: string): Promise<ItemState> {
    const detail = await this.api.getItem(itemId);
    const existing = this.items.get(itemId);
    const state: ItemState = {
      detail,
      answerCorrect: existing?.answerCorrect ?? 'unset',
      entityExists: existing?.entityExists ?? 'unset',
      submit: existing?.submit ?? { phase: 'idle' },
    };
    this.items.set(itemId, state);
    return state;
  }

  setControl(itemId: string, control: 'answerCorrect' | 'entityExists', value: TriState): void {
    const state = this.items.get(itemId);
    if (!state) throw new Error(`item ${itemId} not open`);
    state[control] = value;
  }

  /** Submit is enabled only once both tri-state controls are set. */
  canSubmit(itemId: string): boolean {
    const state = this.items.get(itemId);
    if (!state) return false;
    if (state.answerCorrect === 'unset' || state.entityExists === 'unset') return false;
    return state.submit.phase !== 'submitting';
  }

  /**
   * Optimistically mark the item judged and reconcile with the server ack.
   * A second call while a submit is in flight is a no-op (double-click
   * guard), so one user action yields exactly one judgment version.
   */
  async submitJudgment(itemId: string): Promise<SubmitState> {
    const state = this.items.get(itemId);
    if (!state) throw new Error(`item ${itemId} not open`);
    if (this.inflight.has(itemId)) return state.submit;
    if (!this.canSubmit(itemId)) {
      return { phase: 'error', message: 'set both controls first' };
    }

    const priorVersions = state.detail.judgments.length;
    this.inflight.add(itemId);
    state.submit = { phase: 'submitting' };
    try {
      const ack = await this.api.submitJudgment(
        itemId,
        state.answerCorrect === 'yes',
        state.entityExists === 'yes',
        this.reviewer,
      );
      // Conflict: someone else judged between our fetch and our submit.
      const conflict = ack.version > priorVersions + 1;
      state.submit = { phase: 'judged', version: ack.version, conflict };
      state.detail = await this.api.getItem(itemId);
      await this.refreshQueue();
      if (conflict) {
        this.toasts.push({
          kind: 'info',
          message: `item ${itemId}: another reviewer judged this item; latest is version ${ack.version}`,
        });
      }
      return state.submit;
    } catch (error) {
      const message =
        error instanceof ApiRequestError
          ? `${error.errorCode}: ${error.message}`
          : String(error);
      state.submit = { phase: 'error', message };
      this.toasts.push({ kind: 'error', message: `judgment not saved (${message})` });
      return state.submit;
    } finally {
      this.inflight.delete(itemId);
    }
  }
}
