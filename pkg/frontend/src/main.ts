// Entry point: wires the store to the DOM and polls metrics.
// Configuration comes from the URL: ?service=http://host:port&run=RUN_ID

import { ApiClient } from './api.js';
import { renderItem, renderMetrics, renderQueue, renderToasts } from './render.js';
import { ReviewStore } from './store.js';

const POLL_MS = 5000;

function requireElement(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

async function start(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const service = params.get('service') ?? 'http://127.0.0.1:8077';
  const runId = params.get('run');
  if (!runId) {
    requireElement('app').textContent = 'Add ?run=RUN_ID (and optionally &service=URL) to review a run.';
    return;
  }
  const api = new ApiClient(service);
  const store = new ReviewStore(api, runId, params.get('reviewer') ?? 'reviewer');

  const queueEl = requireElement('queue');
  const itemEl = requireElement('item');
  const metricsEl = requireElement('metrics');
  const toastsEl = requireElement('toasts');
  let openItemId: string | null = null;

  const drawQueue = () =>
    renderQueue(queueEl, store.queue, (itemId) => {
      void openItem(itemId);
    });

  async function openItem(itemId: string): Promise<void> {
    openItemId = itemId;
    const state = await store.openItem(itemId);
    renderItem(itemEl, state, {
      onSet: (control, value) => {
        store.setControl(itemId, control, value);
        renderItem(itemEl, store.items.get(itemId)!, handlersFor(itemId));
      },
      onSubmit: () => void submit(itemId),
    });
  }

  function handlersFor(itemId: string) {
    return {
      onSet: (control: 'answerCorrect' | 'entityExists', value: 'yes' | 'no' | 'unset') => {
        store.setControl(itemId, control, value);
        renderItem(itemEl, store.items.get(itemId)!, handlersFor(itemId));
      },
      onSubmit: () => void submit(itemId),
    };
  }

  async function submit(itemId: string): Promise<void> {
    await store.submitJudgment(itemId);
    renderToasts(toastsEl, store.toasts);
    if (openItemId === itemId) {
      renderItem(itemEl, store.items.get(itemId)!, handlersFor(itemId));
    }
    drawQueue();
    await refreshMetrics();
  }

  async function refreshMetrics(): Promise<void> {
    renderMetrics(metricsEl, await api.getMetrics(runId!));
  }

  await store.refreshQueue('pending');
  drawQueue();
  await refreshMetrics();
  window.setInterval(() => {
    void store.refreshQueue().then(drawQueue);
    void refreshMetrics();
  }, POLL_MS);
}

void start();
