// Store behaviour against a stubbed fetch: optimistic submit, revert on
// failure, the double-click idempotency guard, and conflict surfacing.

import { afterEach, beforeEach, describe, expect, it, vi } from 'vitest';

import { ApiClient, ApiRequestError } from '../src/api';
import { ReviewStore } from '../src/store';
import type { ItemDetail, ItemSummary, RunSummary } from '../src/types';

const RUN: RunSummary = {
  run_id: 'r1',
  kind: 'ner',
  config: {},
  status: 'complete',
  created_at: '2024-05-01T00:00:00Z',
  item_count: 2,
  judged_count: 0,
  pending_count: 2,
};

const ITEMS: ItemSummary[] = [
  { item_id: 'i1', run_id: 'r1', category: 'MATERIAL', judgment_state: { status: 'pending' } },
  { item_id: 'i2', run_id: 'r1', category: 'PRODUCT', judgment_state: { status: 'pending' } },
];

function detail(itemId: string, judgments: ItemDetail['judgments'] = []): ItemDetail {
  return {
    item_id: itemId,
    run_id: 'r1',
    category: 'MATERIAL',
    judgment_state:
      judgments.length > 0
        ? { status: 'judged', version: judgments[judgments.length - 1].version }
        : { status: 'pending' },
    source_text: `abstract ${itemId}`,
    raw_text: 'MATERIAL: Cu nanowire',
    answers: { MATERIAL: ['Cu nanowire'] },
    llm_answer: ['Cu nanowire'],
    judgments,
  };
}

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'content-type': 'application/json' },
  });
}

type Handler = (url: string, init?: RequestInit) => Response | Promise<Response>;

let handler: Handler;
const fetchMock = vi.fn((input: RequestInfo | URL, init?: RequestInit) =>
  Promise.resolve(handler(String(input), init)),
);

beforeEach(() => {
  vi.stubGlobal('fetch', fetchMock);
  fetchMock.mockClear();
});

afterEach(() => {
  vi.unstubAllGlobals();
});

function makeStore(): ReviewStore {
  return new ReviewStore(new ApiClient('http://svc.test'), 'r1', 'tester');
}

function defaultHandler(overrides: Partial<Record<string, Handler>> = {}): Handler {
  return (url, init) => {
    const path = new URL(url).pathname;
    const method = init?.method ?? 'GET';
    const key = `${method} ${path}`;
    if (overrides[key]) return overrides[key]!(url, init);
    if (key === 'GET /runs/r1') return jsonResponse(RUN);
    if (key === 'GET /runs/r1/items') return jsonResponse({ run_id: 'r1', items: ITEMS });
    if (key.startsWith('GET /items/')) return jsonResponse(detail(path.split('/')[2]));
    throw new Error(`unexpected request ${key}`);
  };
}

describe('queue', () => {
  it('refreshQueue mirrors server order and counters', async () => {
    handler = defaultHandler();
    const store = makeStore();
    await store.refreshQueue();
    expect(store.queue.items.map((i) => i.item_id)).toEqual(['i1', 'i2']);
    expect(store.queue.run?.pending_count).toBe(2);
    expect(store.queue.run?.judged_count).toBe(0);
  });

  it('a failed queue fetch leaves the queue unchanged', async () => {
    handler = defaultHandler();
    const store = makeStore();
    await store.refreshQueue();
    handler = () => jsonResponse({ error_code: 'unknown_run', message: 'nope' }, 404);
    await expect(store.refreshQueue()).rejects.toBeInstanceOf(ApiRequestError);
    expect(store.queue.items.map((i) => i.item_id)).toEqual(['i1', 'i2']);
  });
});

describe('judgment controls', () => {
  it('submit stays disabled until both tri-state controls are set', async () => {
    handler = defaultHandler();
    const store = makeStore();
    await store.openItem('i1');
    expect(store.canSubmit('i1')).toBe(false);
    store.setControl('i1', 'answerCorrect', 'yes');
    expect(store.canSubmit('i1')).toBe(false);
    store.setControl('i1', 'entityExists', 'no');
    expect(store.canSubmit('i1')).toBe(true);
  });
});

describe('submitJudgment', () => {
  it('acknowledged submit records the version and refreshes server truth', async () => {
    const posts: string[] = [];
    handler = defaultHandler({
      'POST /items/i1/judgment': (url, init) => {
        posts.push(String(init?.body));
        return jsonResponse({ item_id: 'i1', version: 1 });
      },
      'GET /items/i1': () =>
        jsonResponse(
          detail('i1', [
            {
              version: 1,
              answer_correct: true,
              entity_exists: false,
              reviewer: 'tester',
              judged_at: 'now',
            },
          ]),
        ),
    });
    const store = makeStore();
    await store.openItem('i1');
    store.setControl('i1', 'answerCorrect', 'yes');
    store.setControl('i1', 'entityExists', 'no');
    const state = await store.submitJudgment('i1');
    expect(state).toEqual({ phase: 'judged', version: 1, conflict: false });
    expect(posts).toHaveLength(1);
    expect(JSON.parse(posts[0])).toEqual({
      answer_correct: true,
      entity_exists: false,
      reviewer: 'tester',
    });
    expect(store.items.get('i1')?.detail.judgments).toHaveLength(1);
  });

  it('double-click creates exactly one judgment', async () => {
    let posts = 0;
    let release: () => void = () => {};
    const gate = new Promise<void>((resolve) => (release = resolve));
    handler = defaultHandler({
      'POST /items/i1/judgment': async () => {
        posts += 1;
        await gate;
        return jsonResponse({ item_id: 'i1', version: 1 });
      },
    });
    const store = makeStore();
    await store.openItem('i1');
    store.setControl('i1', 'answerCorrect', 'yes');
    store.setControl('i1', 'entityExists', 'yes');
    const first = store.submitJudgment('i1');
    const second = store.submitJudgment('i1'); // double click while in flight
    release();
    await Promise.all([first, second]);
    expect(posts).toBe(1);
  });

  it('failed submit reverts to pending with an error toast', async () => {
    handler = defaultHandler({
      'POST /items/i1/judgment': () =>
        jsonResponse({ error_code: 'run_not_complete', message: 'run r1 is running' }, 409),
    });
    const store = makeStore();
    await store.openItem('i1');
    store.setControl('i1', 'answerCorrect', 'no');
    store.setControl('i1', 'entityExists', 'no');
    const state = await store.submitJudgment('i1');
    expect(state.phase).toBe('error');
    expect(store.toasts.at(-1)?.kind).toBe('error');
    // no phantom judgment
    expect(store.items.get('i1')?.detail.judgments).toHaveLength(0);
    expect(store.items.get('i1')?.detail.judgment_state.status).toBe('pending');
  });

  it('a competing judgment surfaces as a conflict with the latest version', async () => {
    let submitted = false;
    handler = defaultHandler({
      'POST /items/i1/judgment': () => {
        submitted = true;
        return jsonResponse({ item_id: 'i1', version: 2 });
      },
      'GET /items/i1': () =>
        jsonResponse(
          submitted
            ? detail('i1', [
                {
                  version: 1,
                  answer_correct: false,
                  entity_exists: false,
                  reviewer: 'someone-else',
                  judged_at: 'now',
                },
                {
                  version: 2,
                  answer_correct: true,
                  entity_exists: true,
                  reviewer: 'tester',
                  judged_at: 'now',
                },
              ])
            : detail('i1'),
        ),
    });
    const store = makeStore();
    const opened = await store.openItem('i1');
    expect(opened.detail.judgments).toHaveLength(0);
    store.setControl('i1', 'answerCorrect', 'yes');
    store.setControl('i1', 'entityExists', 'yes');
    const state = await store.submitJudgment('i1');
    expect(state).toEqual({ phase: 'judged', version: 2, conflict: true });
    expect(store.items.get('i1')?.detail.judgment_state.version).toBe(2);
  });
});
