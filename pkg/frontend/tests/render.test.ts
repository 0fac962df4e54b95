// DOM rendering: percentages displayed verbatim from the service document,
// pending state labelled rather than computed, tri-state submit gating.

import { describe, expect, it, vi } from 'vitest';

import { renderAblation, renderItem, renderMetrics, renderQueue } from '../src/render';
import type { ItemState, QueueState } from '../src/store';
import type { AblationDocument, ItemDetail, MetricsDocument } from '../src/types';

function container(): HTMLElement {
  const node = document.createElement('div');
  document.body.append(node);
  return node;
}

function metricsDocument(): MetricsDocument {
  return {
    kind: 'category_metrics',
    categories: [
      {
        category: 'MATERIAL',
        count: 20,
        pending: 0,
        correct: 12,
        existence: 17,
        modified_correct: 15,
        modified_accuracy: { numerator: 3, denominator: 4 },
        modified_accuracy_pct: '75.00%',
      },
      {
        category: 'PRODUCT',
        count: 0,
        pending: 20,
        correct: null,
        existence: null,
        modified_correct: null,
        modified_accuracy: null,
        modified_accuracy_pct: null,
      },
    ],
    overall: {
      count: 160,
      pending: 0,
      correct: 85,
      existence: 94,
      modified_correct: 110,
      modified_accuracy: { numerator: 11, denominator: 16 },
      modified_accuracy_pct: '68.75%',
    },
  };
}

describe('renderMetrics', () => {
  it('shows service-formatted percentages verbatim', () => {
    const node = container();
    const doc = metricsDocument();
    renderMetrics(node, doc);
    const overallCell = node.querySelector('.overall-row .accuracy-cell');
    expect(overallCell?.textContent).toBe('68.75%');
    const materialRow = node.querySelector('tr[data-category="MATERIAL"]');
    expect(materialRow?.querySelector('.accuracy-cell')?.textContent).toBe(
      doc.categories[0].modified_accuracy_pct,
    );
  });

  it('never shows a percentage over pending items', () => {
    const node = container();
    renderMetrics(node, metricsDocument());
    const productRow = node.querySelector('tr[data-category="PRODUCT"]');
    expect(productRow?.textContent).toContain('no judged items');
    expect(productRow?.textContent).toContain('pending 20');
    expect(productRow?.querySelector('.accuracy-cell')).toBeNull();
  });

  it('labels a fully unjudged run', () => {
    const node = container();
    renderMetrics(node, {
      kind: 'category_metrics',
      categories: metricsDocument().categories.slice(1),
      overall: null,
    });
    expect(node.querySelector('.overall-row')?.textContent).toContain('no judged items');
  });
});

describe('renderQueue', () => {
  const queue = (items: QueueState['items']): QueueState => ({
    run: {
      run_id: 'r1',
      kind: 'ner',
      config: {},
      status: 'complete',
      created_at: 'now',
      item_count: items.length,
      judged_count: 1,
      pending_count: items.length - 1,
    },
    categoryFilter: null,
    statusFilter: null,
    items,
  });

  it('renders counters and items in server order', () => {
    const node = container();
    const onOpen = vi.fn();
    renderQueue(
      node,
      queue([
        { item_id: 'b', run_id: 'r1', category: 'MATERIAL', judgment_state: { status: 'judged', version: 1 } },
        { item_id: 'a', run_id: 'r1', category: 'PRODUCT', judgment_state: { status: 'pending' } },
      ]),
      onOpen,
    );
    const labels = [...node.querySelectorAll('.open-item')].map((b) => b.textContent);
    expect(labels[0]).toContain('b');
    expect(labels[1]).toContain('a');
    expect(node.textContent).toContain('pending: 1');
    expect(node.textContent).toContain('judged: 1');
    (node.querySelector('.open-item') as HTMLButtonElement).click();
    expect(onOpen).toHaveBeenCalledWith('b');
  });

  it('shows an empty state', () => {
    const node = container();
    renderQueue(node, queue([]), () => {});
    expect(node.querySelector('.empty-state')?.textContent).toContain('No items');
  });
});

describe('renderItem', () => {
  const detail: ItemDetail = {
    item_id: 'i1',
    run_id: 'r1',
    category: 'MATERIAL',
    judgment_state: { status: 'pending' },
    source_text: 'the abstract',
    raw_text: 'MATERIAL: Cu nanowire',
    answers: { MATERIAL: ['Cu nanowire'] },
    llm_answer: ['Cu nanowire'],
    judgments: [],
  };

  const state = (answer: 'unset' | 'yes', exists: 'unset' | 'yes'): ItemState => ({
    detail,
    answerCorrect: answer,
    entityExists: exists,
    submit: { phase: 'idle' },
  });

  it('disables submit until both controls are set and always shows the raw answer', () => {
    const node = container();
    renderItem(node, state('unset', 'unset'), { onSet: () => {}, onSubmit: () => {} });
    expect((node.querySelector('.submit-judgment') as HTMLButtonElement).disabled).toBe(true);
    expect(node.querySelector('.raw-answer')?.textContent).toBe('MATERIAL: Cu nanowire');

    renderItem(node, state('yes', 'yes'), { onSet: () => {}, onSubmit: () => {} });
    expect((node.querySelector('.submit-judgment') as HTMLButtonElement).disabled).toBe(false);
  });

  it('explains the empty-answer rule next to the entity_exists control', () => {
    const node = container();
    renderItem(node, state('unset', 'unset'), { onSet: () => {}, onSubmit: () => {} });
    expect(node.querySelector('.tri-control.entityExists .hint')?.textContent).toContain(
      'empty answer counts as correct',
    );
  });
});

describe('renderAblation', () => {
  it('renders the four-cell grid with verbatim percentages', () => {
    const node = container();
    const doc: AblationDocument = {
      kind: 'ablation_report',
      rows: [
        ['baseline/zero_shot', 27, 59, '36.88%'],
        ['baseline/few_shot:3', 37, 66, '41.25%'],
        ['fine_tuned/zero_shot', 49, 85, '53.12%'],
        ['fine_tuned/few_shot:3', 85, 110, '68.75%'],
      ].map(([config, correct, modified, pct]) => ({
        config: config as string,
        model_variant: (config as string).split('/')[0],
        shot_mode: (config as string).split('/')[1],
        item_count: 160,
        correct: correct as number,
        modified_correct: modified as number,
        modified_accuracy: { numerator: 1, denominator: 1 },
        modified_accuracy_pct: pct as string,
      })),
    };
    renderAblation(node, doc);
    const cells = [...node.querySelectorAll('.ablation-row .accuracy-cell')].map((c) => c.textContent);
    expect(cells).toEqual(['36.88%', '41.25%', '53.12%', '68.75%']);
  });
});
