// DOM rendering. Every number shown comes from the service verbatim; the
// formatted percentage strings in particular are displayed, never computed.

import type { ItemState, QueueState, TriState } from './store.js';
import type { AblationDocument, MetricsDocument } from './types.js';

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderQueue(
  container: HTMLElement,
  queue: QueueState,
  onOpen: (itemId: string) => void,
): void {
  const doc = container.ownerDocument;
  container.replaceChildren();

  const counters = el(doc, 'div', 'queue-counters');
  if (queue.run) {
    counters.append(
      el(doc, 'span', 'counter pending', `pending: ${queue.run.pending_count}`),
      el(doc, 'span', 'counter judged', `judged: ${queue.run.judged_count}`),
    );
  }
  container.append(counters);

  if (queue.items.length === 0) {
    container.append(el(doc, 'p', 'empty-state', 'No items in this view.'));
    return;
  }
  const list = el(doc, 'ul', 'queue-list');
  for (const item of queue.items) {
    const row = el(doc, 'li', 'queue-item');
    const state =
      item.judgment_state.status === 'judged'
        ? `judged v${item.judgment_state.version}`
        : 'pending';
    const button = el(doc, 'button', 'open-item', `${item.item_id} [${item.category ?? '-'}] ${state}`);
    button.dataset.itemId = item.item_id;
    button.addEventListener('click', () => onOpen(item.item_id));
    row.append(button);
    list.append(row);
  }
  container.append(list);
}

function triControl(
  doc: Document,
  name: string,
  label: string,
  value: TriState,
  onSet: (value: TriState) => void,
): HTMLElement {
  const wrap = el(doc, 'fieldset', `tri-control ${name}`);
  wrap.append(el(doc, 'legend', undefined, label));
  for (const option of ['yes', 'no'] as const) {
    const button = el(doc, 'button', `tri-${option}${value === option ? ' selected' : ''}`, option);
    button.dataset.control = name;
    button.dataset.value = option;
    button.addEventListener('click', () => onSet(option));
    wrap.append(button);
  }
  return wrap;
}

export interface ItemHandlers {
  onSet: (control: 'answerCorrect' | 'entityExists', value: TriState) => void;
  onSubmit: () => void;
}

export function renderItem(container: HTMLElement, state: ItemState, handlers: ItemHandlers): void {
  const doc = container.ownerDocument;
  container.replaceChildren();

  container.append(el(doc, 'h3', 'item-id', state.detail.item_id));
  container.append(el(doc, 'p', 'source-text', state.detail.source_text));

  // the raw model answer is always visible; the parse is advisory
  container.append(el(doc, 'pre', 'raw-answer', state.detail.raw_text ?? '(no raw answer)'));
  if (state.detail.category) {
    const values = state.detail.llm_answer;
    container.append(
      el(
        doc,
        'p',
        'parsed-answer',
        `${state.detail.category}: ${values.length > 0 ? values.join('; ') : '(empty answer)'}`,
      ),
    );
  }

  container.append(
    triControl(doc, 'answerCorrect', 'Answer correct?', state.answerCorrect, (v) =>
      handlers.onSet('answerCorrect', v),
    ),
  );
  const exists = triControl(doc, 'entityExists', 'Entity exists in the text?', state.entityExists, (v) =>
    handlers.onSet('entityExists', v),
  );
  // the empty-answer rule, explained where the judgment is made
  exists.append(
    el(
      doc,
      'small',
      'hint',
      'If the entity type does not occur in the text, an empty answer counts as correct.',
    ),
  );
  container.append(exists);

  const submit = el(doc, 'button', 'submit-judgment', 'Submit judgment');
  const ready = state.answerCorrect !== 'unset' && state.entityExists !== 'unset';
  submit.disabled = !ready || state.submit.phase === 'submitting';
  submit.addEventListener('click', () => handlers.onSubmit());
  container.append(submit);

  const status = el(doc, 'p', 'submit-state');
  switch (state.submit.phase) {
    case 'idle':
      status.textContent = '';
      break;
    case 'submitting':
      status.textContent = 'submitting...';
      break;
    case 'judged':
      status.textContent = state.submit.conflict
        ? `saved as version ${state.submit.version} (another reviewer also judged this item)`
        : `saved as version ${state.submit.version}`;
      break;
    case 'error':
      status.textContent = `not saved: ${state.submit.message}`;
      break;
  }
  container.append(status);

  if (state.detail.judgments.length > 0) {
    const audit = el(doc, 'ol', 'judgment-audit');
    for (const record of state.detail.judgments) {
      audit.append(
        el(
          doc,
          'li',
          undefined,
          `v${record.version} by ${record.reviewer}: answer_correct=${record.answer_correct}, entity_exists=${record.entity_exists}`,
        ),
      );
    }
    container.append(audit);
  }
}

export function renderMetrics(container: HTMLElement, document_: MetricsDocument): void {
  const doc = container.ownerDocument;
  container.replaceChildren();
  const table = el(doc, 'table', 'metrics-table');
  const head = el(doc, 'tr');
  for (const column of ['Entity', 'Count', 'Correct', 'Existence', 'Modified Correct', 'Modified Accuracy']) {
    head.append(el(doc, 'th', undefined, column));
  }
  table.append(head);

  for (const entry of document_.categories) {
    const row = el(doc, 'tr', 'category-row');
    row.dataset.category = entry.category;
    row.append(el(doc, 'td', undefined, entry.category));
    if (entry.count === 0 || entry.modified_accuracy_pct === null) {
      row.append(el(doc, 'td', undefined, '0'));
      const pendingCell = el(doc, 'td', 'no-judged', 'no judged items');
      pendingCell.colSpan = 3;
      row.append(pendingCell);
      row.append(el(doc, 'td', 'pending-count', `pending ${entry.pending}`));
    } else {
      row.append(el(doc, 'td', undefined, String(entry.count)));
      row.append(el(doc, 'td', undefined, String(entry.correct)));
      row.append(el(doc, 'td', undefined, String(entry.existence)));
      row.append(el(doc, 'td', undefined, String(entry.modified_correct)));
      // displayed verbatim from the service
      row.append(el(doc, 'td', 'accuracy-cell', entry.modified_accuracy_pct));
    }
    table.append(row);
  }

  const overallRow = el(doc, 'tr', 'overall-row');
  overallRow.append(el(doc, 'td', undefined, 'OVERALL'));
  if (document_.overall === null) {
    const cell = el(doc, 'td', 'no-judged', 'no judged items');
    cell.colSpan = 5;
    overallRow.append(cell);
  } else {
    overallRow.append(el(doc, 'td', undefined, String(document_.overall.count)));
    overallRow.append(el(doc, 'td', undefined, String(document_.overall.correct)));
    overallRow.append(el(doc, 'td', undefined, String(document_.overall.existence)));
    overallRow.append(el(doc, 'td', undefined, String(document_.overall.modified_correct)));
    overallRow.append(el(doc, 'td', 'accuracy-cell overall', document_.overall.modified_accuracy_pct));
  }
  table.append(overallRow);
  container.append(table);
}

export function renderAblation(container: HTMLElement, document_: AblationDocument): void {
  const doc = container.ownerDocument;
  container.replaceChildren();
  const grid = el(doc, 'table', 'ablation-grid');
  const head = el(doc, 'tr');
  for (const column of ['Model', 'Correct', 'Modified Correct', 'Modified Accuracy']) {
    head.append(el(doc, 'th', undefined, column));
  }
  grid.append(head);
  for (const row of document_.rows) {
    const tr = el(doc, 'tr', 'ablation-row');
    tr.dataset.config = row.config;
    tr.append(el(doc, 'td', undefined, row.config));
    tr.append(el(doc, 'td', undefined, String(row.correct)));
    tr.append(el(doc, 'td', undefined, String(row.modified_correct)));
    tr.append(el(doc, 'td', 'accuracy-cell', row.modified_accuracy_pct));
    grid.append(tr);
  }
  container.append(grid);
}

export function renderToasts(container: HTMLElement, toasts: { kind: string; message: string }[]): void {
  const doc = container.ownerDocument;
  container.replaceChildren();
  for (const toast of toasts.slice(-3)) {
    container.append(el(doc, 'div', `toast ${toast.kind}`, toast.message));
  }
}
