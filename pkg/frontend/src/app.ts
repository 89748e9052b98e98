// Chat surface wiring. All retrieval happens server-side; this file only
// moves payloads between the API client, the view-model, and the DOM.

import { ApiError, fetchHealth, fetchStats, Mode, postQuery, postVoiceQuery } from './api.js';
import { Recorder, wavBlobFromBase64 } from './audio.js';
import {
  canSubmit,
  ChatTurn,
  ErrorBubble,
  errorBubble,
  formatSeconds,
  latencyPanel,
  textTurn,
  voiceTurn,
} from './view.js';

declare global {
  interface Window {
    KAR_API_BASE?: string;
  }
}

const API_BASE = window.KAR_API_BASE ?? '';

type LogEntry = { kind: 'turn'; turn: ChatTurn } | { kind: 'error'; bubble: ErrorBubble };

const turns: ChatTurn[] = [];
const entries: LogEntry[] = [];
const recorder = new Recorder();
let pending = false;
let playing: HTMLAudioElement | null = null;

const el = <T extends HTMLElement>(id: string): T => {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
};

const statusLine = el<HTMLElement>('status');
const log = el<HTMLElement>('log');
const panel = el<HTMLElement>('panel');
const composer = el<HTMLFormElement>('composer');
const queryInput = el<HTMLInputElement>('query');
const sendButton = el<HTMLButtonElement>('send');
const recordButton = el<HTMLButtonElement>('record');
const cancelButton = el<HTMLButtonElement>('cancel-record');

function selectedMode(): Mode {
  const checked = document.querySelector<HTMLInputElement>('input[name="mode"]:checked');
  return checked?.value === 'regular' ? 'regular' : 'kar';
}

function setPending(value: boolean): void {
  pending = value;
  queryInput.disabled = value;
  sendButton.disabled = value || !canSubmit(queryInput.value);
  recordButton.disabled = value;
}

function stopPlayback(): void {
  playing?.pause();
  playing = null;
}

function chipSpan(text: string, extra = ''): HTMLElement {
  const span = document.createElement('span');
  span.className = `chip ${extra}`.trim();
  span.textContent = text;
  return span;
}

function renderTurn(turn: ChatTurn): HTMLElement {
  const bubble = document.createElement('article');
  bubble.className = 'turn';

  const queryRow = document.createElement('div');
  queryRow.className = 'query-row';
  const badge = chipSpan(turn.mode, `badge mode-${turn.mode}`);
  const query = document.createElement('span');
  query.className = 'query-text';
  query.textContent = turn.kind === 'voice' ? `🎤 ${turn.query}` : turn.query;
  queryRow.append(badge, query);

  const answer = document.createElement('p');
  answer.className = 'answer';
  answer.textContent = turn.answer;

  const chips = document.createElement('div');
  chips.className = 'chips';
  for (const item of turn.chips) {
    chips.append(chipSpan(item.text));
  }
  // Round-trip is measured client-side, so it gets its own label and style.
  chips.append(chipSpan(`network ${formatSeconds(turn.networkSeconds)}`, 'network'));

  bubble.append(queryRow, answer, chips);

  if (turn.contextHeadings.length > 0) {
    const context = document.createElement('div');
    context.className = 'context';
    context.textContent = `context: ${turn.contextHeadings.join(' · ')}`;
    bubble.append(context);
  }

  if (turn.audio) {
    const audio = new Audio(URL.createObjectURL(wavBlobFromBase64(turn.audio.data)));
    const replay = document.createElement('button');
    replay.type = 'button';
    replay.className = 'replay';
    replay.textContent = '⏸ pause';
    replay.addEventListener('click', () => {
      if (audio.paused) {
        if (recorder.active) {
          return; // playback never overlaps recording
        }
        stopPlayback();
        playing = audio;
        void audio.play();
        replay.textContent = '⏸ pause';
      } else {
        audio.pause();
        replay.textContent = '▶ replay';
      }
    });
    audio.addEventListener('ended', () => {
      replay.textContent = '▶ replay';
      if (playing === audio) {
        playing = null;
      }
    });
    bubble.append(replay);
    stopPlayback();
    playing = audio;
    void audio.play();
  }

  return bubble;
}

function renderError(bubble: ErrorBubble): HTMLElement {
  const node = document.createElement('article');
  node.className = 'turn error';
  if (bubble.stage) {
    node.append(chipSpan(bubble.stage, 'badge stage'));
  }
  const message = document.createElement('span');
  message.textContent = bubble.message;
  node.append(message);
  return node;
}

function renderLog(): void {
  log.replaceChildren(
    ...entries.map((entry) =>
      entry.kind === 'turn' ? renderTurn(entry.turn) : renderError(entry.bubble)
    )
  );
  log.scrollTop = log.scrollHeight;

  const rows = latencyPanel(turns);
  panel.hidden = rows.length === 0;
  panel.replaceChildren(
    ...rows.map((row) => {
      const card = document.createElement('div');
      card.className = `mode-card mode-${row.mode}`;
      const title = document.createElement('strong');
      title.textContent = row.mode;
      const body = document.createElement('span');
      body.textContent = `${formatSeconds(row.averageTotal)} avg over ${row.turnCount} turn${
        row.turnCount === 1 ? '' : 's'
      }`;
      card.append(title, body);
      return card;
    })
  );
}

function pushTurn(turn: ChatTurn): void {
  turns.push(turn);
  entries.push({ kind: 'turn', turn });
  renderLog();
}

function pushError(error: unknown): void {
  entries.push({ kind: 'error', bubble: errorBubble(error) });
  renderLog();
}

async function submitText(): Promise<void> {
  const text = queryInput.value;
  if (pending || !canSubmit(text)) {
    return;
  }
  setPending(true);
  const started = performance.now();
  try {
    const payload = await postQuery(API_BASE, text.trim(), selectedMode());
    pushTurn(textTurn(text.trim(), payload, (performance.now() - started) / 1000));
    queryInput.value = ''; // only clear once the turn landed, so errors keep it
  } catch (error) {
    pushError(error);
  } finally {
    setPending(false);
    queryInput.focus();
  }
}

async function submitRecording(): Promise<void> {
  setPending(true);
  recordButton.textContent = '🎤 speak';
  cancelButton.hidden = true;
  try {
    const wavBytes = await recorder.stop();
    const started = performance.now();
    const payload = await postVoiceQuery(API_BASE, wavBytes, selectedMode());
    pushTurn(voiceTurn(payload, (performance.now() - started) / 1000));
  } catch (error) {
    pushError(error);
  } finally {
    setPending(false);
  }
}

async function toggleRecording(): Promise<void> {
  if (pending) {
    return;
  }
  if (recorder.active) {
    await submitRecording();
    return;
  }
  stopPlayback(); // recording never overlaps playback
  try {
    await recorder.start();
    recordButton.textContent = '⏹ stop & send';
    cancelButton.hidden = false;
  } catch {
    pushError(new Error('microphone unavailable — check browser permission'));
  }
}

composer.addEventListener('submit', (event) => {
  event.preventDefault();
  void submitText();
});
queryInput.addEventListener('input', () => {
  sendButton.disabled = pending || !canSubmit(queryInput.value);
});
recordButton.addEventListener('click', () => void toggleRecording());
cancelButton.addEventListener('click', () => {
  recorder.cancel();
  recordButton.textContent = '🎤 speak';
  cancelButton.hidden = true;
});

async function showStatus(): Promise<void> {
  try {
    const health = await fetchHealth(API_BASE);
    const stats = await fetchStats(API_BASE);
    statusLine.textContent =
      `service ${health.status} (v${health.version}) — ${stats.chunk_count} chunks ` +
      `from ${stats.document_count} document${stats.document_count === 1 ? '' : 's'}`;
  } catch (error) {
    statusLine.textContent =
      error instanceof ApiError ? `service error: ${error.message}` : 'service unreachable';
  }
}

sendButton.disabled = true;
void showStatus();
