// Pure view-model layer: turns API payloads into what the chat surface
// renders. No DOM access here, so the contract tests can run headless.

import {
  AnswerPayload,
  ApiError,
  AudioPayload,
  Mode,
  VoiceAnswerPayload,
} from './api.js';

export interface TimingChip {
  label: string;
  seconds: number; // verbatim from the API response, never re-measured
  text: string;
}

export interface ChatTurn {
  kind: 'text' | 'voice';
  query: string; // typed text, or the transcript for voice turns
  mode: Mode;
  answer: string;
  chips: TimingChip[];
  totalSeconds: number;
  contextHeadings: string[];
  audio: AudioPayload | null;
  // Measured client-side and shown under its own label, apart from the
  // service-reported chips above.
  networkSeconds: number;
}

export function canSubmit(text: string): boolean {
  return text.trim().length > 0;
}

export function formatSeconds(seconds: number): string {
  if (seconds >= 1) {
    return `${seconds.toFixed(2)} s`;
  }
  return `${(seconds * 1000).toFixed(1)} ms`;
}

function chip(label: string, seconds: number): TimingChip {
  if (!(seconds >= 0)) {
    throw new Error(`timing ${label} must be non-negative, got ${seconds}`);
  }
  return { label, seconds, text: `${label} ${formatSeconds(seconds)}` };
}

function headings(payload: AnswerPayload): string[] {
  return payload.context.map((ref) =>
    ref.heading_path.length > 0 ? ref.heading_path.join(' › ') : ref.chunk_id
  );
}

export function textTurn(
  query: string,
  payload: AnswerPayload,
  networkSeconds: number
): ChatTurn {
  return {
    kind: 'text',
    query,
    mode: payload.mode as Mode,
    answer: payload.answer,
    chips: [
      chip('retrieval', payload.timings.retrieval),
      chip('generation', payload.timings.generation),
      chip('total', payload.timings.total),
    ],
    totalSeconds: payload.timings.total,
    contextHeadings: headings(payload),
    audio: null,
    networkSeconds,
  };
}

export function voiceTurn(
  payload: VoiceAnswerPayload,
  networkSeconds: number
): ChatTurn {
  // Chip order mirrors the pipeline: hear, retrieve, generate, speak.
  return {
    kind: 'voice',
    query: payload.query,
    mode: payload.mode as Mode,
    answer: payload.answer,
    chips: [
      chip('stt', payload.speech_timing.stt_seconds),
      chip('retrieval', payload.timings.retrieval),
      chip('generation', payload.timings.generation),
      chip('tts', payload.speech_timing.tts_seconds),
      chip('total', payload.timings.total),
    ],
    totalSeconds: payload.timings.total,
    contextHeadings: headings(payload),
    audio: payload.answer_audio,
    networkSeconds,
  };
}

export interface ModeLatency {
  mode: Mode;
  turnCount: number;
  averageTotal: number;
}

/** Cumulative average total latency per mode; empty means the panel hides. */
export function latencyPanel(turns: ChatTurn[]): ModeLatency[] {
  const rows: ModeLatency[] = [];
  for (const mode of ['kar', 'regular'] as Mode[]) {
    const totals = turns
      .filter((turn) => turn.mode === mode)
      .map((turn) => turn.totalSeconds);
    if (totals.length === 0) {
      continue;
    }
    const sum = totals.reduce((acc, value) => acc + value, 0);
    rows.push({ mode, turnCount: totals.length, averageTotal: sum / totals.length });
  }
  return rows;
}

export interface ErrorBubble {
  message: string;
  stage: string | null;
}

export function errorBubble(error: unknown): ErrorBubble {
  if (error instanceof ApiError) {
    if (error.status === 415) {
      return { message: `unsupported audio: ${error.message}`, stage: error.stage };
    }
    return { message: error.message, stage: error.stage };
  }
  if (error instanceof Error) {
    return { message: error.message, stage: null };
  }
  return { message: String(error), stage: null };
}
