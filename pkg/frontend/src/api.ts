// Typed client for the retrieval service's JSON API. The UI never does
// retrieval or scoring itself; everything it shows comes from these calls.

export type Mode = 'kar' | 'regular';

export interface HealthPayload {
  status: string;
  version: string;
}

export interface StatsPayload {
  chunk_count: number;
  distinct_keywords: number;
  mean_keywords_per_chunk: number;
  document_count: number;
  documents: string[];
  store_dimension: number;
}

export interface StageTimings {
  retrieval: number;
  generation: number;
  total: number;
}

export interface ContextRef {
  chunk_id: string;
  heading_path: string[];
}

export interface AnswerPayload {
  answer: string;
  answer_length: number;
  mode: string;
  timings: StageTimings;
  context_chunk_ids: string[];
  context: ContextRef[];
}

export interface SpeechTiming {
  stt_seconds: number;
  tts_seconds: number;
}

export interface AudioPayload {
  data: string; // base64 WAV bytes
  encoding: string;
  sample_rate: number;
  duration: number;
}

export interface VoiceAnswerPayload extends AnswerPayload {
  query: string; // the transcript the service heard
  speech_timing: SpeechTiming;
  answer_audio: AudioPayload;
}

export interface QueryOptions {
  topK?: number;
  scoring?: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly stage: string | null,
    message: string
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

async function handleResponse<T>(response: Response): Promise<T> {
  if (response.ok) {
    return (await response.json()) as T;
  }
  // Service errors arrive as {"detail": ...} where detail is either a plain
  // string or an object carrying the failing pipeline stage.
  let stage: string | null = null;
  let message = `request failed with status ${response.status}`;
  try {
    const body = await response.json();
    const detail = body?.detail;
    if (typeof detail === 'string') {
      message = detail;
    } else if (detail && typeof detail === 'object') {
      stage = typeof detail.stage === 'string' ? detail.stage : null;
      message = typeof detail.error === 'string' ? detail.error : message;
    }
  } catch {
    // non-JSON body; keep the status line
  }
  throw new ApiError(response.status, stage, message);
}

export async function fetchHealth(baseUrl: string): Promise<HealthPayload> {
  const response = await fetch(`${baseUrl}/api/health`);
  return handleResponse<HealthPayload>(response);
}

export async function fetchStats(baseUrl: string): Promise<StatsPayload> {
  const response = await fetch(`${baseUrl}/api/stats`);
  return handleResponse<StatsPayload>(response);
}

export async function postQuery(
  baseUrl: string,
  query: string,
  mode: Mode,
  options: QueryOptions = {}
): Promise<AnswerPayload> {
  const body: Record<string, unknown> = { query, mode };
  if (options.topK !== undefined) body.top_k = options.topK;
  if (options.scoring !== undefined) body.scoring = options.scoring;
  const response = await fetch(`${baseUrl}/api/query`, {
    method: 'POST',
    headers: { 'Content-Type': 'application/json' },
    body: JSON.stringify(body),
  });
  return handleResponse<AnswerPayload>(response);
}

export async function postVoiceQuery(
  baseUrl: string,
  wavBytes: ArrayBuffer,
  mode: Mode,
  options: QueryOptions = {}
): Promise<VoiceAnswerPayload> {
  const form = new FormData();
  form.append('file', new Blob([wavBytes], { type: 'audio/wav' }), 'turn.wav');
  form.append('mode', mode);
  if (options.topK !== undefined) form.append('top_k', String(options.topK));
  if (options.scoring !== undefined) form.append('scoring', options.scoring);
  const response = await fetch(`${baseUrl}/api/voice-query`, {
    method: 'POST',
    body: form,
  });
  return handleResponse<VoiceAnswerPayload>(response);
}
