// Contract tests against the recorded-stub server: the UI must show
// transcript, answer, and timing values exactly as the service sent them,
// and the latency panel must agree with hand-computed averages.

import { afterAll, beforeAll, describe, expect, it } from 'vitest';
import {
  AnswerPayload,
  ApiError,
  HealthPayload,
  StatsPayload,
  VoiceAnswerPayload,
  fetchHealth,
  fetchStats,
  postQuery,
  postVoiceQuery,
} from '../src/api.js';
import { base64ToBytes, encodeWavPcm16 } from '../src/audio.js';
import { errorBubble, latencyPanel, textTurn, voiceTurn } from '../src/view.js';
import { fixtureJson, startStub, Stub } from './stub.js';

const QUERY = 'what is positionrank';

describe('chat client against the recorded-stub server', () => {
  let stub: Stub;

  beforeAll(async () => {
    stub = await startStub();
  });

  afterAll(async () => {
    await stub.close();
  });

  it('reports service health and corpus stats from the API', async () => {
    const health = await fetchHealth(stub.baseUrl);
    expect(health).toEqual(fixtureJson<HealthPayload>('health.json'));
    const stats = await fetchStats(stub.baseUrl);
    expect(stats).toEqual(fixtureJson<StatsPayload>('stats.json'));
  });

  it('text turn renders answer and timing chips byte-equal to the payload', async () => {
    const recorded = fixtureJson<AnswerPayload>('query_kar.json');
    const payload = await postQuery(stub.baseUrl, QUERY, 'kar');
    const turn = textTurn(QUERY, payload, 0.004);

    expect(turn.kind).toBe('text');
    expect(turn.query).toBe(QUERY);
    expect(turn.mode).toBe('kar');
    expect(turn.answer).toBe(recorded.answer);
    // toEqual compares numbers with Object.is, so these are exact — the
    // chips carry the response values untouched, not reformatted copies.
    expect(turn.chips.map((c) => ({ label: c.label, seconds: c.seconds }))).toEqual([
      { label: 'retrieval', seconds: recorded.timings.retrieval },
      { label: 'generation', seconds: recorded.timings.generation },
      { label: 'total', seconds: recorded.timings.total },
    ]);
    expect(turn.contextHeadings).toEqual(['PositionRank']);
    expect(turn.audio).toBeNull();
    expect(turn.networkSeconds).toBe(0.004);
  });

  it('regular-mode turn shows the embedding arm payload and its context', async () => {
    const recorded = fixtureJson<AnswerPayload>('query_regular.json');
    const payload = await postQuery(stub.baseUrl, QUERY, 'regular');
    const turn = textTurn(QUERY, payload, 0.004);

    expect(turn.mode).toBe('regular');
    expect(turn.answer).toBe(recorded.answer);
    expect(turn.contextHeadings).toEqual([
      'ExpandRank',
      'PositionRank',
      'PageRank',
      'PageRank › Computation',
    ]);
    const total = turn.chips.find((c) => c.label === 'total');
    expect(Object.is(total?.seconds, recorded.timings.total)).toBe(true);
  });

  it('voice turn renders transcript, answer, and speech chips byte-equal', async () => {
    const recorded = fixtureJson<VoiceAnswerPayload>('voice_query.json');
    const wav = encodeWavPcm16(new Float32Array(1600), 16000);
    const payload = await postVoiceQuery(stub.baseUrl, wav, 'kar');
    const turn = voiceTurn(payload, 0.012);

    expect(turn.kind).toBe('voice');
    expect(turn.query).toBe(recorded.query); // the transcript
    expect(turn.answer).toBe(recorded.answer);
    expect(turn.chips.map((c) => ({ label: c.label, seconds: c.seconds }))).toEqual([
      { label: 'stt', seconds: recorded.speech_timing.stt_seconds },
      { label: 'retrieval', seconds: recorded.timings.retrieval },
      { label: 'generation', seconds: recorded.timings.generation },
      { label: 'tts', seconds: recorded.speech_timing.tts_seconds },
      { label: 'total', seconds: recorded.timings.total },
    ]);
    const stt = turn.chips.find((c) => c.label === 'stt');
    expect(Object.is(stt?.seconds, recorded.speech_timing.stt_seconds)).toBe(true);

    // The playback handle is the recorded WAV, decodable client-side.
    expect(turn.audio).not.toBeNull();
    expect(turn.audio?.encoding).toBe('wav-pcm16');
    expect(turn.audio?.sample_rate).toBe(16000);
    expect(turn.audio?.duration).toBe(recorded.answer_audio.duration);
    const audioBytes = base64ToBytes(turn.audio?.data ?? '');
    expect(Buffer.from(audioBytes.slice(0, 4)).toString('ascii')).toBe('RIFF');
    expect(audioBytes.length).toBe(
      44 + 2 * Math.round(recorded.answer_audio.duration * recorded.answer_audio.sample_rate)
    );
  });

  it('voice upload goes out as multipart WAV with the chosen mode', async () => {
    const wav = encodeWavPcm16(new Float32Array(1600), 16000);
    await postVoiceQuery(stub.baseUrl, wav, 'regular', { topK: 2 });
    const request = stub.seen
      .filter((r) => r.path === '/api/voice-query')
      .at(-1);
    expect(request).toBeDefined();
    expect(request?.contentType).toContain('multipart/form-data');
    expect(request?.body.includes('name="file"')).toBe(true);
    expect(request?.body.includes(Buffer.from('RIFF'))).toBe(true);
    expect(request?.body.includes('name="mode"')).toBe(true);
    expect(request?.body.includes('regular')).toBe(true);
    expect(request?.body.includes('name="top_k"')).toBe(true);
  });

  it('latency panel averages match hand computation over the shown chips', async () => {
    const karTurn = textTurn(QUERY, await postQuery(stub.baseUrl, QUERY, 'kar'), 0.003);
    const regularTurn = textTurn(QUERY, await postQuery(stub.baseUrl, QUERY, 'regular'), 0.003);
    const wav = encodeWavPcm16(new Float32Array(1600), 16000);
    const voice = voiceTurn(await postVoiceQuery(stub.baseUrl, wav, 'kar'), 0.005);

    const rows = latencyPanel([karTurn, regularTurn, voice]);
    const karTotal = fixtureJson<AnswerPayload>('query_kar.json').timings.total;
    const regularTotal = fixtureJson<AnswerPayload>('query_regular.json').timings.total;
    const voiceTotal = fixtureJson<VoiceAnswerPayload>('voice_query.json').timings.total;

    expect(rows).toEqual([
      { mode: 'kar', turnCount: 2, averageTotal: (karTotal + voiceTotal) / 2 },
      { mode: 'regular', turnCount: 1, averageTotal: regularTotal / 1 },
    ]);
    // zero turns → the panel hides
    expect(latencyPanel([])).toEqual([]);
  });
});

describe('service errors', () => {
  it('failure surfaces as an inline bubble tagged with the pipeline stage', async () => {
    const failing = await startStub({
      'POST /api/query': {
        status: 503,
        body: { detail: { stage: 'generation-timeout', error: 'llm timed out' } },
      },
    });
    try {
      const error = await postQuery(failing.baseUrl, QUERY, 'kar').catch((e) => e);
      expect(error).toBeInstanceOf(ApiError);
      expect(error.status).toBe(503);
      expect(errorBubble(error)).toEqual({
        message: 'llm timed out',
        stage: 'generation-timeout',
      });
    } finally {
      await failing.close();
    }
  });

  it('415 from a bad upload maps to an unsupported-audio message', async () => {
    const failing = await startStub({
      'POST /api/voice-query': {
        status: 415,
        body: { detail: 'expected a PCM16 WAV upload' },
      },
    });
    try {
      const error = await postVoiceQuery(failing.baseUrl, new ArrayBuffer(4), 'kar').catch(
        (e) => e
      );
      expect(error).toBeInstanceOf(ApiError);
      expect(errorBubble(error)).toEqual({
        message: 'unsupported audio: expected a PCM16 WAV upload',
        stage: null,
      });
    } finally {
      await failing.close();
    }
  });
});
