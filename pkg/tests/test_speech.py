"""Audio containers, WAV fixtures, STT/TTS wrappers, end-to-end voice turns."""

from __future__ import annotations

import pytest

from kar.errors import ProviderError
from kar.providers import MockCompletionProvider
from kar.speech import (
    AudioBlob,
    MockSynthesizer,
    MockTranscriber,
    parse_wav,
    sine_wav,
    synthesize,
    transcribe,
    voice_query,
    wav_blob,
)


class TestAudioBlob:
    def test_all_supported_rates_accepted(self):
        for rate in (8000, 16000, 22050, 44100):
            blob = AudioBlob(data=b"\x00\x01", encoding="wav-pcm16",
                             sample_rate=rate, duration=0.5)
            assert blob.sample_rate == rate

    def test_mp3_encoding_accepted(self):
        blob = AudioBlob(data=b"\xffID3", encoding="mp3", sample_rate=44100,
                         duration=1.0)
        assert blob.encoding == "mp3"

    def test_empty_data_rejected(self):
        with pytest.raises(ValueError, match="empty audio"):
            AudioBlob(data=b"", encoding="wav-pcm16", sample_rate=16000,
                      duration=1.0)

    def test_unknown_encoding_rejected(self):
        with pytest.raises(ValueError, match="unsupported audio encoding"):
            AudioBlob(data=b"x", encoding="ogg", sample_rate=16000, duration=1.0)

    def test_unknown_sample_rate_rejected(self):
        with pytest.raises(ValueError, match="unsupported sample rate"):
            AudioBlob(data=b"x", encoding="wav-pcm16", sample_rate=11025,
                      duration=1.0)

    def test_zero_duration_rejected(self):
        with pytest.raises(ValueError, match="duration must be positive"):
            AudioBlob(data=b"x", encoding="wav-pcm16", sample_rate=16000,
                      duration=0.0)


class TestWavHelpers:
    def test_sine_is_deterministic(self):
        assert sine_wav(0.25) == sine_wav(0.25)

    def test_parse_recovers_rate_and_duration(self):
        data = sine_wav(0.5, sample_rate=22050)
        rate, duration = parse_wav(data)
        assert rate == 22050
        assert duration == pytest.approx(0.5, abs=1e-3)

    def test_wav_blob_fields_are_consistent(self):
        blob = wav_blob(0.3, sample_rate=8000)
        assert blob.encoding == "wav-pcm16"
        assert blob.sample_rate == 8000
        assert blob.duration == pytest.approx(0.3, abs=1e-3)
        assert parse_wav(blob.data)[0] == 8000

    def test_garbage_bytes_rejected(self):
        with pytest.raises(ValueError, match="corrupt WAV data"):
            parse_wav(b"this is not audio")


class TestTranscribe:
    def test_fixture_lookup(self):
        blob = wav_blob(0.2)
        stt = MockTranscriber(transcripts={blob.data: "what is pagerank"})
        text, elapsed = transcribe(blob, stt)
        assert text == "what is pagerank"
        assert elapsed >= 0.0
        assert stt.calls == 1

    def test_transcript_is_trimmed(self):
        blob = wav_blob(0.2)
        stt = MockTranscriber(default="  spoken words \n")
        assert transcribe(blob, stt)[0] == "spoken words"

    def test_blank_transcript_is_no_speech(self):
        blob = wav_blob(0.2)
        stt = MockTranscriber(default="   ")
        with pytest.raises(ValueError, match="no speech detected"):
            transcribe(blob, stt)

    def test_unmapped_audio_without_default_fails_with_stage(self):
        blob = wav_blob(0.2)
        with pytest.raises(ProviderError) as exc_info:
            transcribe(blob, MockTranscriber())
        assert exc_info.value.stage == "stt"

    def test_elapsed_reflects_injected_latency(self):
        blob = wav_blob(0.2)
        stt = MockTranscriber(default="hello", latency=0.05)
        _, elapsed = transcribe(blob, stt)
        assert 0.05 <= elapsed < 0.5


class TestSynthesize:
    def test_duration_tracks_text_length(self):
        audio, elapsed = synthesize("x" * 40, MockSynthesizer())
        assert audio.duration == pytest.approx(40 * 0.05, abs=1e-3)
        assert elapsed >= 0.0

    def test_empty_text_rejected(self):
        with pytest.raises(ValueError, match="empty text"):
            synthesize("  ", MockSynthesizer())

    def test_failure_carries_stage(self):
        with pytest.raises(ProviderError) as exc_info:
            synthesize("hello", MockSynthesizer(fail_times=1))
        assert exc_info.value.stage == "tts"


class TestVoiceQuery:
    def _blob(self) -> AudioBlob:
        return wav_blob(0.2)

    def test_full_voice_turn(self, corpus):
        blob = self._blob()
        stt = MockTranscriber(transcripts={blob.data: "what is pagerank"})
        tts = MockSynthesizer()
        llm = MockCompletionProvider(reply="A link-structure score.")
        result = voice_query(blob, "kar", stt=stt, tts=tts,
                             chunks=corpus["by_id"], llm=llm,
                             index=corpus["index"])
        assert result.transcript == "what is pagerank"
        assert result.record.answer == "A link-structure score."
        assert result.record.mode == "kar"
        assert result.answer_audio.duration == pytest.approx(
            len("A link-structure score.") * 0.05, abs=1e-3)
        assert result.timing.stt_seconds >= 0.0
        assert result.timing.tts_seconds >= 0.0
        assert (stt.calls, tts.calls, llm.calls) == (1, 1, 1)

    def test_stage_events_do_not_overlap(self, corpus):
        blob = self._blob()
        stt = MockTranscriber(default="what is pagerank", latency=0.01)
        events: list[tuple[str, float, float]] = []
        voice_query(blob, "kar", stt=stt, tts=MockSynthesizer(latency=0.01),
                    events=events, chunks=corpus["by_id"],
                    llm=MockCompletionProvider(latency=0.01),
                    index=corpus["index"])
        names = [name for name, _, _ in events]
        assert names == ["stt", "retrieval", "generation", "tts"]
        spans = {name: (t0, t1) for name, t0, t1 in events}
        assert spans["stt"][1] <= spans["retrieval"][0]
        assert spans["generation"][1] <= spans["tts"][0]

    def test_fallback_answer_is_still_spoken(self, corpus):
        blob = self._blob()
        stt = MockTranscriber(default="zzz qqq")
        llm = MockCompletionProvider()
        result = voice_query(blob, "kar", stt=stt, tts=MockSynthesizer(),
                             chunks=corpus["by_id"], llm=llm,
                             index=corpus["index"])
        assert result.record.answer == "I don't know"
        assert llm.calls == 0
        assert result.answer_audio.duration == pytest.approx(
            len("I don't know") * 0.05, abs=1e-3)

    def test_tts_failure_carries_partial_result(self, corpus):
        blob = self._blob()
        stt = MockTranscriber(default="what is pagerank")
        llm = MockCompletionProvider(reply="The answer.")
        with pytest.raises(ProviderError) as exc_info:
            voice_query(blob, "kar", stt=stt, tts=MockSynthesizer(fail_times=1),
                        chunks=corpus["by_id"], llm=llm, index=corpus["index"])
        err = exc_info.value
        assert err.stage == "tts"
        assert err.answer_record.answer == "The answer."
        assert err.transcript == "what is pagerank"

    def test_stt_failure_stops_the_turn(self, corpus):
        blob = self._blob()
        llm = MockCompletionProvider()
        with pytest.raises(ProviderError) as exc_info:
            voice_query(blob, "kar", stt=MockTranscriber(default="x", fail_times=1),
                        tts=MockSynthesizer(), chunks=corpus["by_id"],
                        llm=llm, index=corpus["index"])
        assert exc_info.value.stage == "stt"
        assert llm.calls == 0

    def test_speech_timing_reflects_provider_latency(self, corpus):
        blob = self._blob()
        stt = MockTranscriber(default="what is pagerank", latency=0.04)
        tts = MockSynthesizer(latency=0.06)
        result = voice_query(blob, "kar", stt=stt, tts=tts,
                             chunks=corpus["by_id"],
                             llm=MockCompletionProvider(),
                             index=corpus["index"])
        assert result.timing.stt_seconds >= 0.04
        assert result.timing.tts_seconds >= 0.06
        assert result.timing.stt_seconds + result.timing.tts_seconds < 1.0
