"""Speech front-end: transcription in, synthesized audio out.

voice_query is transcribe -> answer_query -> synthesize. STT and TTS failures
carry stage tags ("stt", "tts"); a TTS failure still exposes the generated
answer on the raised error so callers can surface it.
"""

from __future__ import annotations

import io
import math
import struct
import time
import wave
from dataclasses import dataclass
from typing import Protocol

import httpx

from .errors import ProviderError, ProviderTimeout, TransientProviderError
from .generation import AnswerRecord, answer_query

SUPPORTED_ENCODINGS = ("wav-pcm16", "mp3")
SUPPORTED_SAMPLE_RATES = (8000, 16000, 22050, 44100)


@dataclass
class AudioBlob:
    data: bytes
    encoding: str  # wav-pcm16 | mp3
    sample_rate: int
    duration: float  # seconds

    def __post_init__(self) -> None:
        if not self.data:
            raise ValueError("empty audio")
        if self.encoding not in SUPPORTED_ENCODINGS:
            raise ValueError(f"unsupported audio encoding: {self.encoding!r}")
        if self.sample_rate not in SUPPORTED_SAMPLE_RATES:
            raise ValueError(f"unsupported sample rate: {self.sample_rate}")
        if self.duration <= 0:
            raise ValueError("audio duration must be positive")


@dataclass
class SpeechTiming:
    stt_seconds: float
    tts_seconds: float


@dataclass
class VoiceResult:
    transcript: str
    record: AnswerRecord
    timing: SpeechTiming
    answer_audio: AudioBlob


class Transcriber(Protocol):
    def transcribe(self, audio: AudioBlob) -> str: ...


class Synthesizer(Protocol):
    def synthesize(self, text: str) -> AudioBlob: ...


def sine_wav(duration: float, sample_rate: int = 16000, frequency: float = 440.0,
             amplitude: float = 0.5) -> bytes:
    """Mono PCM16 WAV bytes of a sine tone; fully deterministic."""
    frame_count = max(1, int(round(duration * sample_rate)))
    buf = io.BytesIO()
    with wave.open(buf, "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(sample_rate)
        scale = amplitude * 32767.0
        frames = bytearray()
        for n in range(frame_count):
            sample = int(scale * math.sin(2.0 * math.pi * frequency * n / sample_rate))
            frames += struct.pack("<h", sample)
        wav.writeframes(bytes(frames))
    return buf.getvalue()


def wav_blob(duration: float, sample_rate: int = 16000, frequency: float = 440.0) -> AudioBlob:
    return AudioBlob(data=sine_wav(duration, sample_rate, frequency),
                     encoding="wav-pcm16", sample_rate=sample_rate,
                     duration=duration)


def parse_wav(data: bytes) -> tuple[int, float]:
    """(sample_rate, duration) from WAV bytes; raises ValueError when corrupt."""
    try:
        with wave.open(io.BytesIO(data), "rb") as wav:
            rate = wav.getframerate()
            frames = wav.getnframes()
    except (wave.Error, EOFError) as exc:
        raise ValueError(f"corrupt WAV data: {exc}") from None
    if frames <= 0 or rate <= 0:
        raise ValueError("corrupt WAV data: no frames")
    return rate, frames / rate


class MockTranscriber:
    """Fixture-backed STT: audio bytes -> transcript.

    Unmapped audio falls back to `default` (None means error). latency
    injects per-call sleep; fail_times scripts provider failures.
    """

    def __init__(self, transcripts: dict[bytes, str] | None = None,
                 default: str | None = None, latency: float = 0.0,
                 fail_times: int = 0):
        self.transcripts = transcripts or {}
        self.default = default
        self.latency = latency
        self.fail_times = fail_times
        self.calls = 0

    def transcribe(self, audio: AudioBlob) -> str:
        self.calls += 1
        if self.latency:
            time.sleep(self.latency)
        if self.fail_times > 0:
            self.fail_times -= 1
            raise TransientProviderError("mock stt failure", stage="stt")
        if audio.data in self.transcripts:
            return self.transcripts[audio.data]
        if self.default is None:
            raise ProviderError("no transcript fixture for this audio", stage="stt")
        return self.default


class MockSynthesizer:
    """Deterministic TTS: 440 Hz sine, 16 kHz PCM16 WAV, 0.05 s per character."""

    SECONDS_PER_CHAR = 0.05

    def __init__(self, latency: float = 0.0, fail_times: int = 0,
                 sample_rate: int = 16000):
        self.latency = latency
        self.fail_times = fail_times
        self.sample_rate = sample_rate
        self.calls = 0

    def synthesize(self, text: str) -> AudioBlob:
        self.calls += 1
        if self.latency:
            time.sleep(self.latency)
        if self.fail_times > 0:
            self.fail_times -= 1
            raise TransientProviderError("mock tts failure", stage="tts")
        duration = len(text) * self.SECONDS_PER_CHAR
        return wav_blob(duration, sample_rate=self.sample_rate)


class HttpTranscriber:
    """STT over HTTP: multipart audio upload, {"text": ...} response."""

    def __init__(self, url: str, api_key: str | None = None,
                 client: httpx.Client | None = None, timeout: float = 60.0):
        self.url = url
        self._api_key = api_key
        self._client = client or httpx.Client()
        self.timeout = timeout
        self.calls = 0

    def __repr__(self) -> str:
        return f"HttpTranscriber(url={self.url!r})"

    def transcribe(self, audio: AudioBlob) -> str:
        self.calls += 1
        headers = {}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        content_type = "audio/wav" if audio.encoding == "wav-pcm16" else "audio/mpeg"
        files = {"audio": ("audio", audio.data, content_type)}
        try:
            response = self._client.post(self.url, files=files, headers=headers,
                                         timeout=self.timeout)
        except httpx.TimeoutException as exc:
            raise ProviderTimeout(f"stt request timed out: {exc}", stage="stt") from exc
        except httpx.HTTPError as exc:
            raise TransientProviderError(f"stt request failed: {exc}",
                                         stage="stt") from exc
        if response.status_code >= 400:
            raise ProviderError(f"stt provider returned {response.status_code}",
                                stage="stt", status_code=response.status_code)
        try:
            return response.json()["text"]
        except (KeyError, ValueError) as exc:
            raise ProviderError(f"malformed stt response: {exc}", stage="stt") from exc


class HttpSynthesizer:
    """TTS over HTTP: {"text": ...} request, audio bytes response."""

    def __init__(self, url: str, api_key: str | None = None,
                 client: httpx.Client | None = None, timeout: float = 60.0):
        self.url = url
        self._api_key = api_key
        self._client = client or httpx.Client()
        self.timeout = timeout
        self.calls = 0

    def __repr__(self) -> str:
        return f"HttpSynthesizer(url={self.url!r})"

    def synthesize(self, text: str) -> AudioBlob:
        self.calls += 1
        headers = {}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        try:
            response = self._client.post(self.url, json={"text": text},
                                         headers=headers, timeout=self.timeout)
        except httpx.TimeoutException as exc:
            raise ProviderTimeout(f"tts request timed out: {exc}", stage="tts") from exc
        except httpx.HTTPError as exc:
            raise TransientProviderError(f"tts request failed: {exc}",
                                         stage="tts") from exc
        if response.status_code >= 400:
            raise ProviderError(f"tts provider returned {response.status_code}",
                                stage="tts", status_code=response.status_code)
        content_type = response.headers.get("content-type", "")
        if "mpeg" in content_type or "mp3" in content_type:
            raise ProviderError("tts provider returned mp3 without duration metadata",
                                stage="tts")
        rate, duration = parse_wav(response.content)
        return AudioBlob(data=response.content, encoding="wav-pcm16",
                         sample_rate=rate, duration=duration)


def transcriber_from_config(spec: str, api_key: str | None = None):
    """"mock:<default transcript>" or an http(s) URL."""
    if spec.startswith("mock:"):
        default = spec.split(":", 1)[1]
        return MockTranscriber(default=default or None)
    if spec.startswith(("http://", "https://")):
        return HttpTranscriber(spec, api_key=api_key)
    raise ValueError(f"unsupported stt provider config: {spec!r}")


def synthesizer_from_config(spec: str, api_key: str | None = None):
    if spec.startswith("mock:"):
        return MockSynthesizer()
    if spec.startswith(("http://", "https://")):
        return HttpSynthesizer(spec, api_key=api_key)
    raise ValueError(f"unsupported tts provider config: {spec!r}")


def transcribe(audio: AudioBlob, provider: Transcriber) -> tuple[str, float]:
    """Transcript (trimmed) and wall seconds. Empty transcripts are an error
    ("no speech detected"); provider failures are stage-tagged "stt"."""
    start = time.perf_counter()
    try:
        text = provider.transcribe(audio)
    except ProviderError:
        raise
    except Exception as exc:
        raise ProviderError(f"stt provider failed: {exc}", stage="stt") from exc
    elapsed = time.perf_counter() - start
    text = text.strip()
    if not text:
        raise ValueError("no speech detected")
    return text, elapsed


def synthesize(text: str, provider: Synthesizer) -> tuple[AudioBlob, float]:
    """Audio for the text and wall seconds; stage tag "tts" on failure."""
    if not text.strip():
        raise ValueError("empty text")
    start = time.perf_counter()
    try:
        audio = provider.synthesize(text)
    except ProviderError:
        raise
    except Exception as exc:
        raise ProviderError(f"tts provider failed: {exc}", stage="tts") from exc
    return audio, time.perf_counter() - start


def voice_query(audio: AudioBlob, mode: str, *, stt: Transcriber, tts: Synthesizer,
                events: list[tuple[str, float, float]] | None = None,
                **answer_kwargs) -> VoiceResult:
    """Transcribe the audio, answer in the given mode, synthesize the answer.

    On TTS failure the raised ProviderError carries the already generated
    answer record as `.answer_record` and the transcript as `.transcript`.
    """
    t0 = time.perf_counter()
    transcript, stt_seconds = transcribe(audio, stt)
    if events is not None:
        events.append(("stt", t0, t0 + stt_seconds))

    record = answer_query(transcript, mode, events=events, **answer_kwargs)

    t1 = time.perf_counter()
    try:
        answer_audio, tts_seconds = synthesize(record.answer, tts)
    except ProviderError as exc:
        exc.answer_record = record
        exc.transcript = transcript
        raise
    if events is not None:
        events.append(("tts", t1, t1 + tts_seconds))
    return VoiceResult(
        transcript=transcript,
        record=record,
        timing=SpeechTiming(stt_seconds=stt_seconds, tts_seconds=tts_seconds),
        answer_audio=answer_audio,
    )
