// Microphone capture and WAV helpers. Recordings are resampled to 16 kHz
// mono PCM16 client-side, which is the upload format the service expects.

export const TARGET_SAMPLE_RATE = 16000;

export function downsample(
  samples: Float32Array,
  fromRate: number,
  toRate: number
): Float32Array {
  if (toRate > fromRate) {
    throw new Error(`cannot upsample from ${fromRate} Hz to ${toRate} Hz`);
  }
  if (toRate === fromRate) {
    return samples;
  }
  const ratio = fromRate / toRate;
  const length = Math.floor(samples.length / ratio);
  const out = new Float32Array(length);
  for (let i = 0; i < length; i++) {
    const position = i * ratio;
    const left = Math.floor(position);
    const right = Math.min(left + 1, samples.length - 1);
    const weight = position - left;
    out[i] = (samples[left] ?? 0) * (1 - weight) + (samples[right] ?? 0) * weight;
  }
  return out;
}

export function encodeWavPcm16(
  samples: Float32Array,
  sampleRate: number
): ArrayBuffer {
  const dataLength = samples.length * 2;
  const buffer = new ArrayBuffer(44 + dataLength);
  const view = new DataView(buffer);
  const writeAscii = (offset: number, text: string) => {
    for (let i = 0; i < text.length; i++) {
      view.setUint8(offset + i, text.charCodeAt(i));
    }
  };
  writeAscii(0, 'RIFF');
  view.setUint32(4, 36 + dataLength, true);
  writeAscii(8, 'WAVE');
  writeAscii(12, 'fmt ');
  view.setUint32(16, 16, true); // fmt chunk size
  view.setUint16(20, 1, true); // PCM
  view.setUint16(22, 1, true); // mono
  view.setUint32(24, sampleRate, true);
  view.setUint32(28, sampleRate * 2, true); // byte rate
  view.setUint16(32, 2, true); // block align
  view.setUint16(34, 16, true); // bits per sample
  writeAscii(36, 'data');
  view.setUint32(40, dataLength, true);
  for (let i = 0; i < samples.length; i++) {
    const clamped = Math.max(-1, Math.min(1, samples[i] ?? 0));
    view.setInt16(44 + i * 2, Math.round(clamped * 32767), true);
  }
  return buffer;
}

export function base64ToBytes(encoded: string): Uint8Array<ArrayBuffer> {
  const binary = atob(encoded);
  const bytes = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) {
    bytes[i] = binary.charCodeAt(i);
  }
  return bytes;
}

export function wavBlobFromBase64(encoded: string): Blob {
  return new Blob([base64ToBytes(encoded)], { type: 'audio/wav' });
}

/**
 * Push-to-talk recorder: start() grabs the microphone, stop() resolves to
 * 16 kHz PCM16 WAV bytes ready for upload, cancel() discards everything.
 */
export class Recorder {
  private recorder: MediaRecorder | null = null;
  private parts: Blob[] = [];

  get active(): boolean {
    return this.recorder !== null;
  }

  async start(): Promise<void> {
    if (this.recorder) {
      throw new Error('already recording');
    }
    const stream = await navigator.mediaDevices.getUserMedia({ audio: true });
    this.parts = [];
    this.recorder = new MediaRecorder(stream);
    this.recorder.ondataavailable = (event) => {
      if (event.data.size > 0) {
        this.parts.push(event.data);
      }
    };
    this.recorder.start();
  }

  private teardown(): void {
    this.recorder?.stream.getTracks().forEach((track) => track.stop());
    this.recorder = null;
    this.parts = [];
  }

  /** Drop the in-progress recording without producing any upload. */
  cancel(): void {
    if (!this.recorder) {
      return;
    }
    this.recorder.ondataavailable = null;
    this.recorder.onstop = null;
    if (this.recorder.state !== 'inactive') {
      this.recorder.stop();
    }
    this.teardown();
  }

  stop(): Promise<ArrayBuffer> {
    return new Promise((resolve, reject) => {
      const recorder = this.recorder;
      if (!recorder) {
        reject(new Error('not recording'));
        return;
      }
      recorder.onstop = async () => {
        try {
          const recorded = new Blob(this.parts, { type: recorder.mimeType });
          this.teardown();
          resolve(await encodeRecording(recorded));
        } catch (error) {
          this.teardown();
          reject(error);
        }
      };
      recorder.stop();
    });
  }
}

async function encodeRecording(recorded: Blob): Promise<ArrayBuffer> {
  if (recorded.size === 0) {
    throw new Error('recording is empty');
  }
  const context = new AudioContext();
  try {
    const decoded = await context.decodeAudioData(await recorded.arrayBuffer());
    const mono = decoded.getChannelData(0);
    const resampled = downsample(mono, decoded.sampleRate, TARGET_SAMPLE_RATE);
    return encodeWavPcm16(resampled, TARGET_SAMPLE_RATE);
  } finally {
    await context.close();
  }
}
