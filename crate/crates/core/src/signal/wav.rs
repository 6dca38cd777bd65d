use std::io::{Read, Seek, Write};

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{Waveform, AUDIO_RATE_HZ};
use crate::error::{NvxError, Result};

fn spec() -> WavSpec {
    WavSpec {
        channels: 1,
        sample_rate: AUDIO_RATE_HZ,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    }
}

/// 16-bit mono PCM at 16 kHz; samples are scaled by 32767 and clipped.
pub fn write_wav<W: Write + Seek>(w: &Waveform, out: W) -> Result<()> {
    let mut writer = WavWriter::new(out, spec())?;
    for &s in w.samples() {
        let v = (s * 32767.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(v)?;
    }
    writer.finalize()?;
    Ok(())
}

pub fn read_wav<R: Read>(input: R) -> Result<Waveform> {
    let mut reader = WavReader::new(input)?;
    let s = reader.spec();
    if s != spec() {
        return Err(NvxError::Malformed(format!(
            "expected 16-bit mono PCM at {AUDIO_RATE_HZ} Hz, found {} ch, {} Hz, {} bits",
            s.channels, s.sample_rate, s.bits_per_sample
        )));
    }
    let samples = reader
        .samples::<i16>()
        .map(|v| v.map(|v| v as f64 / 32767.0))
        .collect::<Result<Vec<_>, _>>()?;
    Waveform::new(samples)
}
