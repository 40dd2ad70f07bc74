//! Writes the C-D-E-D-C test melody at the broadcast rate: `cargo run --example test_melody -- out.wav`.

use qpsd_core::audio::{synth, write_wav, BROADCAST_RATE};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "melody.wav".into());
    let clip = synth::test_melody(BROADCAST_RATE, 0.4)?;
    write_wav(&clip, &path)?;
    println!(
        "{:.1} s at {} Hz -> {path}",
        clip.duration(),
        clip.sample_rate
    );
    Ok(())
}
