//! Encode a small spike cube to `.vdr` bytes, decode it again, and stream
//! the frames back one at a time.

use vidar::spike::{decode, encode, FrameReader, SpikeCube};

fn main() -> vidar::Result<()> {
    // one string per pixel, one character per tick
    let cube = SpikeCube::from_bit_rows(3, 2, &["1001", "0100", "0010", "1111", "0000", "1010"])?;
    let bytes = encode(&cube);
    println!(
        "{}x{} pixels, {} frames, {} spikes -> {} bytes",
        cube.width(),
        cube.height(),
        cube.len(),
        cube.spike_count(),
        bytes.len()
    );
    assert_eq!(decode(&bytes)?, cube);

    let reader = FrameReader::new(&bytes[..])?;
    for frame in reader {
        let frame = frame?;
        let lit: Vec<usize> = frame.ones().collect();
        println!("tick {}: pixels {:?}", frame.tick_index, lit);
    }
    Ok(())
}
