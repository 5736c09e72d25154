//! Spike streams: the bit-array data model and the `.vdr` codec.
//!
//! A stream is a sequence of readout frames. Each frame holds one bit per
//! pixel, set when the pixel fired during that readout cycle. Pixels are
//! indexed row-major (`y * width + x`) and packed least-significant-bit
//! first, so pixel 0 is bit 0 of byte 0. Padding bits in the final byte of a
//! frame are always zero.
//!
//! # File layout
//!
//! ```text
//! offset  size  field
//! 0       4     magic "VDR1"
//! 4       4     width        (u32 LE)
//! 8       4     height       (u32 LE)
//! 12      8     tick_ns      (u64 LE)
//! 20      8     frame_count  (u64 LE, 0 = unknown, read to EOF)
//! 28      ...   frames, ceil(width * height / 8) bytes each
//! ```

use std::io::{self, Read, Write};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"VDR1";
pub const HEADER_LEN: usize = 28;
/// Readout period of a 250-row array scanned at 100 ns per row.
pub const DEFAULT_TICK_NS: u64 = 25_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamHeader {
    pub width: u32,
    pub height: u32,
    pub tick_ns: u64,
    /// Number of frames that follow, or 0 when the length is not known up front.
    pub frame_count: u64,
}

impl StreamHeader {
    pub fn new(width: u32, height: u32, tick_ns: u64) -> Result<Self> {
        let header = StreamHeader {
            width,
            height,
            tick_ns,
            frame_count: 0,
        };
        header.validate()?;
        Ok(header)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Format(format!(
                "empty pixel array {}x{}",
                self.width, self.height
            )));
        }
        if self.tick_ns == 0 {
            return Err(Error::Format("tick_ns must be at least 1".into()));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn frame_bytes(&self) -> usize {
        frame_bytes(self.width, self.height)
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..4].copy_from_slice(&MAGIC);
        out[4..8].copy_from_slice(&self.width.to_le_bytes());
        out[8..12].copy_from_slice(&self.height.to_le_bytes());
        out[12..20].copy_from_slice(&self.tick_ns.to_le_bytes());
        out[20..28].copy_from_slice(&self.frame_count.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!(
                "header needs {HEADER_LEN} bytes, got {}",
                bytes.len()
            )));
        }
        if bytes[0..4] != MAGIC {
            return Err(Error::Format(format!(
                "bad magic {:?}",
                String::from_utf8_lossy(&bytes[0..4])
            )));
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let u64_at = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
        let header = StreamHeader {
            width: u32_at(4),
            height: u32_at(8),
            tick_ns: u64_at(12),
            frame_count: u64_at(20),
        };
        header.validate()?;
        Ok(header)
    }
}

pub fn frame_bytes(width: u32, height: u32) -> usize {
    (width as usize * height as usize).div_ceil(8)
}

/// One readout cycle: a packed bit per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpikeFrame {
    pub tick_index: u64,
    bits: Vec<u8>,
    pixels: usize,
}

impl SpikeFrame {
    pub fn zeros(pixels: usize, tick_index: u64) -> Self {
        SpikeFrame {
            tick_index,
            bits: vec![0; pixels.div_ceil(8)],
            pixels,
        }
    }

    /// Wraps packed bytes. Fails if the length is wrong or padding bits are set.
    pub fn from_bytes(bits: Vec<u8>, pixels: usize, tick_index: u64) -> Result<Self> {
        if bits.len() != pixels.div_ceil(8) {
            return Err(Error::Dimension(format!(
                "frame of {pixels} pixels needs {} bytes, got {}",
                pixels.div_ceil(8),
                bits.len()
            )));
        }
        let tail = pixels % 8;
        if tail != 0 && bits[bits.len() - 1] >> tail != 0 {
            return Err(Error::Format(format!(
                "nonzero padding bits in frame {tick_index}"
            )));
        }
        Ok(SpikeFrame {
            tick_index,
            bits,
            pixels,
        })
    }

    pub fn from_bools(spikes: &[bool], tick_index: u64) -> Self {
        let mut frame = SpikeFrame::zeros(spikes.len(), tick_index);
        for (i, _) in spikes.iter().enumerate().filter(|(_, s)| **s) {
            frame.bits[i >> 3] |= 1 << (i & 7);
        }
        frame
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bits
    }

    pub fn pixel_count(&self) -> usize {
        self.pixels
    }

    #[inline]
    pub fn get(&self, index: usize) -> bool {
        debug_assert!(index < self.pixels);
        self.bits[index >> 3] >> (index & 7) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, index: usize, value: bool) {
        assert!(index < self.pixels, "pixel {index} out of {}", self.pixels);
        let mask = 1u8 << (index & 7);
        if value {
            self.bits[index >> 3] |= mask;
        } else {
            self.bits[index >> 3] &= !mask;
        }
    }

    pub fn count_ones(&self) -> u64 {
        self.bits.iter().map(|b| b.count_ones() as u64).sum()
    }

    /// Indices of set pixels, ascending.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().flat_map(|(byte_idx, &byte)| {
            let mut rest = byte;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let bit = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(byte_idx * 8 + bit)
            })
        })
    }
}

/// A complete in-memory spike stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpikeCube {
    header: StreamHeader,
    frames: Vec<SpikeFrame>,
}

impl SpikeCube {
    pub fn new(width: u32, height: u32, tick_ns: u64) -> Result<Self> {
        Ok(SpikeCube {
            header: StreamHeader::new(width, height, tick_ns)?,
            frames: Vec::new(),
        })
    }

    pub fn with_header(mut header: StreamHeader) -> Result<Self> {
        header.validate()?;
        header.frame_count = 0;
        Ok(SpikeCube {
            header,
            frames: Vec::new(),
        })
    }

    /// Builds a cube from per-pixel bit strings such as `"0101"`, one string
    /// per pixel in row-major order. All strings must have equal length.
    pub fn from_bit_rows(width: u32, height: u32, rows: &[&str]) -> Result<Self> {
        let mut cube = SpikeCube::new(width, height, DEFAULT_TICK_NS)?;
        if rows.len() != cube.header.pixel_count() {
            return Err(Error::Dimension(format!(
                "{} bit strings for {} pixels",
                rows.len(),
                cube.header.pixel_count()
            )));
        }
        let len = rows.first().map_or(0, |r| r.len());
        for t in 0..len {
            let mut spikes = Vec::with_capacity(rows.len());
            for row in rows {
                match row.as_bytes().get(t) {
                    Some(b'1') => spikes.push(true),
                    Some(b'0') => spikes.push(false),
                    _ => {
                        return Err(Error::Format(format!("bad bit string {row:?}")));
                    }
                }
            }
            cube.push_bools(&spikes)?;
        }
        Ok(cube)
    }

    /// Header with `frame_count` equal to the number of frames held.
    pub fn header(&self) -> StreamHeader {
        StreamHeader {
            frame_count: self.frames.len() as u64,
            ..self.header
        }
    }

    pub fn width(&self) -> u32 {
        self.header.width
    }

    pub fn height(&self) -> u32 {
        self.header.height
    }

    pub fn tick_ns(&self) -> u64 {
        self.header.tick_ns
    }

    pub fn pixel_count(&self) -> usize {
        self.header.pixel_count()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[SpikeFrame] {
        &self.frames
    }

    pub fn frame(&self, tick: usize) -> Option<&SpikeFrame> {
        self.frames.get(tick)
    }

    /// Duration covered by the stream, in seconds.
    pub fn duration_secs(&self) -> f64 {
        self.frames.len() as f64 * self.header.tick_ns as f64 * 1e-9
    }

    /// Appends a frame; its `tick_index` is reassigned to keep indices consecutive.
    pub fn push_frame(&mut self, mut frame: SpikeFrame) -> Result<()> {
        if frame.pixels != self.pixel_count() {
            return Err(Error::Dimension(format!(
                "frame has {} pixels, stream has {}",
                frame.pixels,
                self.pixel_count()
            )));
        }
        frame.tick_index = self.frames.len() as u64;
        self.frames.push(frame);
        Ok(())
    }

    pub fn push_bools(&mut self, spikes: &[bool]) -> Result<()> {
        self.push_frame(SpikeFrame::from_bools(spikes, 0))
    }

    pub fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.header.width as usize + x as usize
    }

    pub fn get(&self, x: u32, y: u32, t: usize) -> bool {
        self.frames[t].get(self.index(x, y))
    }

    pub fn set(&mut self, x: u32, y: u32, t: usize, value: bool) {
        let idx = self.index(x, y);
        self.frames[t].set(idx, value);
    }

    pub fn spike_count(&self) -> u64 {
        self.frames.iter().map(SpikeFrame::count_ones).sum()
    }

    fn check_xy(&self, x: u32, y: u32) -> Result<()> {
        if x >= self.header.width || y >= self.header.height {
            return Err(Error::range(
                "pixel",
                format!(
                    "({x}, {y}) outside {}x{}",
                    self.header.width, self.header.height
                ),
            ));
        }
        Ok(())
    }

    pub fn pixel_train(&self, x: u32, y: u32) -> Result<SpikeTrain> {
        self.check_xy(x, y)?;
        let idx = self.index(x, y);
        let ticks = self
            .frames
            .iter()
            .enumerate()
            .filter(|(_, f)| f.get(idx))
            .map(|(t, _)| t as u64)
            .collect();
        Ok(SpikeTrain { ticks })
    }

    /// Spike trains of every pixel in row-major order, built in one pass.
    pub fn all_trains(&self) -> Vec<SpikeTrain> {
        let mut trains = vec![SpikeTrain::default(); self.pixel_count()];
        for (t, frame) in self.frames.iter().enumerate() {
            for idx in frame.ones() {
                trains[idx].ticks.push(t as u64);
            }
        }
        trains
    }

    /// Builds a cube where pixel `i` fires exactly at `trains[i]`.
    pub fn from_trains(
        width: u32,
        height: u32,
        tick_ns: u64,
        len: usize,
        trains: &[SpikeTrain],
    ) -> Result<Self> {
        let mut cube = SpikeCube::new(width, height, tick_ns)?;
        if trains.len() != cube.pixel_count() {
            return Err(Error::Dimension(format!(
                "{} trains for {} pixels",
                trains.len(),
                cube.pixel_count()
            )));
        }
        let pixels = cube.pixel_count();
        cube.frames = (0..len as u64)
            .map(|t| SpikeFrame::zeros(pixels, t))
            .collect();
        for (idx, train) in trains.iter().enumerate() {
            for &t in &train.ticks {
                let frame = cube.frames.get_mut(t as usize).ok_or_else(|| {
                    Error::range("tick", format!("spike at {t} beyond stream length {len}"))
                })?;
                frame.set(idx, true);
            }
        }
        Ok(cube)
    }
}

/// Ticks at which one pixel fired, strictly increasing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SpikeTrain {
    ticks: Vec<u64>,
}

impl SpikeTrain {
    pub fn new(ticks: Vec<u64>) -> Result<Self> {
        if ticks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Argument(
                "spike ticks must be strictly increasing".into(),
            ));
        }
        Ok(SpikeTrain { ticks })
    }

    pub fn ticks(&self) -> &[u64] {
        &self.ticks
    }

    pub fn len(&self) -> usize {
        self.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }

    pub fn interspike_intervals(&self) -> Vec<u64> {
        interspike_intervals(self)
    }
}

pub fn interspike_intervals(train: &SpikeTrain) -> Vec<u64> {
    train.ticks.windows(2).map(|w| w[1] - w[0]).collect()
}

pub fn encode(cube: &SpikeCube) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + cube.len() * cube.header.frame_bytes());
    write_cube(&mut out, cube).expect("writing to a Vec cannot fail");
    out
}

pub fn write_cube<W: Write>(mut writer: W, cube: &SpikeCube) -> io::Result<()> {
    writer.write_all(&cube.header().to_bytes())?;
    for frame in &cube.frames {
        writer.write_all(&frame.bits)?;
    }
    writer.flush()
}

pub fn decode(bytes: &[u8]) -> Result<SpikeCube> {
    read_cube(bytes)
}

pub fn read_cube<R: Read>(reader: R) -> Result<SpikeCube> {
    let stream = FrameReader::new(reader)?;
    let mut cube = SpikeCube::with_header(stream.header())?;
    for frame in stream {
        cube.frames.push(frame?);
    }
    Ok(cube)
}

/// Incremental decoder yielding one frame at a time.
///
/// With `frame_count == 0` in the header, frames are read until a clean EOF.
pub struct FrameReader<R> {
    reader: R,
    header: StreamHeader,
    next: u64,
    done: bool,
}

impl<R: Read> FrameReader<R> {
    pub fn new(mut reader: R) -> Result<Self> {
        let mut buf = [0u8; HEADER_LEN];
        read_full(&mut reader, &mut buf).and_then(|n| {
            if n < HEADER_LEN {
                Err(Error::Format(format!(
                    "header needs {HEADER_LEN} bytes, got {n}"
                )))
            } else {
                Ok(())
            }
        })?;
        let header = StreamHeader::from_bytes(&buf)?;
        Ok(FrameReader {
            reader,
            header,
            next: 0,
            done: false,
        })
    }

    pub fn header(&self) -> StreamHeader {
        self.header
    }
}

impl<R: Read> Iterator for FrameReader<R> {
    type Item = Result<SpikeFrame>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done || (self.header.frame_count != 0 && self.next >= self.header.frame_count) {
            return None;
        }
        let mut bits = vec![0u8; self.header.frame_bytes()];
        let got = match read_full(&mut self.reader, &mut bits) {
            Ok(n) => n,
            Err(e) => {
                self.done = true;
                return Some(Err(e));
            }
        };
        if got == 0 && self.header.frame_count == 0 {
            self.done = true;
            return None;
        }
        if got < bits.len() {
            self.done = true;
            return Some(Err(Error::Truncated { frame: self.next }));
        }
        let frame = SpikeFrame::from_bytes(bits, self.header.pixel_count(), self.next);
        self.next += 1;
        if frame.is_err() {
            self.done = true;
        }
        Some(frame)
    }
}

fn read_full<R: Read>(reader: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(filled)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pixel_payload_is_one_byte_per_frame() {
        let cube = SpikeCube::from_bit_rows(1, 1, &["101"]).unwrap();
        let bytes = encode(&cube);
        assert_eq!(&bytes[HEADER_LEN..], &[0x01, 0x00, 0x01]);
        assert_eq!(u64::from_le_bytes(bytes[20..28].try_into().unwrap()), 3);
    }

    #[test]
    fn empty_cube_is_header_only() {
        let cube = SpikeCube::new(3, 2, DEFAULT_TICK_NS).unwrap();
        let bytes = encode(&cube);
        assert_eq!(bytes.len(), HEADER_LEN);
        assert_eq!(&bytes[20..28], &0u64.to_le_bytes());
        assert_eq!(decode(&bytes).unwrap(), cube);
    }

    #[test]
    fn full_sensor_frame_size() {
        let mut cube = SpikeCube::new(400, 250, DEFAULT_TICK_NS).unwrap();
        cube.push_bools(&vec![false; 400 * 250]).unwrap();
        assert_eq!(encode(&cube).len() - HEADER_LEN, 12_500);
        // 12,500 bytes per 25 us readout is 4 Gb/s = 8 channels x 500 Mb/s.
        assert_eq!(12_500 * 8 * 40_000u64, 8 * 500_000_000);
    }

    #[test]
    fn golden_header_bytes() {
        let cube = SpikeCube::from_bit_rows(3, 1, &["10", "01", "11"]).unwrap();
        let bytes = encode(&cube);
        let expected: Vec<u8> = [
            &b"VDR1"[..],
            &3u32.to_le_bytes(),
            &1u32.to_le_bytes(),
            &25_000u64.to_le_bytes(),
            &2u64.to_le_bytes(),
            // frame 0: pixels 0 and 2 -> 0b101; frame 1: pixels 1 and 2 -> 0b110
            &[0b101, 0b110],
        ]
        .concat();
        assert_eq!(bytes, expected);
    }

    #[test]
    fn bad_magic() {
        let mut bytes = encode(&SpikeCube::new(2, 2, 1).unwrap());
        bytes[0..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_payload_names_the_frame() {
        let cube = SpikeCube::from_bit_rows(1, 1, &["1"]).unwrap();
        let mut bytes = encode(&cube);
        bytes[20..28].copy_from_slice(&2u64.to_le_bytes());
        assert!(matches!(decode(&bytes), Err(Error::Truncated { frame: 1 })));
    }

    #[test]
    fn partial_frame_in_open_ended_stream() {
        let mut cube = SpikeCube::new(9, 1, 1).unwrap();
        cube.push_bools(&[true; 9]).unwrap();
        let mut bytes = encode(&cube);
        bytes[20..28].copy_from_slice(&0u64.to_le_bytes());
        assert_eq!(decode(&bytes).unwrap(), cube);
        bytes.push(0xff);
        assert!(matches!(decode(&bytes), Err(Error::Truncated { frame: 1 })));
    }

    #[test]
    fn padding_bits_must_be_zero() {
        let cube = SpikeCube::from_bit_rows(3, 1, &["1", "0", "0"]).unwrap();
        let mut bytes = encode(&cube);
        *bytes.last_mut().unwrap() |= 0x80;
        assert!(matches!(decode(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn figure_bit_matrix_trains() {
        let cube = SpikeCube::from_bit_rows(
            1,
            3,
            &["01010001010100", "00000001000000", "01101010101011"],
        )
        .unwrap();
        assert_eq!(cube.pixel_train(0, 0).unwrap().ticks(), &[1, 3, 7, 9, 11]);
        let middle = cube.pixel_train(0, 1).unwrap();
        assert_eq!(middle.ticks(), &[7]);
        assert!(middle.interspike_intervals().is_empty());
        assert_eq!(
            cube.pixel_train(0, 2).unwrap().interspike_intervals(),
            vec![1, 2, 2, 2, 2, 2, 1]
        );
    }

    #[test]
    fn trains_of_constant_cubes() {
        let zeros = SpikeCube::from_bit_rows(1, 1, &["00000"]).unwrap();
        assert!(zeros.pixel_train(0, 0).unwrap().is_empty());
        let ones = SpikeCube::from_bit_rows(1, 1, &["11111"]).unwrap();
        assert_eq!(ones.pixel_train(0, 0).unwrap().ticks(), &[0, 1, 2, 3, 4]);
    }

    #[test]
    fn pixel_train_out_of_bounds() {
        let cube = SpikeCube::new(4, 3, 1).unwrap();
        assert!(matches!(cube.pixel_train(4, 0), Err(Error::Range { .. })));
        assert!(matches!(cube.pixel_train(0, 3), Err(Error::Range { .. })));
    }

    #[test]
    fn intervals() {
        let train = SpikeTrain::new(vec![1, 3, 7]).unwrap();
        assert_eq!(interspike_intervals(&train), vec![2, 4]);
        assert!(SpikeTrain::new(vec![3, 3]).is_err());
    }

    #[test]
    fn ones_iterates_set_bits() {
        let mut frame = SpikeFrame::zeros(20, 0);
        for i in [0, 7, 8, 19] {
            frame.set(i, true);
        }
        assert_eq!(frame.ones().collect::<Vec<_>>(), vec![0, 7, 8, 19]);
        assert_eq!(frame.count_ones(), 4);
    }
}
