//! Binary PGM (P5, maxval 255) export of frames.

use std::io::Write;
use std::path::Path;

use crate::camera::Frame;
use crate::error::SimError;

pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn encode(frame: &Frame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width, frame.height).into_bytes();
    out.extend(frame.data.iter().map(|&v| quantize(v)));
    out
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| &bytes[start..*pos])
}

pub fn decode(bytes: &[u8]) -> Result<Frame, SimError> {
    let bad = |m: &str| SimError::Image(m.to_string());
    let mut pos = 0;
    if next_token(bytes, &mut pos) != Some(b"P5") {
        return Err(bad("not a binary PGM"));
    }
    let mut num = || -> Result<usize, SimError> {
        next_token(bytes, &mut pos)
            .and_then(|t| std::str::from_utf8(t).ok()?.parse().ok())
            .ok_or_else(|| bad("bad header field"))
    };
    let (width, height, maxval) = (num()?, num()?, num()?);
    if maxval != 255 {
        return Err(bad("only maxval 255 is supported"));
    }
    // exactly one whitespace byte separates the header from the raster
    let raster = bytes
        .get(pos + 1..pos + 1 + width * height)
        .ok_or_else(|| bad("truncated raster"))?;
    Ok(Frame {
        width,
        height,
        data: raster.iter().map(|&b| b as f32 / 255.0).collect(),
    })
}

pub fn write(path: &Path, frame: &Frame) -> Result<(), SimError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode(frame))?;
    Ok(())
}

pub fn read(path: &Path) -> Result<Frame, SimError> {
    decode(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_quantization() {
        let f = Frame {
            width: 2,
            height: 1,
            data: vec![0.0, 0.5],
        };
        let bytes = encode(&f);
        assert_eq!(&bytes[..11], b"P5\n2 1\n255\n");
        assert_eq!(&bytes[11..], &[0, 128]);
    }

    #[test]
    fn decode_inverts_encode_up_to_quantization() {
        let f = Frame {
            width: 3,
            height: 2,
            data: vec![0.0, 0.1, 0.33, 0.5, 0.9, 1.0],
        };
        let back = decode(&encode(&f)).unwrap();
        assert_eq!((back.width, back.height), (3, 2));
        for (a, b) in f.data.iter().zip(&back.data) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
        }
    }
}
