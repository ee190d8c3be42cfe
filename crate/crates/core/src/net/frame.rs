use std::io::{self, Read, Write};

use super::NetError;

pub const FRAME_VERSION: u8 = 1;
/// Upper bound on a frame body; responses carry a few ABE ciphertexts.
pub const MAX_FRAME: usize = 16 * 1024 * 1024;

/// `u32` big-endian length of what follows, the version byte, the message.
pub fn encode_frame(msg: &[u8]) -> Vec<u8> {
    let len = u32::try_from(msg.len() + 1).expect("frame body fits in u32");
    let mut out = Vec::with_capacity(msg.len() + 5);
    out.extend_from_slice(&len.to_be_bytes());
    out.push(FRAME_VERSION);
    out.extend_from_slice(msg);
    out
}

/// Decodes one complete frame, rejecting trailing bytes.
pub fn decode_frame(bytes: &[u8]) -> Result<Vec<u8>, NetError> {
    let mut cursor = bytes;
    let msg = read_frame(&mut cursor)?.ok_or(NetError::Closed)?;
    if !cursor.is_empty() {
        return Err(NetError::Malformed(format!("{} bytes after frame", cursor.len())));
    }
    Ok(msg)
}

pub fn write_frame<W: Write>(w: &mut W, msg: &[u8]) -> Result<(), NetError> {
    w.write_all(&encode_frame(msg))?;
    w.flush()?;
    Ok(())
}

/// Reads one frame; `Ok(None)` on a clean end of stream before any byte.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Vec<u8>>, NetError> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut len[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(NetError::Malformed("truncated frame header".into())),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let len = u32::from_be_bytes(len) as usize;
    if len == 0 {
        return Err(NetError::Malformed("empty frame".into()));
    }
    if len > MAX_FRAME {
        return Err(NetError::FrameTooLarge(len));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => NetError::Malformed("truncated frame body".into()),
        _ => e.into(),
    })?;
    if body[0] != FRAME_VERSION {
        return Err(NetError::BadVersion(body[0]));
    }
    body.remove(0);
    Ok(Some(body))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout() {
        assert_eq!(encode_frame(&[9, 8]), vec![0, 0, 0, 3, FRAME_VERSION, 9, 8]);
    }

    #[test]
    fn rejects_bad_frames() {
        assert!(matches!(decode_frame(&[0, 0, 0, 2, 7, 1]), Err(NetError::BadVersion(7))));
        assert!(matches!(decode_frame(&[0, 0, 0, 3, 1, 1]), Err(NetError::Malformed(_))));
        assert!(matches!(decode_frame(&[0, 0, 0, 0]), Err(NetError::Malformed(_))));
        assert!(matches!(decode_frame(&[0xff, 0, 0, 0, 1]), Err(NetError::FrameTooLarge(_))));
        let mut two = encode_frame(b"a");
        two.extend(encode_frame(b"b"));
        assert!(decode_frame(&two).is_err());
        let mut cursor = two.as_slice();
        assert_eq!(read_frame(&mut cursor).unwrap().unwrap(), b"a");
        assert_eq!(read_frame(&mut cursor).unwrap().unwrap(), b"b");
        assert_eq!(read_frame(&mut cursor).unwrap(), None);
    }

    proptest! {
        #[test]
        fn roundtrip(msg in proptest::collection::vec(any::<u8>(), 0..2048)) {
            prop_assert_eq!(decode_frame(&encode_frame(&msg)).unwrap(), msg);
        }
    }
}
