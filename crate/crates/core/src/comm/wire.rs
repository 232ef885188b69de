//! TCP frame codec.
//!
//! Frame layout, all integers little-endian:
//! `"FLCM" | u8 kind | u32 src | u32 dst | u32 tag | u64 len | payload`.

use std::io::{self, Read, Write};

use super::CommError;

pub const MAGIC: [u8; 4] = *b"FLCM";
pub const PROTOCOL_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 4 + 1 + 4 + 4 + 4 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum FrameKind {
    Handshake = 0,
    Message = 1,
}

/// A point-to-point message as carried on the wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub kind: FrameKind,
    pub src: u32,
    pub dst: u32,
    pub tag: u32,
    pub payload: Vec<u8>,
}

impl Message {
    pub fn handshake(src: u32, dst: u32, group_size: u32) -> Self {
        let mut payload = Vec::with_capacity(8);
        payload.extend_from_slice(&PROTOCOL_VERSION.to_le_bytes());
        payload.extend_from_slice(&group_size.to_le_bytes());
        Message { kind: FrameKind::Handshake, src, dst, tag: 0, payload }
    }

    /// Returns `(protocol version, group size)` of a handshake frame.
    pub fn handshake_fields(&self) -> Option<(u32, u32)> {
        if self.kind != FrameKind::Handshake || self.payload.len() != 8 {
            return None;
        }
        let v = u32::from_le_bytes(self.payload[..4].try_into().unwrap());
        let n = u32::from_le_bytes(self.payload[4..].try_into().unwrap());
        Some((v, n))
    }

    pub fn header(&self) -> [u8; HEADER_LEN] {
        let mut h = [0u8; HEADER_LEN];
        h[..4].copy_from_slice(&MAGIC);
        h[4] = self.kind as u8;
        h[5..9].copy_from_slice(&self.src.to_le_bytes());
        h[9..13].copy_from_slice(&self.dst.to_le_bytes());
        h[13..17].copy_from_slice(&self.tag.to_le_bytes());
        h[17..25].copy_from_slice(&(self.payload.len() as u64).to_le_bytes());
        h
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.extend_from_slice(&self.header());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(&self.header())?;
        w.write_all(&self.payload)?;
        w.flush()
    }

    /// Reads one frame. `Ok(None)` on a clean end of stream before any header byte.
    pub fn read_from<R: Read>(r: &mut R) -> Result<Option<Self>, CommError> {
        let mut h = [0u8; HEADER_LEN];
        let mut got = 0;
        while got < HEADER_LEN {
            match r.read(&mut h[got..]) {
                Ok(0) if got == 0 => return Ok(None),
                Ok(0) => return Err(CommError::Protocol("truncated frame header".into())),
                Ok(n) => got += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(CommError::Io(e)),
            }
        }
        if h[..4] != MAGIC {
            return Err(CommError::Protocol(format!("bad frame magic {:02x?}", &h[..4])));
        }
        let kind = match h[4] {
            0 => FrameKind::Handshake,
            1 => FrameKind::Message,
            k => return Err(CommError::Protocol(format!("unknown frame type {k}"))),
        };
        let src = u32::from_le_bytes(h[5..9].try_into().unwrap());
        let dst = u32::from_le_bytes(h[9..13].try_into().unwrap());
        let tag = u32::from_le_bytes(h[13..17].try_into().unwrap());
        let len = u64::from_le_bytes(h[17..25].try_into().unwrap());
        let len = usize::try_from(len)
            .map_err(|_| CommError::Protocol(format!("payload length {len} too large")))?;
        let mut payload = vec![0u8; len];
        r.read_exact(&mut payload).map_err(CommError::Io)?;
        Ok(Some(Message { kind, src, dst, tag, payload }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn handshake_bytes_are_exact() {
        let bytes = Message::handshake(0, 1, 2).encode();
        let expected: Vec<u8> = [
            &b"FLCM"[..],
            &[0u8],
            &0u32.to_le_bytes(),
            &1u32.to_le_bytes(),
            &0u32.to_le_bytes(),
            &8u64.to_le_bytes(),
            &1u32.to_le_bytes(),
            &2u32.to_le_bytes(),
        ]
        .concat();
        assert_eq!(bytes, expected);
    }

    #[test]
    fn rejects_bad_magic() {
        let mut bytes = Message::handshake(0, 1, 2).encode();
        bytes[0] = b'X';
        let err = Message::read_from(&mut bytes.as_slice()).unwrap_err();
        assert!(matches!(err, CommError::Protocol(_)));
    }

    #[test]
    fn clean_eof_is_none() {
        let empty: &[u8] = &[];
        assert!(Message::read_from(&mut &*empty).unwrap().is_none());
    }

    proptest! {
        #[test]
        fn frame_round_trip(src: u32, dst: u32, tag: u32, payload in proptest::collection::vec(any::<u8>(), 0..256)) {
            let m = Message { kind: FrameKind::Message, src, dst, tag, payload };
            let bytes = m.encode();
            prop_assert_eq!(bytes.len(), HEADER_LEN + m.payload.len());
            let back = Message::read_from(&mut bytes.as_slice()).unwrap().unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
