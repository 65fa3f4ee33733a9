//! Canonical binary encoding.
//!
//! Layout rules: fields in declaration order, fixed-width big-endian
//! integers, `u32` length prefixes for byte strings and sequences, `u8`
//! discriminants for enums and options, strictly ascending element order for
//! sets and maps. Every top-level wire type is prefixed with a one-byte type
//! tag so a buffer names its own type.
//!
//! Decoding is strict: any byte string accepted by `from_bytes` re-encodes to
//! exactly itself.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::crypto::{Digest, PublicKey, Signature};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("malformed bytes at offset {offset}: {what}")]
    MalformedBytes { offset: usize, what: &'static str },
    #[error("{count} trailing bytes after value")]
    TrailingBytes { count: usize },
}

pub type WireResult<T> = Result<T, WireError>;

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn offset(&self) -> usize {
        self.pos
    }

    pub fn malformed(&self, what: &'static str) -> WireError {
        WireError::MalformedBytes {
            offset: self.pos,
            what,
        }
    }

    pub fn take(&mut self, n: usize) -> WireResult<&'a [u8]> {
        if self.remaining() < n {
            return Err(self.malformed("unexpected end of input"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn array<const N: usize>(&mut self) -> WireResult<[u8; N]> {
        let mut a = [0u8; N];
        a.copy_from_slice(self.take(N)?);
        Ok(a)
    }

    pub fn u8(&mut self) -> WireResult<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> WireResult<u32> {
        Ok(u32::from_be_bytes(self.array()?))
    }

    /// Reads a count prefix and rejects counts that cannot possibly fit in
    /// the remaining input (each element needs at least one byte).
    pub fn count(&mut self) -> WireResult<usize> {
        let n = self.u32()? as usize;
        if n > self.remaining() {
            return Err(self.malformed("count exceeds remaining input"));
        }
        Ok(n)
    }

    pub fn finish(self) -> WireResult<()> {
        match self.remaining() {
            0 => Ok(()),
            count => Err(WireError::TrailingBytes { count }),
        }
    }
}

/// A value with a canonical body encoding.
pub trait Canonical: Sized {
    fn write_to(&self, out: &mut Vec<u8>);
    fn read_from(r: &mut Reader<'_>) -> WireResult<Self>;

    fn body_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out);
        out
    }
}

/// A top-level, self-describing wire type.
pub trait WireType: Canonical {
    const TAG: u8;
    const NAME: &'static str;

    fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![Self::TAG];
        self.write_to(&mut out);
        out
    }

    fn from_bytes(bytes: &[u8]) -> WireResult<Self> {
        let mut r = Reader::new(bytes);
        if r.u8()? != Self::TAG {
            return Err(WireError::MalformedBytes {
                offset: 0,
                what: "unexpected type tag",
            });
        }
        let v = Self::read_from(&mut r)?;
        r.finish()?;
        Ok(v)
    }
}

macro_rules! int_impl {
    ($($t:ty),*) => {$(
        impl Canonical for $t {
            fn write_to(&self, out: &mut Vec<u8>) {
                out.extend_from_slice(&self.to_be_bytes());
            }
            fn read_from(r: &mut Reader<'_>) -> WireResult<Self> {
                Ok(<$t>::from_be_bytes(r.array()?))
            }
        }
    )*};
}

int_impl!(u8, u16, u32, u64, i32, i64);

impl Canonical for bool {
    fn write_to(&self, out: &mut Vec<u8>) {
        out.push(*self as u8);
    }
    fn read_from(r: &mut Reader<'_>) -> WireResult<Self> {
        match r.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(r.malformed("invalid boolean")),
        }
    }
}

impl<const N: usize> Canonical for [u8; N] {
    fn write_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(self);
    }
    fn read_from(r: &mut Reader<'_>) -> WireResult<Self> {
        r.array()
    }
}

impl Canonical for String {
    fn write_to(&self, out: &mut Vec<u8>) {
        (self.len() as u32).write_to(out);
        out.extend_from_slice(self.as_bytes());
    }
    fn read_from(r: &mut Reader<'_>) -> WireResult<Self> {
        let n = r.count()?;
        let bytes = r.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| r.malformed("invalid utf-8"))
    }
}

impl<T: Canonical> Canonical for Vec<T> {
    fn write_to(&self, out: &mut Vec<u8>) {
        (self.len() as u32).write_to(out);
        for item in self {
            item.write_to(out);
        }
    }
    fn read_from(r: &mut Reader<'_>) -> WireResult<Self> {
        let n = r.count()?;
        let mut v = Vec::with_capacity(n.min(1024));
        for _ in 0..n {
            v.push(T::read_from(r)?);
        }
        Ok(v)
    }
}

impl<T: Canonical> Canonical for Option<T> {
    fn write_to(&self, out: &mut Vec<u8>) {
        match self {
            None => out.push(0),
            Some(v) => {
                out.push(1);
                v.write_to(out);
            }
        }
    }
    fn read_from(r: &mut Reader<'_>) -> WireResult<Self> {
        match r.u8()? {
            0 => Ok(None),
            1 => Ok(Some(T::read_from(r)?)),
            _ => Err(r.malformed("invalid option tag")),
        }
    }
}

impl<T: Canonical + Ord> Canonical for BTreeSet<T> {
    fn write_to(&self, out: &mut Vec<u8>) {
        (self.len() as u32).write_to(out);
        for item in self {
            item.write_to(out);
        }
    }
    fn read_from(r: &mut Reader<'_>) -> WireResult<Self> {
        let n = r.count()?;
        let mut set = BTreeSet::new();
        for _ in 0..n {
            let item = T::read_from(r)?;
            if set.last().is_some_and(|last| *last >= item) {
                return Err(r.malformed("set elements not strictly ascending"));
            }
            set.insert(item);
        }
        Ok(set)
    }
}

impl<K: Canonical + Ord, V: Canonical> Canonical for BTreeMap<K, V> {
    fn write_to(&self, out: &mut Vec<u8>) {
        (self.len() as u32).write_to(out);
        for (k, v) in self {
            k.write_to(out);
            v.write_to(out);
        }
    }
    fn read_from(r: &mut Reader<'_>) -> WireResult<Self> {
        let n = r.count()?;
        let mut map = BTreeMap::new();
        for _ in 0..n {
            let k = K::read_from(r)?;
            if map.last_key_value().is_some_and(|(last, _)| *last >= k) {
                return Err(r.malformed("map keys not strictly ascending"));
            }
            let v = V::read_from(r)?;
            map.insert(k, v);
        }
        Ok(map)
    }
}

impl<A: Canonical, B: Canonical> Canonical for (A, B) {
    fn write_to(&self, out: &mut Vec<u8>) {
        self.0.write_to(out);
        self.1.write_to(out);
    }
    fn read_from(r: &mut Reader<'_>) -> WireResult<Self> {
        Ok((A::read_from(r)?, B::read_from(r)?))
    }
}

impl Canonical for Digest {
    fn write_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.0);
    }
    fn read_from(r: &mut Reader<'_>) -> WireResult<Self> {
        Ok(Digest(r.array()?))
    }
}

impl Canonical for PublicKey {
    fn write_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.0);
    }
    fn read_from(r: &mut Reader<'_>) -> WireResult<Self> {
        Ok(PublicKey(r.array()?))
    }
}

impl Canonical for Signature {
    fn write_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.0);
    }
    fn read_from(r: &mut Reader<'_>) -> WireResult<Self> {
        Ok(Signature(r.array()?))
    }
}

/// Implements [`Canonical`] for a struct by encoding the listed fields in order.
/// The list must match declaration order.
#[macro_export]
macro_rules! canonical_struct {
    ($ty:ident { $($field:tt),* $(,)? }) => {
        impl $crate::wire::Canonical for $ty {
            fn write_to(&self, out: &mut Vec<u8>) {
                $( $crate::wire::Canonical::write_to(&self.$field, out); )*
            }
            fn read_from(r: &mut $crate::wire::Reader<'_>) -> $crate::wire::WireResult<Self> {
                Ok($ty { $( $field: $crate::wire::Canonical::read_from(r)?, )* })
            }
        }
    };
}

/// Implements [`Canonical`] for a fieldless enum as a one-byte discriminant.
#[macro_export]
macro_rules! canonical_enum {
    ($ty:ident { $($variant:ident = $tag:literal),* $(,)? }) => {
        impl $crate::wire::Canonical for $ty {
            fn write_to(&self, out: &mut Vec<u8>) {
                out.push(match self { $( $ty::$variant => $tag, )* });
            }
            fn read_from(r: &mut $crate::wire::Reader<'_>) -> $crate::wire::WireResult<Self> {
                match r.u8()? {
                    $( $tag => Ok($ty::$variant), )*
                    _ => Err(r.malformed(concat!("invalid ", stringify!($ty), " discriminant"))),
                }
            }
        }
    };
}

/// Declares a type as a top-level wire type with the given tag.
#[macro_export]
macro_rules! wire_type {
    ($ty:ident, $tag:literal) => {
        impl $crate::wire::WireType for $ty {
            const TAG: u8 = $tag;
            const NAME: &'static str = stringify!($ty);
        }
    };
}
