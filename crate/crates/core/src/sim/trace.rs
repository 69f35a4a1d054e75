use std::io::Write;

use crate::error::Result;
use crate::sim::queue::{Entity, EventKind};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over the executed (time, kind, entity) sequence. Stable across
/// platforms and toolchain versions, unlike `DefaultHasher`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceDigest(u64);

impl Default for TraceDigest {
    fn default() -> Self {
        Self(FNV_OFFSET)
    }
}

impl TraceDigest {
    fn absorb(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
    }

    pub fn record(&mut self, time: f64, kind: EventKind, entity: Entity) {
        self.absorb(&time.to_bits().to_le_bytes());
        self.absorb(&[kind.code(), entity.code()]);
    }

    pub fn value(&self) -> u64 {
        self.0
    }
}

/// One executed event with the timer state it left behind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub time: f64,
    pub kind: EventKind,
    pub entity: Entity,
    pub device_expiry: f64,
    pub registrar_expiry: f64,
    pub power_charged: f64,
    /// Registrar still holds the binding.
    pub registered: bool,
    /// Monitor has accesses waiting for the next publish boundary.
    pub publish_pending: bool,
}

/// Streams trace records as CSV.
pub struct TraceWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record([
            "time",
            "kind",
            "entity",
            "device_expiry",
            "registrar_expiry",
            "power_charged",
        ])?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, r: &TraceRecord) -> Result<()> {
        self.inner.write_record([
            r.time.to_string(),
            r.kind.to_string(),
            r.entity.to_string(),
            r.device_expiry.to_string(),
            r.registrar_expiry.to_string(),
            r.power_charged.to_string(),
        ])?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        self.inner
            .into_inner()
            .map_err(|e| crate::error::Error::Io(e.into_error()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_digest_is_fnv_offset() {
        assert_eq!(TraceDigest::default().value(), FNV_OFFSET);
    }

    #[test]
    fn digest_is_order_sensitive() {
        let mut a = TraceDigest::default();
        a.record(1.0, EventKind::IosArrival, Entity::Device);
        a.record(2.0, EventKind::TimerExpiry, Entity::Device);
        let mut b = TraceDigest::default();
        b.record(2.0, EventKind::TimerExpiry, Entity::Device);
        b.record(1.0, EventKind::IosArrival, Entity::Device);
        assert_ne!(a, b);
    }

    #[test]
    fn fnv_reference_vector() {
        // FNV-1a 64 of "a" is 0xaf63dc4c8601ec8c.
        let mut d = TraceDigest::default();
        d.absorb(b"a");
        assert_eq!(d.value(), 0xaf63_dc4c_8601_ec8c);
    }

    #[test]
    fn writes_header_and_rows() {
        let mut w = TraceWriter::new(Vec::new()).unwrap();
        w.write(&TraceRecord {
            time: 1.0,
            kind: EventKind::TimerExpiry,
            entity: Entity::Device,
            device_expiry: 2.0,
            registrar_expiry: 2.0,
            power_charged: 325.0,
            registered: true,
            publish_pending: false,
        })
        .unwrap();
        let text = String::from_utf8(w.finish().unwrap()).unwrap();
        assert_eq!(
            text,
            "time,kind,entity,device_expiry,registrar_expiry,power_charged\n\
             1,TIMER_EXPIRY,device,2,2,325\n"
        );
    }
}
