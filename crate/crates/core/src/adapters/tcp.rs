//! Adapters over TCP. Each request is one connection carrying length-prefixed
//! frames: `u8` type, `u32` big-endian length, payload. Types: `0x01`
//! control text (`META` or `QUERY <text>`), `0x02` a chunk of the wire
//! encoding, `0x03` end, `0x04` error text.

use std::io::{self, BufReader, BufWriter, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use super::{Adapter, AdapterError, AdapterQuery};
use crate::catalog::{SourceDescriptor, Transport};
use crate::wire::{decode_documents, encode_documents};
use crate::xml::EventStream;

pub const FRAME_CONTROL: u8 = 0x01;
pub const FRAME_CHUNK: u8 = 0x02;
pub const FRAME_END: u8 = 0x03;
pub const FRAME_ERROR: u8 = 0x04;

const REJECTED: &str = "REJECTED ";

pub fn write_frame(w: &mut impl Write, kind: u8, payload: &[u8]) -> io::Result<()> {
    let len = u32::try_from(payload.len()).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "frame too large"))?;
    w.write_all(&[kind])?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(payload)
}

pub fn read_frame(r: &mut impl Read) -> io::Result<(u8, Vec<u8>)> {
    let mut head = [0u8; 5];
    r.read_exact(&mut head)?;
    let len = u32::from_be_bytes([head[1], head[2], head[3], head[4]]) as usize;
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload)?;
    Ok((head[0], payload))
}

/// A running adapter server. Dropping it stops accepting connections.
pub struct TcpServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl TcpServer {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }
}

impl Drop for TcpServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

/// Serve `adapter` on `addr` (port 0 picks a free port). `frame_delay`
/// sleeps before every chunk frame, standing in for a slow link.
pub fn serve(adapter: Arc<dyn Adapter>, addr: impl ToSocketAddrs, frame_delay: Option<Duration>) -> io::Result<TcpServer> {
    let listener = TcpListener::bind(addr)?;
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    let handle = thread::spawn(move || {
        for conn in listener.incoming() {
            if flag.load(Ordering::SeqCst) {
                break;
            }
            let Ok(conn) = conn else { continue };
            let adapter = adapter.clone();
            thread::spawn(move || {
                let _ = handle_connection(adapter.as_ref(), conn, frame_delay);
            });
        }
    });
    Ok(TcpServer { addr, stop, handle: Some(handle) })
}

fn handle_connection(adapter: &dyn Adapter, conn: TcpStream, delay: Option<Duration>) -> io::Result<()> {
    let mut r = BufReader::new(conn.try_clone()?);
    let mut w = BufWriter::new(conn);
    let (kind, payload) = read_frame(&mut r)?;
    let msg = String::from_utf8_lossy(&payload).into_owned();
    let fail = |w: &mut BufWriter<TcpStream>, e: AdapterError| {
        let text = match e {
            AdapterError::Rejected(m) => format!("{REJECTED}{m}"),
            other => other.to_string(),
        };
        write_frame(w, FRAME_ERROR, text.as_bytes())
    };
    if kind != FRAME_CONTROL {
        write_frame(&mut w, FRAME_ERROR, b"expected a control frame")?;
    } else if msg == "META" {
        match adapter.get_metadata() {
            Ok(doc) => {
                write_frame(&mut w, FRAME_CONTROL, doc.as_bytes())?;
                write_frame(&mut w, FRAME_END, &[])?;
            }
            Err(e) => fail(&mut w, e)?,
        }
    } else if let Some(text) = msg.strip_prefix("QUERY ") {
        match adapter.execute(&AdapterQuery::new(text)) {
            Ok(events) => {
                let mut ok = true;
                for chunk in encode_documents(events) {
                    match chunk {
                        Ok(bytes) => {
                            if let Some(d) = delay {
                                w.flush()?;
                                thread::sleep(d);
                            }
                            write_frame(&mut w, FRAME_CHUNK, &bytes)?;
                        }
                        Err(e) => {
                            write_frame(&mut w, FRAME_ERROR, e.as_bytes())?;
                            ok = false;
                            break;
                        }
                    }
                }
                if ok {
                    write_frame(&mut w, FRAME_END, &[])?;
                }
            }
            Err(e) => fail(&mut w, e)?,
        }
    } else {
        write_frame(&mut w, FRAME_ERROR, format!("unknown request {msg:?}").as_bytes())?;
    }
    w.flush()?;
    w.get_ref().shutdown(Shutdown::Write)
}

/// Concatenated chunk payloads of a response; an error frame becomes an I/O error.
struct ChunkReader {
    conn: BufReader<TcpStream>,
    buf: Vec<u8>,
    pos: usize,
    done: bool,
}

impl Read for ChunkReader {
    fn read(&mut self, out: &mut [u8]) -> io::Result<usize> {
        while self.pos == self.buf.len() {
            if self.done {
                return Ok(0);
            }
            let (kind, payload) = read_frame(&mut self.conn)?;
            match kind {
                FRAME_CHUNK => {
                    self.buf = payload;
                    self.pos = 0;
                }
                FRAME_END => self.done = true,
                FRAME_ERROR => {
                    self.done = true;
                    return Err(io::Error::other(String::from_utf8_lossy(&payload).into_owned()));
                }
                k => return Err(io::Error::new(io::ErrorKind::InvalidData, format!("unexpected frame type {k}"))),
            }
        }
        let n = out.len().min(self.buf.len() - self.pos);
        out[..n].copy_from_slice(&self.buf[self.pos..self.pos + n]);
        self.pos += n;
        Ok(n)
    }
}

/// Client side: an adapter reached over TCP.
#[derive(Clone, Debug)]
pub struct TcpAdapter {
    id: String,
    addr: String,
}

impl TcpAdapter {
    pub fn new(id: &str, addr: impl Into<String>) -> TcpAdapter {
        TcpAdapter { id: id.to_string(), addr: addr.into() }
    }

    fn request(&self, msg: &str) -> Result<BufReader<TcpStream>, AdapterError> {
        let transport = |e: io::Error| AdapterError::Transport(format!("{}: {e}", self.addr));
        let mut conn = TcpStream::connect(&self.addr).map_err(transport)?;
        write_frame(&mut conn, FRAME_CONTROL, msg.as_bytes()).map_err(transport)?;
        conn.flush().map_err(transport)?;
        Ok(BufReader::new(conn))
    }

    fn error(payload: &[u8]) -> AdapterError {
        let msg = String::from_utf8_lossy(payload);
        match msg.strip_prefix(REJECTED) {
            Some(m) => AdapterError::Rejected(m.to_string()),
            None => AdapterError::Transport(msg.into_owned()),
        }
    }
}

impl Adapter for TcpAdapter {
    fn id(&self) -> &str {
        &self.id
    }

    fn get_metadata(&self) -> Result<String, AdapterError> {
        let mut conn = self.request("META")?;
        let (kind, payload) = read_frame(&mut conn)?;
        match kind {
            FRAME_CONTROL => {
                let (mut d, _) = SourceDescriptor::parse(&String::from_utf8_lossy(&payload))?;
                d.id = self.id.clone();
                d.transport = Transport::Tcp(self.addr.clone());
                Ok(d.to_xml())
            }
            FRAME_ERROR => Err(Self::error(&payload)),
            k => Err(AdapterError::Transport(format!("unexpected frame type {k}"))),
        }
    }

    fn execute(&self, q: &AdapterQuery) -> Result<EventStream, AdapterError> {
        let mut conn = self.request(&format!("QUERY {}", q.text))?;
        let (kind, payload) = read_frame(&mut conn)?;
        match kind {
            FRAME_CHUNK => Ok(decode_documents(ChunkReader { conn, buf: payload, pos: 0, done: false })),
            FRAME_END => Ok(crate::xml::empty_stream()),
            FRAME_ERROR => Err(Self::error(&payload)),
            k => Err(AdapterError::Transport(format!("unexpected frame type {k}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::tabular::write_table;
    use crate::adapters::TabularAdapter;
    use crate::xml::{documents, XmlEvent};

    #[test]
    fn remote_answers_equal_local_answers() {
        let dir = tempfile::tempdir().unwrap();
        let rows = (1..=70).map(|i| vec![i.to_string(), format!("comment {i}")]);
        write_table(&dir.path().join("ORDERS.tbl"), &["orderkey", "comment"], rows).unwrap();
        let local = Arc::new(TabularAdapter::new("A3", dir.path()));
        let server = serve(local.clone(), "127.0.0.1:0", None).unwrap();
        let remote = TcpAdapter::new("A3", server.addr().to_string());

        let q = AdapterQuery::new("for $o in Collection(\"ORDERS\")/orders where $o/orderkey < 40 return ($o/comment)");
        let a: Vec<XmlEvent> = local.execute(&q).unwrap().collect();
        let b: Vec<XmlEvent> = remote.execute(&q).unwrap().collect();
        assert_eq!(documents(&a).unwrap(), documents(&b).unwrap());
        assert_eq!(documents(&b).unwrap().len(), 39);

        let d = remote.descriptor().unwrap();
        assert_eq!(d.transport, Transport::Tcp(server.addr().to_string()));
        assert_eq!(d.collection("ORDERS").unwrap().cardinality, 70);

        let bad = remote.execute(&AdapterQuery::new("for $o in Collection(\"NOPE\")/nope return $o"));
        assert!(matches!(bad, Err(AdapterError::Rejected(_))));
    }

    #[test]
    fn unreachable_server_is_a_transport_error() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        drop(listener);
        assert!(matches!(TcpAdapter::new("X", addr.to_string()).get_metadata(), Err(AdapterError::Transport(_))));
    }
}
