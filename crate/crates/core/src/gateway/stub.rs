//! A tiny loopback HTTP server speaking the [`super::wire`] protocol.
//!
//! Used to exercise [`super::HttpGateway`] offline: tests script status
//! codes, delays and replies per request. One thread per connection, every
//! connection closed after one exchange.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use super::wire::{ChatRequest, ChatResponse};

#[derive(Debug, Clone, PartialEq)]
pub struct StubReply {
    pub status: u16,
    pub body: String,
    pub delay: Duration,
}

impl StubReply {
    pub fn completion(text: impl Into<String>) -> Self {
        Self {
            status: 200,
            body: serde_json::to_string(&ChatResponse::from_text(text)).expect("serializable"),
            delay: Duration::ZERO,
        }
    }

    pub fn status(status: u16) -> Self {
        Self {
            status,
            body: format!("{{\"error\": \"status {status}\"}}"),
            delay: Duration::ZERO,
        }
    }

    pub fn after(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }
}

/// What the handler sees: the parsed body, or `None` if it was not a valid
/// chat request; plus the zero-based index of this request.
pub struct StubRequest {
    pub index: usize,
    pub body: Option<ChatRequest>,
}

type Handler = dyn Fn(&StubRequest) -> StubReply + Send + Sync;

pub struct StubServer {
    addr: SocketAddr,
    hits: Arc<AtomicUsize>,
    stop: Arc<AtomicBool>,
    acceptor: Option<JoinHandle<()>>,
}

impl StubServer {
    pub fn start(
        handler: impl Fn(&StubRequest) -> StubReply + Send + Sync + 'static,
    ) -> io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let hits = Arc::new(AtomicUsize::new(0));
        let stop = Arc::new(AtomicBool::new(false));
        let handler: Arc<Handler> = Arc::new(handler);

        let acceptor = {
            let hits = Arc::clone(&hits);
            let stop = Arc::clone(&stop);
            std::thread::spawn(move || {
                for stream in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = stream else { continue };
                    let index = hits.fetch_add(1, Ordering::SeqCst);
                    let handler = Arc::clone(&handler);
                    std::thread::spawn(move || {
                        let _ = serve_one(stream, index, handler.as_ref());
                    });
                }
            })
        };

        Ok(Self {
            addr,
            hits,
            stop,
            acceptor: Some(acceptor),
        })
    }

    /// A model stand-in: 400 for empty or malformed prompts, otherwise the
    /// reply computed from the prompt.
    pub fn model(respond: impl Fn(&str) -> String + Send + Sync + 'static) -> io::Result<Self> {
        Self::start(
            move |req| match req.body.as_ref().and_then(|b| b.prompt()) {
                Some(p) if !p.is_empty() => StubReply::completion(respond(p)),
                _ => StubReply::status(400),
            },
        )
    }

    pub fn url(&self) -> String {
        format!("http://{}/v1/chat/completions", self.addr)
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(handle) = self.acceptor.take() {
            let _ = handle.join();
        }
    }
}

fn serve_one(stream: TcpStream, index: usize, handler: &Handler) -> io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut content_length = 0usize;
    let mut line = String::new();
    reader.read_line(&mut line)?;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 || line == "\r\n" || line == "\n" {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            if name.trim().eq_ignore_ascii_case("content-length") {
                content_length = value.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;
    let parsed = serde_json::from_slice::<ChatRequest>(&body).ok();

    let reply = handler(&StubRequest {
        index,
        body: parsed,
    });
    if !reply.delay.is_zero() {
        std::thread::sleep(reply.delay);
    }
    let mut stream = stream;
    write!(
        stream,
        "HTTP/1.1 {} STUB\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        reply.status,
        reply.body.len(),
        reply.body
    )?;
    stream.flush()
}
