//! Minimal HTTP/1.1 server standing in for an inference endpoint.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use lmsteg_core::provider::{DistributionProvider, PromptContext};
use lmsteg_core::TokenId;
use serde_json::{json, Value};

pub struct Request {
    pub body: Value,
    pub authorization: Option<String>,
}

pub type Handler = dyn Fn(&Request, usize) -> (u16, Value) + Send + Sync;

pub struct MockServer {
    pub endpoint: String,
    pub hits: Arc<AtomicUsize>,
}

impl MockServer {
    /// `handler` gets the parsed request and a zero-based request counter.
    pub fn start(handler: Arc<Handler>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let endpoint = format!("http://{}/v1/next", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let counter = hits.clone();
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { break };
                let (handler, counter) = (handler.clone(), counter.clone());
                thread::spawn(move || serve(stream, &*handler, &counter));
            }
        });
        Self { endpoint, hits }
    }

    /// Serves top-k log-probabilities of `provider` with an empty prompt
    /// context, like a deterministic model server would.
    pub fn for_provider<P>(provider: P) -> Self
    where
        P: DistributionProvider<f64> + Send + Sync + 'static,
    {
        Self::start(Arc::new(move |req: &Request, _| {
            let prefix: Vec<TokenId> = req.body["prefix_tokens"]
                .as_array()
                .unwrap()
                .iter()
                .map(|v| v.as_u64().unwrap() as TokenId)
                .collect();
            let top_k = req.body["top_k"].as_u64().unwrap() as usize;
            let mut probs = provider
                .next_scores(&PromptContext::empty(), &prefix)
                .unwrap()
                .softmax();
            probs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            probs.truncate(top_k);
            let tokens: Vec<TokenId> = probs.iter().map(|(t, _)| *t).collect();
            let logprobs: Vec<f64> = probs.iter().map(|(_, p)| p.ln()).collect();
            (200, json!({"tokens": tokens, "logprobs": logprobs, "eos_token": provider.eos_token()}))
        }))
    }
}

fn serve(stream: TcpStream, handler: &Handler, counter: &AtomicUsize) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    stream.set_nodelay(true).unwrap();
    let mut writer = stream;
    loop {
        let mut request_line = String::new();
        if reader.read_line(&mut request_line).unwrap_or(0) == 0 {
            return;
        }
        let mut length = 0;
        let mut authorization = None;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            let line = line.trim_end();
            if line.is_empty() {
                break;
            }
            let (name, value) = line.split_once(':').unwrap();
            match name.to_ascii_lowercase().as_str() {
                "content-length" => length = value.trim().parse().unwrap(),
                "authorization" => authorization = Some(value.trim().to_string()),
                _ => {}
            }
        }
        let mut body = vec![0; length];
        reader.read_exact(&mut body).unwrap();
        let request = Request {
            body: serde_json::from_slice(&body).unwrap_or(Value::Null),
            authorization,
        };
        let n = counter.fetch_add(1, Ordering::SeqCst);
        let (status, reply) = handler(&request, n);
        let reply = reply.to_string();
        let head = format!(
            "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n",
            reply.len()
        );
        if writer.write_all(format!("{head}{reply}").as_bytes()).is_err() {
            return;
        }
    }
}
